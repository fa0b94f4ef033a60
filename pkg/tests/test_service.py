"""Operation-layer and HTTP-layer tests.

The operations are exercised directly (they are what the CLI calls), then
again through the FastAPI app to pin the endpoint contracts: status codes,
error envelopes, and pydantic rejection of out-of-range fields.
"""

import json

import pytest
from fastapi.testclient import TestClient

from mutadet.service import (
    GRID_CHOICES,
    app,
    build_config,
    op_analyze,
    op_simulate,
    op_validate,
)
from mutadet.types import AnalysisConfig, ValidationError
from mutadet.wire import WireFormatError


@pytest.fixture(scope="module")
def identity_dataset():
    return op_simulate(images=3, objects_min=1, objects_max=2, seed=5, runs=3, grid="identity")


@pytest.fixture(scope="module")
def mcd_dataset():
    return op_simulate(images=4, objects_min=1, objects_max=3, seed=11, runs=4, grid="mcd")


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


class TestBuildConfig:
    def test_no_overrides_gives_defaults(self):
        assert build_config(None) == AnalysisConfig()
        assert build_config({}) == AnalysisConfig()

    def test_string_values_are_coerced(self):
        cfg = build_config({"alpha": "0.05", "n_runs": "7", "iou_threshold": "0.25"})
        assert cfg.alpha == 0.05
        assert cfg.n_runs == 7
        assert cfg.iou_threshold == 0.25

    def test_native_values_pass_through(self):
        cfg = build_config({"miss_threshold": 0.75, "binomial_null_p": 0.1})
        assert cfg.miss_threshold == 0.75
        assert cfg.binomial_null_p == 0.1

    def test_unknown_key_is_rejected(self):
        with pytest.raises(ValidationError, match="unknown option"):
            build_config({"aplha": 0.05})

    def test_bad_value_is_rejected(self):
        with pytest.raises(ValidationError, match="bad value"):
            build_config({"alpha": "lots"})

    def test_out_of_range_value_is_rejected(self):
        with pytest.raises(ValidationError):
            build_config({"alpha": "1.5"})


class TestOpValidate:
    def test_complete_grid(self, identity_dataset):
        doc = op_validate(identity_dataset["records"])
        assert doc["complete"] is True
        assert doc["defects"] == []
        assert doc["n_runs"] == 3

    def test_explicit_runs_overrides_inference(self, identity_dataset):
        doc = op_validate(identity_dataset["records"], runs=5)
        assert doc["complete"] is False
        assert any(d["kind"] == "missing" for d in doc["defects"])

    def test_dropped_line_is_a_defect(self, identity_dataset):
        lines = identity_dataset["records"].strip().split("\n")
        doc = op_validate("\n".join(lines[:-1]) + "\n")
        assert doc["complete"] is False

    def test_malformed_line_raises(self):
        with pytest.raises(WireFormatError):
            op_validate("not json\n")


class TestOpSimulate:
    def test_result_keys(self, identity_dataset):
        assert set(identity_dataset) == {"records", "ground_truth", "images"}
        assert identity_dataset["images"] == ["img_000", "img_001", "img_002"]

    def test_identity_grid_models(self, identity_dataset):
        models = {json.loads(line)["model_id"] for line in
                  identity_dataset["records"].strip().split("\n")}
        assert models == {"original", "identity"}

    def test_full_grid_includes_both_operators(self):
        result = op_simulate(images=1, objects_min=1, objects_max=1, runs=2, grid="full")
        models = {json.loads(line)["model_id"] for line in
                  result["records"].strip().split("\n")}
        assert "identity" in models
        assert "mcd:0.10" in models
        assert "mcb:0.50x9" in models

    def test_deterministic(self):
        a = op_simulate(images=2, objects_min=1, objects_max=2, seed=3, runs=2, grid="identity")
        b = op_simulate(images=2, objects_min=1, objects_max=2, seed=3, runs=2, grid="identity")
        assert a == b

    def test_unknown_grid_rejected(self):
        assert "nope" not in GRID_CHOICES
        with pytest.raises(ValidationError, match="grid"):
            op_simulate(images=1, grid="nope")


class TestOpAnalyze:
    def test_stream_can_be_split_across_texts(self, identity_dataset):
        lines = identity_dataset["records"].strip().split("\n")
        mid = len(lines) // 2
        split = ["\n".join(lines[:mid]) + "\n", "\n".join(lines[mid:]) + "\n"]
        joined = op_analyze([identity_dataset["records"]])
        parts = op_analyze(split)
        assert joined == parts

    def test_ground_truth_text_is_applied(self, identity_dataset):
        report = op_analyze(
            [identity_dataset["records"]],
            ground_truth_text=identity_dataset["ground_truth"],
        )
        assert report["filter"]["ground_truth_given"] is True
        assert report["filter"]["kept_images"] == ["img_000", "img_001", "img_002"]

    def test_config_overrides_are_echoed(self, identity_dataset):
        report = op_analyze([identity_dataset["records"]], config={"alpha": "0.2"})
        assert report["config"]["alpha"] == 0.2


class TestHttpEndpoints:
    def test_health(self, client):
        resp = client.get("/v1/health")
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "ok"
        assert "version" in body

    def test_simulate_then_validate(self, client):
        sim = client.post(
            "/v1/simulate",
            json={"images": 2, "objects_min": 1, "objects_max": 2, "runs": 3,
                  "grid": "identity", "seed": 1},
        )
        assert sim.status_code == 200
        records = sim.json()["records"]
        val = client.post("/v1/validate", json={"records": records})
        assert val.status_code == 200
        assert val.json()["complete"] is True

    def test_analyze_roundtrip(self, client, identity_dataset):
        resp = client.post(
            "/v1/analyze",
            json={"records": identity_dataset["records"],
                  "ground_truth": identity_dataset["ground_truth"]},
        )
        assert resp.status_code == 200
        report = resp.json()
        assert report["schema"] == "mutadet/report/v1"
        assert report["models"][0] == "original"

    def test_analyze_incomplete_grid_is_400_with_defects(self, client, identity_dataset):
        lines = identity_dataset["records"].strip().split("\n")
        resp = client.post("/v1/analyze", json={"records": "\n".join(lines[:-1]) + "\n"})
        assert resp.status_code == 400
        detail = resp.json()["detail"]
        assert "error" in detail
        assert detail["defects"]

    def test_analyze_malformed_records_is_400(self, client):
        resp = client.post("/v1/analyze", json={"records": "{broken\n"})
        assert resp.status_code == 400
        assert "error" in resp.json()["detail"]

    def test_simulate_rejects_zero_images(self, client):
        resp = client.post("/v1/simulate", json={"images": 0})
        assert resp.status_code == 422

    def test_correlate_rejects_unknown_operator(self, client):
        resp = client.post("/v1/correlate", json={"report": {}, "operator": "xyz"})
        assert resp.status_code == 422

    def test_analyze_rejects_single_run(self, client):
        resp = client.post("/v1/analyze", json={"records": "", "runs": 1})
        assert resp.status_code == 422

    def test_compare_suites_roundtrip(self, client, mcd_dataset):
        suites = {"img_000": "a", "img_001": "a", "img_002": "b", "img_003": "b"}
        analyzed = client.post(
            "/v1/analyze", json={"records": mcd_dataset["records"], "suites": suites}
        )
        assert analyzed.status_code == 200
        resp = client.post(
            "/v1/compare-suites",
            json={"report": analyzed.json(), "keys": ["obj_ms_miss"]},
        )
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["schema"] == "mutadet/compare-suites/v1"
        assert doc["rows"][0]["score_key"] == "obj_ms_miss"

    def test_compare_suites_single_suite_is_400(self, client, mcd_dataset):
        analyzed = client.post("/v1/analyze", json={"records": mcd_dataset["records"]})
        resp = client.post("/v1/compare-suites", json={"report": analyzed.json()})
        assert resp.status_code == 400
        assert "error" in resp.json()["detail"]

    def test_correlate_roundtrip(self, client, mcd_dataset):
        analyzed = client.post("/v1/analyze", json={"records": mcd_dataset["records"]})
        resp = client.post(
            "/v1/correlate",
            json={"report": analyzed.json(), "operator": "mcd", "keys": ["iou_ms"]},
        )
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["schema"] == "mutadet/correlate/v1"
        assert doc["operator"] == "mcd"
        assert doc["rows"][0]["n"] == 9
