"""Rendering tests for the canonical, csv, and table output formats.

Hand-built documents pin the exact cell conventions (repr for floats, empty
cell for absent values, quoting); one end-to-end render over a real report
checks the fake documents have not drifted from the real shape.
"""

import csv
import io
import json

import pytest

from mutadet.reports import (
    FORMATS,
    canonical_json,
    render,
    report_to_csv,
    report_to_table,
    stats_to_csv,
    stats_to_table,
)
from mutadet.scores import SCORE_KEYS
from mutadet.service import op_analyze, op_simulate


def scores(**overrides):
    table = {key: 0.0 for key in SCORE_KEYS}
    table.update(overrides)
    return table


def kill(killed=False, witness="img_000", p=1.0):
    return {"killed": killed, "witness_image": witness, "min_p_value": p}


def fake_report(mutants=None, suite_id="all"):
    if mutants is None:
        mutants = [
            {
                "model_id": "mcd:0.10",
                "operator": "mcd",
                "dropout_rate": 0.1,
                "block_size": None,
                "scores": scores(obj_ms_miss=1 / 3, iou_ms=None),
                "kills": {"miss": kill(True, p=0.001), "ghost": kill(), "mg": kill()},
            }
        ]
    return {
        "schema": "mutadet/report/v1",
        "config": {
            "iou_threshold": 0.5,
            "alpha": 0.01,
            "n_runs": 4,
            "miss_threshold": 0.5,
            "binomial_null_p": 0.05,
            "recall_floor": 1.0,
            "precision_floor": 0.0,
        },
        "models": ["original"] + [m["model_id"] for m in mutants],
        "filter": {"ground_truth_given": False, "kept_images": ["img_000"], "dropped_images": []},
        "suites": {
            suite_id: {
                "images": ["img_000"],
                "mutants": mutants,
                "aggregate": scores(obj_ms_miss=1 / 3, iou_ms=None),
            }
        },
    }


def stats_doc(rows, suite=False):
    doc = {
        "schema": "mutadet/compare-suites/v1",
        "test": "kruskal-wallis",
        "alpha": 0.01,
        "suites": ["a", "b"],
        "rows": rows,
    }
    if suite:
        doc = {
            "schema": "mutadet/correlate/v1",
            "test": "spearman",
            "operator": "mcd",
            "alpha": 0.01,
            "rows": rows,
        }
    return doc


OK_ROW = {
    "score_key": "iou_ms",
    "status": "ok",
    "n_per_suite": [9, 9],
    "statistic": 7.2,
    "p_value": 0.0273,
    "effect": 0.5,
    "df": "1",
    "band": "large",
    "significant": True,
}


class TestCanonicalJson:
    def test_layout(self):
        assert canonical_json({"a": 1}) == '{\n  "a": 1\n}\n'

    def test_round_trips(self):
        doc = fake_report()
        assert json.loads(canonical_json(doc)) == doc

    def test_nan_is_rejected(self):
        with pytest.raises(ValueError):
            canonical_json({"x": float("nan")})

    def test_byte_stable(self):
        assert canonical_json(fake_report()) == canonical_json(fake_report())


class TestReportCsv:
    def test_header(self):
        first = report_to_csv(fake_report()).split("\n")[0]
        assert first == ",".join(
            ["suite", "model_id", "operator", "dropout_rate", "block_size", *SCORE_KEYS]
        )

    def test_mutant_row_cells(self):
        rows = list(csv.DictReader(io.StringIO(report_to_csv(fake_report()))))
        assert len(rows) == 2
        row = rows[0]
        assert row["suite"] == "all"
        assert row["model_id"] == "mcd:0.10"
        assert row["dropout_rate"] == "0.1"
        assert row["block_size"] == ""
        assert row["obj_ms_miss"] == "0.3333333333333333"
        assert row["iou_ms"] == ""

    def test_aggregate_row(self):
        rows = list(csv.DictReader(io.StringIO(report_to_csv(fake_report()))))
        agg = rows[-1]
        assert agg["model_id"] == "(aggregate)"
        assert agg["operator"] == ""
        assert agg["obj_ms_miss"] == "0.3333333333333333"

    def test_floats_use_repr(self):
        text = report_to_csv(fake_report())
        assert "0.3333333333333333" in text
        assert "0.33333334" not in text


class TestReportTable:
    def test_kill_flags_positional(self):
        mutant = {
            "model_id": "mcd:0.10",
            "operator": "mcd",
            "dropout_rate": 0.1,
            "block_size": None,
            "scores": scores(),
            "kills": {"miss": kill(True), "ghost": kill(), "mg": kill(True)},
        }
        text = report_to_table(fake_report([mutant]))
        assert " M-M " in text

    def test_not_killed_is_dashes(self):
        text = report_to_table(fake_report())
        assert " M-- " in text

    def test_mentions_suite_and_config(self):
        text = report_to_table(fake_report(suite_id="sparse"))
        assert "suite 'sparse'" in text
        assert "runs=4" in text

    def test_absent_score_renders_dash(self):
        text = report_to_table(fake_report())
        lines = [l for l in text.split("\n") if l.startswith("    iou_ms")]
        assert lines and lines[0].split()[-1] == "-"


class TestStatsCsv:
    def test_no_suite_column_for_compare(self):
        text = stats_to_csv(stats_doc([OK_ROW]))
        header = text.split("\n")[0]
        assert header.startswith("score_key,")
        assert "suite" not in header

    def test_suite_column_for_correlate(self):
        row = {**OK_ROW, "suite": "all", "n": 9}
        del row["n_per_suite"]
        text = stats_to_csv(stats_doc([row], suite=True))
        rows = list(csv.DictReader(io.StringIO(text)))
        assert rows[0]["suite"] == "all"
        assert rows[0]["n"] == "9"

    def test_group_sizes_joined(self):
        rows = list(csv.DictReader(io.StringIO(stats_to_csv(stats_doc([OK_ROW])))))
        assert rows[0]["n"] == "9+9"

    def test_df_with_comma_is_quoted(self):
        row = {**OK_ROW, "df": "(2, 6)"}
        text = stats_to_csv(stats_doc([row]))
        assert '"(2, 6)"' in text
        rows = list(csv.DictReader(io.StringIO(text)))
        assert rows[0]["df"] == "(2, 6)"

    def test_insufficient_row_has_empty_stat_cells(self):
        row = {"score_key": "iou_ms", "status": "insufficient data", "n_per_suite": [0, 0]}
        rows = list(csv.DictReader(io.StringIO(stats_to_csv(stats_doc([row])))))
        assert rows[0]["status"] == "insufficient data"
        assert rows[0]["statistic"] == ""
        assert rows[0]["n"] == "0+0"


class TestStatsTable:
    def test_ok_row(self):
        text = stats_to_table(stats_doc([OK_ROW]))
        assert text.startswith("kruskal-wallis  (alpha=0.01)")
        assert "iou_ms" in text
        assert "p=0.0273" in text
        assert text.rstrip().endswith("*")

    def test_not_significant_has_no_marker(self):
        row = {**OK_ROW, "significant": False}
        assert not stats_to_table(stats_doc([row])).rstrip().endswith("*")

    def test_status_row(self):
        row = {"score_key": "iou_ms", "status": "insufficient data", "n_per_suite": [0, 0]}
        text = stats_to_table(stats_doc([row]))
        assert "insufficient data" in text

    def test_suite_prefix_and_operator(self):
        row = {**OK_ROW, "suite": "dense", "n": 9}
        text = stats_to_table(stats_doc([row], suite=True))
        assert "operator=mcd" in text
        assert "dense/iou_ms" in text


class TestRenderDispatch:
    def test_formats_inventory(self):
        assert FORMATS == ("canonical", "csv", "table")

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError, match="unknown format"):
            render(fake_report(), "yaml")

    def test_report_dispatch(self):
        doc = fake_report()
        assert render(doc, "canonical") == canonical_json(doc)
        assert render(doc, "csv") == report_to_csv(doc)
        assert render(doc, "table") == report_to_table(doc)

    def test_stats_dispatch(self):
        doc = stats_doc([OK_ROW])
        assert render(doc, "csv") == stats_to_csv(doc)
        assert render(doc, "table") == stats_to_table(doc)


@pytest.fixture(scope="module")
def real_report():
    data = op_simulate(images=2, objects_min=1, objects_max=2, seed=2, runs=3, grid="identity")
    return op_analyze([data["records"]])


class TestAgainstRealReport:
    def test_csv_shape(self, real_report):
        rows = list(csv.DictReader(io.StringIO(report_to_csv(real_report))))
        assert [r["model_id"] for r in rows] == ["identity", "(aggregate)"]
        assert all(set(SCORE_KEYS) <= set(r) for r in rows)

    def test_table_renders(self, real_report):
        text = report_to_table(real_report)
        assert "identity" in text
        assert " --- " in text

    def test_canonical_parses_back(self, real_report):
        assert json.loads(canonical_json(real_report)) == real_report
