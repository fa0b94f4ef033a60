"""Service surface: the operation layer shared by the HTTP API and the CLI,
plus the FastAPI application itself.

Every operation takes and returns wire-format text or plain documents, so
the HTTP endpoints are thin pydantic shells and the CLI calls the same
functions in-process. Analysis is stateless; each request stands alone.
"""

from __future__ import annotations

import dataclasses
from typing import Literal, Mapping, Sequence

from pydantic import BaseModel, Field

from mutadet import analysis
from mutadet.simulator import (
    SceneSpec,
    mcb_grid,
    mcd_grid,
    simulate_dataset,
)
from mutadet.types import AnalysisConfig, ValidationError
from mutadet.wire import (
    parse_ground_truth,
    parse_records,
    serialize_ground_truth,
    serialize_records,
    validate_run_set,
)

GRID_CHOICES = ("identity", "mcd", "mcb", "full")


def build_config(overrides: Mapping[str, object] | None = None) -> AnalysisConfig:
    """AnalysisConfig from defaults plus overrides keyed by field name.

    String values are coerced (config files are text); unknown keys are
    rejected so typos cannot silently fall back to a default.
    """
    cfg = AnalysisConfig()
    if not overrides:
        return cfg
    fields = AnalysisConfig.FIELD_TYPES
    values = {}
    for key, raw in overrides.items():
        if key not in fields:
            raise ValidationError(
                "config", f"unknown option {key!r}; valid: {', '.join(sorted(fields))}"
            )
        caster = fields[key]
        try:
            values[key] = caster(raw)
        except (TypeError, ValueError) as exc:
            raise ValidationError("config", f"bad value for {key}: {raw!r}") from exc
    return dataclasses.replace(cfg, **values)


def op_validate(
    records_text: str, runs: int | None = None, config: Mapping[str, object] | None = None
) -> dict:
    """Parse records and check run-grid completeness; never raises for
    defects, only for unreadable input."""
    records = parse_records(records_text)
    cfg = build_config(config)
    if runs is not None:
        cfg = dataclasses.replace(cfg, n_runs=runs)
    elif records:
        cfg = dataclasses.replace(cfg, n_runs=max(r.run for r in records) + 1)
    return validate_run_set(records, cfg).to_dict()


def _grid(choice: str):
    if choice == "identity":
        return [None]
    if choice == "mcd":
        return list(mcd_grid())
    if choice == "mcb":
        return list(mcb_grid())
    if choice == "full":
        return [None] + list(mcd_grid()) + list(mcb_grid())
    raise ValidationError("grid", f"must be one of {GRID_CHOICES}, got {choice!r}")


def op_simulate(
    images: int = 25,
    objects_min: int = 1,
    objects_max: int = 5,
    width: float = 640.0,
    height: float = 480.0,
    classes: int = 5,
    seed: int = 0,
    runs: int = 10,
    grid: str = "mcd",
    image_prefix: str = "img",
) -> dict:
    """Generate a synthetic dataset; returns wire-format text blocks."""
    spec = SceneSpec(
        n_images=images,
        objects_min=objects_min,
        objects_max=objects_max,
        width=width,
        height=height,
        n_classes=classes,
        seed=seed,
        image_prefix=image_prefix,
    )
    truths, records = simulate_dataset(spec, _grid(grid), runs)
    return {
        "records": serialize_records(records),
        "ground_truth": serialize_ground_truth(truths),
        "images": [gt.image_id for gt in truths],
    }


def op_analyze(
    records_texts: Sequence[str],
    ground_truth_text: str | None = None,
    suites: Mapping[str, str] | None = None,
    config: Mapping[str, object] | None = None,
    runs: int | None = None,
) -> dict:
    """Full analysis from wire-format text to the report document."""
    records = []
    for text in records_texts:
        records.extend(parse_records(text))
    ground_truth = (
        parse_ground_truth(ground_truth_text) if ground_truth_text is not None else None
    )
    cfg = build_config(config)
    return analysis.analyze(
        records, config=cfg, ground_truth=ground_truth, suites=suites, n_runs=runs
    )


def op_compare_suites(
    report: Mapping, keys: Sequence[str] | None = None, alpha: float | None = None
) -> dict:
    return analysis.compare_suites(report, keys=keys, alpha=alpha)


def op_correlate(
    report: Mapping,
    operator: str,
    keys: Sequence[str] | None = None,
    alpha: float | None = None,
) -> dict:
    return analysis.correlate(report, operator, keys=keys, alpha=alpha)


# ---------------------------------------------------------------------------
# HTTP layer


class ValidateRequest(BaseModel):
    records: str
    runs: int | None = Field(default=None, ge=1)
    config: dict[str, float | int | str] | None = None


class SimulateRequest(BaseModel):
    images: int = Field(default=25, ge=1)
    objects_min: int = Field(default=1, ge=0)
    objects_max: int = Field(default=5, ge=0)
    width: float = Field(default=640.0, gt=1.0)
    height: float = Field(default=480.0, gt=1.0)
    classes: int = Field(default=5, ge=1)
    seed: int = Field(default=0, ge=0)
    runs: int = Field(default=10, ge=1)
    grid: Literal["identity", "mcd", "mcb", "full"] = "mcd"
    image_prefix: str = "img"


class AnalyzeRequest(BaseModel):
    records: str
    ground_truth: str | None = None
    suites: dict[str, str] | None = None
    config: dict[str, float | int | str] | None = None
    runs: int | None = Field(default=None, ge=2)


class CompareSuitesRequest(BaseModel):
    report: dict
    keys: list[str] | None = None
    alpha: float | None = Field(default=None, gt=0.0, lt=1.0)


class CorrelateRequest(BaseModel):
    report: dict
    operator: Literal["mcd", "mcb"]
    keys: list[str] | None = None
    alpha: float | None = Field(default=None, gt=0.0, lt=1.0)


def create_app():
    """Build the FastAPI application (import-time cheap, test-friendly)."""
    from fastapi import FastAPI, HTTPException

    from mutadet import __version__
    from mutadet.analysis import AnalysisInputError
    from mutadet.wire import WireFormatError

    app = FastAPI(
        title="mutadet",
        version=__version__,
        description="Uncertainty-aware mutation analysis for object-detection software",
    )

    def run(op, *args, **kwargs):
        try:
            return op(*args, **kwargs)
        except AnalysisInputError as exc:
            detail = {"error": str(exc)}
            if exc.defects:
                detail["defects"] = exc.defects
            raise HTTPException(status_code=400, detail=detail) from exc
        except (ValidationError, WireFormatError, ValueError) as exc:
            raise HTTPException(status_code=400, detail={"error": str(exc)}) from exc

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/v1/validate")
    def validate(req: ValidateRequest) -> dict:
        return run(op_validate, req.records, runs=req.runs, config=req.config)

    @app.post("/v1/simulate")
    def simulate(req: SimulateRequest) -> dict:
        return run(
            op_simulate,
            images=req.images,
            objects_min=req.objects_min,
            objects_max=req.objects_max,
            width=req.width,
            height=req.height,
            classes=req.classes,
            seed=req.seed,
            runs=req.runs,
            grid=req.grid,
            image_prefix=req.image_prefix,
        )

    @app.post("/v1/analyze")
    def analyze_endpoint(req: AnalyzeRequest) -> dict:
        return run(
            op_analyze,
            [req.records],
            ground_truth_text=req.ground_truth,
            suites=req.suites,
            config=req.config,
            runs=req.runs,
        )

    @app.post("/v1/compare-suites")
    def compare_suites_endpoint(req: CompareSuitesRequest) -> dict:
        return run(op_compare_suites, req.report, keys=req.keys, alpha=req.alpha)

    @app.post("/v1/correlate")
    def correlate_endpoint(req: CorrelateRequest) -> dict:
        return run(op_correlate, req.report, req.operator, keys=req.keys, alpha=req.alpha)

    return app


app = create_app()
