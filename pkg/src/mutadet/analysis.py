"""End-to-end analysis: records in, per-(mutant, suite) score report out,
plus the two downstream statistical views (suite comparison, ratio
correlation).

The report is built as plain dicts with fully deterministic key and row
order, so serializing the same inputs twice is byte-identical.
"""

from __future__ import annotations

import dataclasses
from typing import Iterable, Mapping, Sequence

from mutadet.filtering import filter_passing_cases
from mutadet.matching import build_tracks, classify_tracks, match_outputs
from mutadet.scores import (
    KILL_CRITERIA,
    SCORE_KEYS,
    ScoreTable,
    TrackedImage,
    aggregate,
    iou_ms,
    kill_verdict,
    obj_ms,
    ua_ms,
)
from mutadet.stats import (
    DegenerateDataError,
    eta_squared_band,
    kruskal_wallis,
    multiple_correlation,
    multiple_r_band,
    spearman,
    spearman_band,
)
from mutadet.types import AnalysisConfig, GroundTruth, RunOutput, ValidationError
from mutadet.wire import ORIGINAL_MODEL_ID, parse_model_id, validate_run_set

DEFAULT_SUITE = "all"
UNMAPPED_SUITE = "default"

REPORT_SCHEMA = "mutadet/report/v1"


class AnalysisInputError(ValueError):
    """The record set cannot be analyzed as given."""

    def __init__(self, message: str, defects: Sequence[str] = ()):
        super().__init__(message)
        self.defects = list(defects)


def _model_sort_key(model_id: str):
    cfg = parse_model_id(model_id)
    if cfg is None:
        return (0, model_id, 0.0, 0)
    if cfg.operator == "mcd":
        return (1, "", cfg.dropout_rate, 0)
    return (2, "", cfg.dropout_rate, cfg.block_size)


def _group_records(
    records: Sequence[RunOutput],
) -> dict[str, dict[str, dict[int, RunOutput]]]:
    grouped: dict[str, dict[str, dict[int, RunOutput]]] = {}
    for rec in records:
        grouped.setdefault(rec.model_id, {}).setdefault(rec.image_id, {})[rec.run] = rec
    return grouped


def _infer_n_runs(records: Sequence[RunOutput]) -> int:
    return max(rec.run for rec in records) + 1


def analyze(
    records: Sequence[RunOutput],
    config: AnalysisConfig | None = None,
    ground_truth: Sequence[GroundTruth] | None = None,
    suites: Mapping[str, str] | None = None,
    n_runs: int | None = None,
) -> dict:
    """Score every mutant over every suite. Returns the report document.

    n_runs None infers the run count from the records (max index + 1);
    an explicit value is enforced instead. Either way the record set must
    form a complete (model, image, run) grid, the original model must be
    present, and every mutant id must parse under the model-id grammar.
    """
    if not records:
        raise AnalysisInputError("no records given")
    cfg = config if config is not None else AnalysisConfig()
    effective_runs = n_runs if n_runs is not None else _infer_n_runs(records)
    if effective_runs < 2:
        raise AnalysisInputError(f"need at least 2 runs, got {effective_runs}")
    cfg = dataclasses.replace(cfg, n_runs=effective_runs)

    check = validate_run_set(list(records), cfg)
    if not check.complete:
        raise AnalysisInputError(
            "records do not form a complete run grid",
            defects=[d.describe() for d in check.defects],
        )
    grouped = _group_records(records)
    if ORIGINAL_MODEL_ID not in grouped:
        raise AnalysisInputError("no records for the original model")
    original_images = set(grouped[ORIGINAL_MODEL_ID])
    mutant_ids = [m for m in grouped if m != ORIGINAL_MODEL_ID]
    if not mutant_ids:
        raise AnalysisInputError("no mutant records given")
    for model_id in mutant_ids:
        parse_model_id(model_id)  # raises ValidationError on bad ids
        images = set(grouped[model_id])
        if images != original_images:
            missing = sorted(original_images - images)
            extra = sorted(images - original_images)
            raise AnalysisInputError(
                f"model {model_id!r} image coverage differs from the original "
                f"(missing {missing}, extra {extra})"
            )
    mutant_ids.sort(key=_model_sort_key)

    original_run0 = [grouped[ORIGINAL_MODEL_ID][img][0] for img in sorted(original_images)]
    if ground_truth is not None:
        kept = filter_passing_cases(original_run0, list(ground_truth), cfg)
        annotated = {gt.image_id for gt in ground_truth}
        # images the ground truth does not cover cannot be assessed; keep them
        kept |= original_images - annotated
    else:
        kept = set(original_images)
    dropped = sorted(original_images - kept)
    if not kept:
        raise AnalysisInputError("every image was filtered out; nothing to analyze")

    if suites is None:
        suite_of = {img: DEFAULT_SUITE for img in kept}
    else:
        suite_of = {img: suites.get(img, UNMAPPED_SUITE) for img in kept}
    suite_images: dict[str, list[str]] = {}
    for img in sorted(kept):
        suite_images.setdefault(suite_of[img], []).append(img)

    run_range = range(effective_runs)
    reference = {img: grouped[ORIGINAL_MODEL_ID][img][0] for img in kept}
    original_tracks = {}
    for img in sorted(kept):
        runs = [grouped[ORIGINAL_MODEL_ID][img][r] for r in run_range]
        original_tracks[img] = build_tracks(reference[img], runs, cfg.iou_threshold)

    suites_doc = {}
    for suite_id in sorted(suite_images):
        images = suite_images[suite_id]
        mutant_rows = []
        tables = []
        for model_id in mutant_ids:
            mcfg = parse_model_id(model_id)
            reports_by_image = {}
            tracked_images = []
            for img in images:
                ref = reference[img]
                runs = [grouped[model_id][img][r] for r in run_range]
                reports_by_image[img] = [
                    match_outputs(ref.detections, run.detections, cfg.iou_threshold)
                    for run in runs
                ]
                mut_tracks = build_tracks(ref, runs, cfg.iou_threshold)
                tracked_images.append(
                    TrackedImage(
                        orig_tracks=original_tracks[img],
                        mut_tracks=mut_tracks,
                        assignments=classify_tracks(mut_tracks, cfg.miss_threshold),
                    )
                )
            verdicts = {
                criterion: kill_verdict(model_id, reports_by_image, criterion, cfg)
                for criterion in KILL_CRITERIA
            }
            all_reports = [r for img in images for r in reports_by_image[img]]
            miss_score, ghost_score, mg_score = obj_ms(all_reports)
            values: dict[str, float | None] = {
                "img_ms_miss": 1.0 if verdicts["miss"].killed else 0.0,
                "img_ms_ghost": 1.0 if verdicts["ghost"].killed else 0.0,
                "img_ms_mg": 1.0 if verdicts["mg"].killed else 0.0,
                "obj_ms_miss": miss_score,
                "obj_ms_ghost": ghost_score,
                "obj_ms_mg": mg_score,
                "iou_ms": iou_ms(all_reports),
            }
            values.update(ua_ms(tracked_images, cfg))
            table = ScoreTable(model_id=model_id, suite_id=suite_id, values=values)
            tables.append(table)
            mutant_rows.append(
                {
                    "model_id": model_id,
                    "operator": None if mcfg is None else mcfg.operator,
                    "dropout_rate": None if mcfg is None else mcfg.dropout_rate,
                    "block_size": None if mcfg is None else mcfg.block_size,
                    "scores": {key: values[key] for key in SCORE_KEYS},
                    "kills": {
                        criterion: {
                            "killed": verdicts[criterion].killed,
                            "witness_image": verdicts[criterion].witness_image,
                            "min_p_value": verdicts[criterion].min_p_value,
                        }
                        for criterion in KILL_CRITERIA
                    },
                }
            )
        suites_doc[suite_id] = {
            "images": images,
            "mutants": mutant_rows,
            "aggregate": aggregate(tables),
        }

    return {
        "schema": REPORT_SCHEMA,
        "config": {
            "iou_threshold": cfg.iou_threshold,
            "alpha": cfg.alpha,
            "n_runs": cfg.n_runs,
            "miss_threshold": cfg.miss_threshold,
            "binomial_null_p": cfg.binomial_null_p,
            "recall_floor": cfg.recall_floor,
            "precision_floor": cfg.precision_floor,
        },
        "models": [ORIGINAL_MODEL_ID] + mutant_ids,
        "filter": {
            "ground_truth_given": ground_truth is not None,
            "kept_images": sorted(kept),
            "dropped_images": dropped,
        },
        "suites": suites_doc,
    }


def _require_report(report: Mapping) -> Mapping:
    if not isinstance(report, Mapping) or report.get("schema") != REPORT_SCHEMA:
        raise ValidationError("report", "not a recognized analysis report document")
    return report


def _suite_values(suite_doc: Mapping, key: str) -> list[float]:
    return [
        row["scores"][key]
        for row in suite_doc["mutants"]
        if row["scores"].get(key) is not None
    ]


def compare_suites(
    report: Mapping,
    keys: Sequence[str] | None = None,
    alpha: float | None = None,
) -> dict:
    """Kruskal-Wallis across suites' per-mutant values, one row per score key."""
    report = _require_report(report)
    suites = report["suites"]
    if len(suites) < 2:
        raise ValueError(f"need at least 2 suites to compare, got {len(suites)}")
    if alpha is None:
        alpha = float(report["config"]["alpha"])
    keys = list(keys) if keys is not None else list(SCORE_KEYS)
    for key in keys:
        if key not in SCORE_KEYS:
            raise ValidationError("keys", f"unknown score key {key!r}")
    suite_ids = sorted(suites)
    rows = []
    for key in keys:
        groups = [_suite_values(suites[s], key) for s in suite_ids]
        sizes = [len(g) for g in groups]
        if any(size == 0 for size in sizes) or sum(sizes) < 3:
            rows.append(
                {
                    "score_key": key,
                    "status": "insufficient data",
                    "n_per_suite": sizes,
                }
            )
            continue
        result = kruskal_wallis(groups)
        rows.append(
            {
                "score_key": key,
                "status": "ok",
                "n_per_suite": sizes,
                "statistic": result.statistic,
                "p_value": result.p_value,
                "effect": result.effect,
                "df": result.df,
                "band": eta_squared_band(result.effect),
                "significant": result.p_value < alpha,
            }
        )
    return {
        "schema": "mutadet/compare-suites/v1",
        "test": "kruskal-wallis",
        "alpha": alpha,
        "suites": suite_ids,
        "rows": rows,
    }


def correlate(
    report: Mapping,
    operator: str,
    keys: Sequence[str] | None = None,
    alpha: float | None = None,
) -> dict:
    """Mutation-ratio/score correlation over one operator's grid.

    Inference-dropout grids use Spearman rank correlation against the
    dropout rate; dropblock grids use the multiple correlation of
    (rate, block size). One row per (suite, score key).
    """
    report = _require_report(report)
    if operator not in ("mcd", "mcb"):
        raise ValidationError("operator", f"must be 'mcd' or 'mcb', got {operator!r}")
    if alpha is None:
        alpha = float(report["config"]["alpha"])
    keys = list(keys) if keys is not None else list(SCORE_KEYS)
    for key in keys:
        if key not in SCORE_KEYS:
            raise ValidationError("keys", f"unknown score key {key!r}")
    rows = []
    min_points = 3 if operator == "mcd" else 4
    for suite_id in sorted(report["suites"]):
        suite_doc = report["suites"][suite_id]
        grid_rows = [row for row in suite_doc["mutants"] if row["operator"] == operator]
        if len(grid_rows) < min_points:
            raise ValueError(
                f"suite {suite_id!r} has {len(grid_rows)} {operator} grid points, "
                f"need at least {min_points}"
            )
        for key in keys:
            points = [
                (row["dropout_rate"], row["block_size"], row["scores"][key])
                for row in grid_rows
                if row["scores"].get(key) is not None
            ]
            base = {"suite": suite_id, "score_key": key, "n": len(points)}
            if len(points) < min_points:
                rows.append({**base, "status": "insufficient data"})
                continue
            try:
                if operator == "mcd":
                    result = spearman([p[0] for p in points], [p[2] for p in points])
                    band = spearman_band(result.effect)
                else:
                    result = multiple_correlation(
                        [p[0] for p in points],
                        [p[1] for p in points],
                        [p[2] for p in points],
                    )
                    band = multiple_r_band(result.effect)
            except DegenerateDataError as exc:
                rows.append({**base, "status": f"undefined ({exc})"})
                continue
            rows.append(
                {
                    **base,
                    "status": "ok",
                    "statistic": result.statistic,
                    "p_value": result.p_value,
                    "effect": result.effect,
                    "df": result.df,
                    "band": band,
                    "significant": result.p_value < alpha,
                }
            )
    return {
        "schema": "mutadet/correlate/v1",
        "test": "spearman" if operator == "mcd" else "multiple-correlation",
        "operator": operator,
        "alpha": alpha,
        "rows": rows,
    }
