"""Test-case filtering: keep only images the original model already handles.

Mutation scores are only meaningful on inputs the unmutated model gets
right; an image the original model fails on would charge its mistakes to
the mutants. Recall against ground truth (strict by default) and precision
(lenient by default) decide what stays.
"""

from __future__ import annotations

from mutadet.matching import greedy_pairs
from mutadet.types import AnalysisConfig, GroundTruth, RunOutput, ValidationError


def image_recall_precision(
    output: RunOutput, truth: GroundTruth, iou_threshold: float
) -> tuple[float, float]:
    """Recall and precision of one output against one image's annotations.

    Matching is greedy IoU-descending with the label-equality clause.
    Empty ground truth gives recall 1; an empty detection list gives
    precision 1 (both vacuous).
    """
    n_true = len(truth.objects)
    n_det = len(output.detections)
    if n_true == 0 and n_det == 0:
        return 1.0, 1.0
    pairs = greedy_pairs(
        [o.bbox for o in truth.objects],
        [d.bbox for d in output.detections],
        [o.label for o in truth.objects],
        [d.label for d in output.detections],
        iou_threshold,
    )
    matched = len(pairs)
    recall = 1.0 if n_true == 0 else matched / n_true
    precision = 1.0 if n_det == 0 else matched / n_det
    return recall, precision


def filter_passing_cases(
    original: list[RunOutput],
    ground_truth: list[GroundTruth],
    cfg: AnalysisConfig,
) -> set[str]:
    """Image ids whose original-model output clears both floors.

    `original` must hold the reference run (run 0 of the original model)
    for every annotated image; other runs are ignored if present.
    """
    by_image: dict[str, RunOutput] = {}
    for rec in original:
        if rec.run == 0 and rec.image_id not in by_image:
            by_image[rec.image_id] = rec
    kept: set[str] = set()
    for truth in ground_truth:
        output = by_image.get(truth.image_id)
        if output is None:
            raise ValidationError(
                "image_id", f"no original output for annotated image {truth.image_id!r}"
            )
        recall, precision = image_recall_precision(output, truth, cfg.iou_threshold)
        if recall >= cfg.recall_floor and precision >= cfg.precision_floor:
            kept.add(truth.image_id)
    return kept
