"""The 22 mutation scores of one (mutant, suite) cell.

Three families:

* Image-level: a mutant is killed when at least one image shows a
  statistically significant rate of non-empty miss/ghost sets across the
  n runs (one-sided binomial test). Per mutant the score is the 0/1 kill
  indicator; averaged over a suite's mutants it becomes the kill ratio.
* Object-level and IoU: micro-averaged counts over every (image, run)
  match report.
* Uncertainty-aware: |UM_original - UM_mutant| per metric, averaged over
  the objects of each track set. Empty sets stay ABSENT (None) rather
  than 0: no evidence is not the same as no divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from mutadet.matching import (
    ORIGIN_GHOST,
    ORIGIN_REFERENCE,
    SET_GHOST,
    SET_MATCH,
    SET_MISS,
    MatchReport,
    ObjectTrack,
    TrackAssignment,
)
from mutadet.stats import binomial_tail_greater
from mutadet.types import AnalysisConfig
from mutadet.uncertainty import summarize

UA_METRICS = ("vr", "se", "mi", "tv", "ps")
UA_SETS = (SET_MATCH, SET_MISS, SET_GHOST)

KILL_CRITERIA = ("miss", "ghost", "mg")

SCORE_KEYS = (
    "img_ms_miss",
    "img_ms_ghost",
    "img_ms_mg",
    "obj_ms_miss",
    "obj_ms_ghost",
    "obj_ms_mg",
    "iou_ms",
) + tuple(f"ua_{metric}_{set_name}" for metric in UA_METRICS for set_name in UA_SETS)


@dataclass(frozen=True)
class KillVerdict:
    """Binomial-test outcome for one mutant under one criterion."""

    model_id: str
    criterion: str
    killed: bool
    witness_image: str | None
    min_p_value: float

    def __post_init__(self):
        if self.killed and self.witness_image is None:
            raise ValueError("a killed verdict must name a witnessing image")


@dataclass(frozen=True)
class ScoreTable:
    """All score values of one (mutant, suite) cell; None marks ABSENT."""

    model_id: str
    suite_id: str
    values: Mapping[str, float | None]

    def __post_init__(self):
        missing = [k for k in SCORE_KEYS if k not in self.values]
        extra = [k for k in self.values if k not in SCORE_KEYS]
        if missing or extra:
            raise ValueError(f"score keys mismatch: missing={missing}, extra={extra}")
        for key, v in self.values.items():
            if v is None:
                continue
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{key} must be finite and non-negative, got {v!r}")


def obj_ms(reports: Iterable[MatchReport]) -> tuple[float, float, float]:
    """Micro-averaged object-level scores over all (image, run) reports."""
    m = x = g = 0
    for report in reports:
        m += len(report.matches)
        x += len(report.miss)
        g += len(report.ghost)
    if x + m + g == 0:
        return 0.0, 0.0, 0.0
    miss_score = 0.0 if x + m == 0 else x / (x + m)
    ghost_score = g / (x + m + g)
    mg_score = (x + g) / (x + m + g)
    return miss_score, ghost_score, mg_score


def iou_ms(reports: Iterable[MatchReport]) -> float | None:
    """Mean spatial degradation 1 - IoU over every matched pair; ABSENT
    (None) when nothing matched."""
    total = 0.0
    count = 0
    for report in reports:
        for _, _, overlap in report.matches:
            total += 1.0 - overlap
            count += 1
    if count == 0:
        return None
    return total / count


def kill_test(per_run_flags: Sequence[bool], cfg: AnalysisConfig) -> float:
    """Exact one-sided binomial p for one image's per-run set-occupancy flags."""
    n = len(per_run_flags)
    if n < 1:
        raise ValueError("need at least one run flag")
    k = sum(1 for f in per_run_flags if f)
    return binomial_tail_greater(k, n, cfg.binomial_null_p)


def _criterion_flag(report: MatchReport, criterion: str) -> bool:
    if criterion == "miss":
        return len(report.miss) > 0
    if criterion == "ghost":
        return len(report.ghost) > 0
    if criterion == "mg":
        return len(report.miss) > 0 or len(report.ghost) > 0
    raise ValueError(f"unknown criterion {criterion!r}")


def kill_verdict(
    model_id: str,
    reports_by_image: Mapping[str, Sequence[MatchReport]],
    criterion: str,
    cfg: AnalysisConfig,
) -> KillVerdict:
    """Kill decision for one mutant under one criterion.

    The witnessing image is the one with the smallest p-value, ties to
    the lexicographically smallest image id; reported even when the
    verdict is "not killed" so near-misses are inspectable.
    """
    best_p = 1.0
    best_image = None
    for image_id in sorted(reports_by_image):
        flags = [_criterion_flag(r, criterion) for r in reports_by_image[image_id]]
        p = kill_test(flags, cfg)
        if best_image is None or p < best_p:
            best_p = p
            best_image = image_id
    killed = best_image is not None and best_p < cfg.alpha
    return KillVerdict(
        model_id=model_id,
        criterion=criterion,
        killed=killed,
        witness_image=best_image if best_image is not None else None,
        min_p_value=best_p,
    )


def binary_entropy(rate: float) -> float:
    """Natural-log entropy of a Bernoulli(rate) variable."""
    h = 0.0
    if rate > 0.0:
        h -= rate * math.log(rate)
    if rate < 1.0:
        h -= (1.0 - rate) * math.log(1.0 - rate)
    return h


@dataclass(frozen=True)
class TrackedImage:
    """Per-image track data for one mutant, anchored on one reference."""

    orig_tracks: Sequence[ObjectTrack]
    mut_tracks: Sequence[ObjectTrack]
    assignments: Sequence[TrackAssignment]


def ua_ms(images: Iterable[TrackedImage], cfg: AnalysisConfig) -> dict[str, float | None]:
    """The 15 uncertainty-aware scores over a suite of tracked images.

    MATCH objects contribute |UM_orig - UM_mut| per metric, pairing the
    original-model track and the mutant track of the same reference
    object. MISS objects have no usable mutant-side distribution; they
    contribute their cross-run miss fraction to vr/mi/tv/ps and the
    binary entropy of their presence rate to se. GHOST tracks have no
    original-side counterpart (UM_orig = 0), so they contribute the
    mutant uncertainty itself. Sets with zero objects across the whole
    suite are ABSENT (None).
    """
    sums = {(metric, set_name): 0.0 for metric in UA_METRICS for set_name in UA_SETS}
    counts = {set_name: 0 for set_name in UA_SETS}
    for image in images:
        orig_anchored = [t for t in image.orig_tracks if t.origin == ORIGIN_REFERENCE]
        mut_anchored_assignments = [
            a for a in image.assignments if a.track.origin == ORIGIN_REFERENCE
        ]
        if len(orig_anchored) != len(mut_anchored_assignments):
            raise ValueError(
                "original and mutant tracks disagree on reference objects: "
                f"{len(orig_anchored)} vs {len(mut_anchored_assignments)}"
            )
        for orig_track, assignment in zip(orig_anchored, mut_anchored_assignments):
            if assignment.set_name == SET_MATCH:
                orig_summary = summarize(orig_track)
                mut_summary = summarize(assignment.track)
                counts[SET_MATCH] += 1
                for metric in UA_METRICS:
                    diff = abs(orig_summary.value(metric) - mut_summary.value(metric))
                    sums[(metric, SET_MATCH)] += diff
            else:
                miss_fraction = 1.0 - assignment.presence_rate
                counts[SET_MISS] += 1
                for metric in ("vr", "mi", "tv", "ps"):
                    sums[(metric, SET_MISS)] += miss_fraction
                sums[("se", SET_MISS)] += binary_entropy(assignment.presence_rate)
        for assignment in image.assignments:
            if assignment.track.origin == ORIGIN_GHOST:
                mut_summary = summarize(assignment.track)
                counts[SET_GHOST] += 1
                for metric in UA_METRICS:
                    sums[(metric, SET_GHOST)] += mut_summary.value(metric)
    out: dict[str, float | None] = {}
    for metric in UA_METRICS:
        for set_name in UA_SETS:
            key = f"ua_{metric}_{set_name}"
            if counts[set_name] == 0:
                out[key] = None
            else:
                out[key] = sums[(metric, set_name)] / counts[set_name]
    return out


def aggregate(tables: Sequence[ScoreTable]) -> dict[str, float | None]:
    """Unweighted per-key mean over mutants; ABSENT values drop out of
    their key's mean, and a key ABSENT everywhere stays ABSENT."""
    if not tables:
        raise ValueError("need at least one score table")
    out: dict[str, float | None] = {}
    for key in SCORE_KEYS:
        values = [t.values[key] for t in tables if t.values[key] is not None]
        out[key] = sum(values) / len(values) if values else None
    return out
