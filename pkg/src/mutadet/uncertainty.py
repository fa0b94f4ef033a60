"""The five per-track uncertainty metrics.

Classification side: variation ratio, predictive entropy of the mean class
distribution, and the mutual-information decomposition (predictive entropy
minus mean per-run entropy). Regression side: summed per-coordinate box
variance and summed per-corner convex-hull area. Entropies are in nats;
box measures in pixels and pixels squared.

Absent runs are excluded everywhere; what replaces them for miss-classified
objects is a scoring convention and lives in the scores module, not here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from mutadet.matching import ObjectTrack


class EmptyTrackError(ValueError):
    """Metric requested for a track with zero present runs."""


@dataclass(frozen=True)
class UncertaintySummary:
    """All five metrics of one track plus the presence count."""

    vr: float
    se: float
    mi: float
    tv: float
    ps: float
    n_present: int

    def __post_init__(self):
        for name in ("vr", "se", "mi", "tv", "ps"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and non-negative, got {v!r}")
        if self.vr > 1.0:
            raise ValueError(f"vr must be <= 1, got {self.vr!r}")
        if self.mi > self.se + 1e-9:
            raise ValueError(f"mi ({self.mi!r}) exceeds se ({self.se!r})")

    def value(self, metric: str) -> float:
        return getattr(self, metric)


def _present(track: ObjectTrack):
    dets = track.present()
    if not dets:
        raise EmptyTrackError("track has no present runs")
    return dets


def _aligned_probs(dets) -> list[list[float]]:
    k = max(len(d.probs) for d in dets)
    return [list(d.probs) + [0.0] * (k - len(d.probs)) for d in dets]


def _rows_identical(rows: list[list[float]]) -> bool:
    first = rows[0]
    return all(row == first for row in rows[1:])


def _mean_rows(rows: list[list[float]]) -> list[float]:
    # Exact passthrough for identical rows: a zero-spread track must yield
    # exactly H(shared vector), not H(shared vector) +/- rounding.
    if _rows_identical(rows):
        return list(rows[0])
    n = len(rows)
    return [math.fsum(row[i] for row in rows) / n for i in range(len(rows[0]))]


def entropy(probs) -> float:
    """Shannon entropy in nats with the 0*ln(0) = 0 convention."""
    total = 0.0
    for p in probs:
        if p > 0.0:
            total -= p * math.log(p)
    return total


def variation_ratio(track: ObjectTrack) -> float:
    """1 minus the modal-label share over present runs."""
    labels = [d.label for d in _present(track)]
    counts: dict[int, int] = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    return 1.0 - max(counts.values()) / len(labels)


def shannon_entropy(track: ObjectTrack) -> float:
    """Entropy of the mean class distribution over present runs."""
    dets = _present(track)
    return entropy(_mean_rows(_aligned_probs(dets)))


def mutual_information(track: ObjectTrack) -> float:
    """Predictive entropy minus mean per-run entropy, floored at 0."""
    dets = _present(track)
    rows = _aligned_probs(dets)
    # Identical rows give exactly 0: dividing fsum([h]*n) back by n can land
    # one ulp off h, which would leak a spurious nonzero here.
    if _rows_identical(rows):
        return 0.0
    mean_h = math.fsum(entropy(row) for row in rows) / len(rows)
    mi = entropy(_mean_rows(rows)) - mean_h
    return max(mi, 0.0)


def _population_variance(values: list[float]) -> float:
    first = values[0]
    if all(v == first for v in values[1:]):
        return 0.0
    n = len(values)
    mean = math.fsum(values) / n
    # d * d, not d ** 2: libm pow is not correctly rounded on every platform,
    # which would break the exact power-of-two scaling of the variance.
    deviations = [v - mean for v in values]
    return math.fsum(d * d for d in deviations) / n


def total_variance(track: ObjectTrack) -> float:
    """Sum of the population variances of the 4 box coordinates."""
    dets = _present(track)
    coords = [[d.bbox.x1 for d in dets], [d.bbox.y1 for d in dets],
              [d.bbox.x2 for d in dets], [d.bbox.y2 for d in dets]]
    return math.fsum(_population_variance(c) for c in coords)


def convex_hull_area(points) -> float:
    """Convex hull area via monotone chain + shoelace.

    Fewer than 3 distinct points, or all collinear, gives 0.
    """
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) < 3:
        return 0.0

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        return 0.0
    area2 = 0.0
    for i, (x1, y1) in enumerate(hull):
        x2, y2 = hull[(i + 1) % len(hull)]
        area2 += x1 * y2 - x2 * y1
    return abs(area2) / 2.0


def prediction_surface(track: ObjectTrack) -> float:
    """Summed convex-hull area of each box corner's positions across runs.

    Per-corner hulls (not one hull over all corners) so that a zero-spread
    track scores exactly 0.
    """
    dets = _present(track)
    total = 0.0
    for corner in range(4):
        total += convex_hull_area([d.bbox.corners()[corner] for d in dets])
    return total


def summarize(track: ObjectTrack) -> UncertaintySummary:
    """All five metrics of one track in one pass."""
    dets = _present(track)
    rows = _aligned_probs(dets)
    mean_row = _mean_rows(rows)
    se = entropy(mean_row)
    if _rows_identical(rows):
        mi = 0.0
    else:
        mi = max(se - math.fsum(entropy(r) for r in rows) / len(rows), 0.0)
    return UncertaintySummary(
        vr=variation_ratio(track),
        se=se,
        mi=mi,
        tv=total_variance(track),
        ps=prediction_surface(track),
        n_present=len(dets),
    )
