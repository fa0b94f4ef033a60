"""Domain types shared by every stage of the analysis pipeline.

Everything here is a plain frozen dataclass with eager validation: records
arrive from external tooling over a line-oriented wire format, so malformed
values must be rejected at construction time with a field-precise error
rather than surfacing later as NaN scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

PROB_SUM_TOL = 1e-6


class ValidationError(ValueError):
    """A domain object violated one of its invariants.

    ``field_name`` pinpoints the offending field so ingestion code can
    report the exact thing that was wrong with an input line.
    """

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


def _require_finite(name: str, value: float) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ValidationError(name, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(name, f"must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, corners (x1, y1) < (x2, y2)."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for name in ("x1", "y1", "x2", "y2"):
            object.__setattr__(self, name, _require_finite(f"bbox.{name}", getattr(self, name)))
        if not (self.x1 < self.x2):
            raise ValidationError("bbox", f"x1 must be < x2, got [{self.x1}, {self.x2}]")
        if not (self.y1 < self.y2):
            raise ValidationError("bbox", f"y1 must be < y2, got [{self.y1}, {self.y2}]")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> tuple[tuple[float, float], ...]:
        """Corner points in fixed order: TL, TR, BR, BL."""
        return (
            (self.x1, self.y1),
            (self.x2, self.y1),
            (self.x2, self.y2),
            (self.x1, self.y2),
        )

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes.

    Returns 0.0 for non-overlapping or edge-touching boxes; always within
    [0, 1] and exactly 1.0 for identical boxes.
    """
    ix1 = max(a.x1, b.x1)
    iy1 = max(a.y1, b.y1)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    iw = ix2 - ix1
    ih = iy2 - iy1
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


@dataclass(frozen=True)
class Detection:
    """One detected object: box, integer class label, confidence, and the
    per-class probability vector the confidence was read from.

    ``probs`` may disagree with ``label`` in argmax (some detectors report
    the NMS-selected class rather than the posterior mode); that is legal
    here and flagged as a warning at dataset-validation level, not rejected.
    """

    bbox: BBox
    label: int
    score: float
    probs: tuple[float, ...]

    def __post_init__(self):
        if isinstance(self.label, bool) or not isinstance(self.label, int):
            raise ValidationError("label", f"expected a non-negative integer, got {self.label!r}")
        if self.label < 0:
            raise ValidationError("label", f"must be >= 0, got {self.label}")
        score = _require_finite("score", self.score)
        if not (0.0 <= score <= 1.0):
            raise ValidationError("score", f"must be within [0, 1], got {score}")
        object.__setattr__(self, "score", score)
        probs = tuple(float(p) for p in self.probs)
        if len(probs) == 0:
            raise ValidationError("probs", "must not be empty")
        total = 0.0
        for p in probs:
            if not math.isfinite(p) or p < 0.0 or p > 1.0:
                raise ValidationError("probs", f"elements must be within [0, 1], got {p!r}")
            total += p
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValidationError("probs", f"must sum to 1 within {PROB_SUM_TOL}, got {total!r}")
        if self.label >= len(probs):
            raise ValidationError(
                "label", f"label {self.label} out of range for {len(probs)} classes"
            )
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class RunOutput:
    """All detections one model produced for one image in one run."""

    model_id: str
    image_id: str
    run: int
    detections: tuple[Detection, ...]

    def __post_init__(self):
        if not self.model_id:
            raise ValidationError("model_id", "must be non-empty")
        if not self.image_id:
            raise ValidationError("image_id", "must be non-empty")
        if isinstance(self.run, bool) or not isinstance(self.run, int):
            raise ValidationError("run", f"expected a non-negative integer, got {self.run!r}")
        if self.run < 0:
            raise ValidationError("run", f"must be >= 0, got {self.run}")
        object.__setattr__(self, "detections", tuple(self.detections))


@dataclass(frozen=True)
class GroundTruthObject:
    """Annotated object: box plus class label, no scores."""

    bbox: BBox
    label: int

    def __post_init__(self):
        if isinstance(self.label, bool) or not isinstance(self.label, int):
            raise ValidationError("label", f"expected a non-negative integer, got {self.label!r}")
        if self.label < 0:
            raise ValidationError("label", f"must be >= 0, got {self.label}")


@dataclass(frozen=True)
class GroundTruth:
    """Annotations for one image."""

    image_id: str
    objects: tuple[GroundTruthObject, ...]

    def __post_init__(self):
        if not self.image_id:
            raise ValidationError("image_id", "must be non-empty")
        object.__setattr__(self, "objects", tuple(self.objects))


VALID_OPERATORS = ("mcd", "mcb")


@dataclass(frozen=True)
class MutationConfig:
    """Configuration of one mutant model.

    ``dropout_rate`` drives both operators; ``block_size`` applies only to
    the dropblock operator and must be an odd positive integer there.
    """

    operator: str
    dropout_rate: float
    block_size: int | None = None

    def __post_init__(self):
        if self.operator not in VALID_OPERATORS:
            raise ValidationError(
                "operator", f"must be one of {VALID_OPERATORS}, got {self.operator!r}"
            )
        rate = _require_finite("dropout_rate", self.dropout_rate)
        if not (0.0 < rate < 1.0):
            raise ValidationError("dropout_rate", f"must be within (0, 1), got {rate}")
        object.__setattr__(self, "dropout_rate", rate)
        if self.operator == "mcb":
            bs = self.block_size
            if isinstance(bs, bool) or not isinstance(bs, int):
                raise ValidationError("block_size", f"expected an odd integer, got {bs!r}")
            if bs < 1 or bs % 2 == 0:
                raise ValidationError("block_size", f"must be odd and >= 1, got {bs}")
        elif self.block_size is not None:
            raise ValidationError("block_size", "only valid for the mcb operator")

    @property
    def model_id(self) -> str:
        """Canonical mutant identifier, e.g. ``mcd:0.25`` or ``mcb:0.25x5``."""
        rate = f"{self.dropout_rate:.2f}"
        if self.operator == "mcd":
            return f"mcd:{rate}"
        return f"mcb:{rate}x{self.block_size}"


@dataclass(frozen=True)
class AnalysisConfig:
    """Tunable knobs of one analysis pass, with standard defaults."""

    iou_threshold: float = 0.5
    alpha: float = 0.01
    n_runs: int = 30
    miss_threshold: float = 0.5
    binomial_null_p: float = 0.05
    recall_floor: float = 1.0
    precision_floor: float = 0.0

    def __post_init__(self):
        th = _require_finite("iou_threshold", self.iou_threshold)
        if not (0.0 <= th < 1.0):
            raise ValidationError("iou_threshold", f"must be within [0, 1), got {th}")
        alpha = _require_finite("alpha", self.alpha)
        if not (0.0 < alpha < 1.0):
            raise ValidationError("alpha", f"must be within (0, 1), got {alpha}")
        if isinstance(self.n_runs, bool) or not isinstance(self.n_runs, int):
            raise ValidationError("n_runs", f"expected an integer >= 2, got {self.n_runs!r}")
        if self.n_runs < 2:
            raise ValidationError("n_runs", f"must be >= 2, got {self.n_runs}")
        mt = _require_finite("miss_threshold", self.miss_threshold)
        if not (0.0 < mt <= 1.0):
            raise ValidationError("miss_threshold", f"must be within (0, 1], got {mt}")
        bp = _require_finite("binomial_null_p", self.binomial_null_p)
        if not (0.0 < bp < 1.0):
            raise ValidationError("binomial_null_p", f"must be within (0, 1), got {bp}")
        rf = _require_finite("recall_floor", self.recall_floor)
        if not (0.0 <= rf <= 1.0):
            raise ValidationError("recall_floor", f"must be within [0, 1], got {rf}")
        pf = _require_finite("precision_floor", self.precision_floor)
        if not (0.0 <= pf <= 1.0):
            raise ValidationError("precision_floor", f"must be within [0, 1], got {pf}")

    FIELD_TYPES = {
        "iou_threshold": float,
        "alpha": float,
        "n_runs": int,
        "miss_threshold": float,
        "binomial_null_p": float,
        "recall_floor": float,
        "precision_floor": float,
    }
