"""Seeded synthetic detector: an original model plus behavioral mutants.

Real mutation operators perturb network layers; reproducing their absolute
scores needs the original models. What the acceptance gates need instead is
the *shape* of the behavior: effects that grow monotonically with the
mutation ratio, denser scenes diluting per-object damage, and bit-exact
reproducibility. This module provides exactly that with a parametric
effect model:

    miss probability   saturating-exponential in the drive
    ghost rate         linear (expected spurious detections per image/run)
    box jitter sigma   linear, in pixels
    label flip         saturating-exponential
    prob temperature   affine >= 1 (flattens class probabilities)

where drive = dropout rate for inference-dropout mutants and
drive = rate * (1 + BLOCK_INTERACTION * ln(1 + block)) for dropblock ones,
so both ratio knobs push every effect upward.

Randomness is counter-based: every (seed, model, image, run) cell gets its
own generator, so any single run regenerates identically in isolation and
generation order never matters.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from mutadet.types import (
    BBox,
    Detection,
    GroundTruth,
    GroundTruthObject,
    MutationConfig,
    RunOutput,
    ValidationError,
)
from mutadet.wire import IDENTITY_MODEL_ID, ORIGINAL_MODEL_ID

# Effect-curve coefficients. Calibrated so the full ratio grid spans a
# clearly graded effect range at desk scale: miss fraction ~0.10 -> ~0.39
# over the dropout-rate grid, jitter well inside typical box sizes.
P_MISS_MAX = 0.65
P_MISS_RATE = 1.8
GHOST_RATE_GAIN = 1.2
JITTER_GAIN = 6.0
FLIP_MAX = 0.45
FLIP_RATE = 1.5
TEMP_GAIN = 2.0
BLOCK_INTERACTION = 0.5

# Crowding dilution: per-object effect scale 1/(1 + CROWD_DAMP*(k-1)) for a
# k-object image. Constant within an image, so monotonicity in the mutation
# ratio is untouched while sparse scenes take visibly more damage per object.
CROWD_DAMP = 0.15

GHOST_SIZE_FRAC = 0.05
TRUTH_MASS = 0.9
MIN_SIDE = 1e-3

MCD_RATES = tuple(round(0.10 + 0.05 * i, 2) for i in range(9))
MCB_BLOCKS = (1, 3, 5, 7, 9)


@dataclass(frozen=True)
class SceneSpec:
    """Layout parameters of a synthetic test suite."""

    n_images: int
    objects_min: int
    objects_max: int
    width: float = 640.0
    height: float = 480.0
    n_classes: int = 5
    seed: int = 0
    image_prefix: str = "img"

    def __post_init__(self):
        if self.n_images < 1:
            raise ValidationError("n_images", f"must be >= 1, got {self.n_images}")
        if self.objects_min < 0 or self.objects_max < self.objects_min:
            raise ValidationError(
                "objects_per_image",
                f"need 0 <= min <= max, got [{self.objects_min}, {self.objects_max}]",
            )
        if self.width <= 1.0 or self.height <= 1.0:
            raise ValidationError("extent", f"must exceed 1 pixel, got {self.width}x{self.height}")
        if self.n_classes < 1:
            raise ValidationError("n_classes", f"must be >= 1, got {self.n_classes}")
        if self.seed < 0:
            raise ValidationError("seed", f"must be >= 0, got {self.seed}")
        if not self.image_prefix:
            raise ValidationError("image_prefix", "must be non-empty")


@dataclass(frozen=True)
class EffectParams:
    """Realized behavioral effects of one mutant."""

    p_miss: float
    ghost_rate: float
    jitter_sigma: float
    label_flip: float
    prob_temperature: float

    def __post_init__(self):
        if not (0.0 <= self.p_miss < 1.0):
            raise ValidationError("p_miss", f"must be within [0, 1), got {self.p_miss}")
        if self.ghost_rate < 0.0:
            raise ValidationError("ghost_rate", f"must be >= 0, got {self.ghost_rate}")
        if self.jitter_sigma < 0.0:
            raise ValidationError("jitter_sigma", f"must be >= 0, got {self.jitter_sigma}")
        if not (0.0 <= self.label_flip < 1.0):
            raise ValidationError("label_flip", f"must be within [0, 1), got {self.label_flip}")
        if self.prob_temperature < 1.0:
            raise ValidationError(
                "prob_temperature", f"must be >= 1, got {self.prob_temperature}"
            )

    @property
    def is_identity(self) -> bool:
        return (
            self.p_miss == 0.0
            and self.ghost_rate == 0.0
            and self.jitter_sigma == 0.0
            and self.label_flip == 0.0
            and self.prob_temperature == 1.0
        )


IDENTITY_EFFECTS = EffectParams(
    p_miss=0.0, ghost_rate=0.0, jitter_sigma=0.0, label_flip=0.0, prob_temperature=1.0
)


@dataclass(frozen=True)
class Scene:
    """One generated dataset: annotations plus the original model's output."""

    spec: SceneSpec
    ground_truth: tuple[GroundTruth, ...]
    original: tuple[RunOutput, ...]  # run 0 only, one per image


def drive_strength(cfg: MutationConfig) -> float:
    """Scalar effect drive of a mutant configuration."""
    if cfg.operator == "mcd":
        return cfg.dropout_rate
    return cfg.dropout_rate * (1.0 + BLOCK_INTERACTION * math.log1p(cfg.block_size))


def effect_curve(cfg: MutationConfig | None) -> EffectParams:
    """Map a mutant configuration to behavioral effects.

    None is the sentinel for the unmutated/identity model: all effects
    zero, temperature 1. Every effect is strictly increasing in the drive,
    hence in the dropout rate, and for dropblock also in the block size.
    """
    if cfg is None:
        return IDENTITY_EFFECTS
    drive = drive_strength(cfg)
    return EffectParams(
        p_miss=P_MISS_MAX * -math.expm1(-P_MISS_RATE * drive),
        ghost_rate=GHOST_RATE_GAIN * drive,
        jitter_sigma=JITTER_GAIN * drive,
        label_flip=FLIP_MAX * -math.expm1(-FLIP_RATE * drive),
        prob_temperature=1.0 + TEMP_GAIN * drive,
    )


def _hash_words(text: str) -> tuple[int, int]:
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "big")
    return value & 0xFFFFFFFF, (value >> 32) & 0xFFFFFFFF


def _rng(seed: int, model_id: str, image_id: str, run: int) -> np.random.Generator:
    entropy = [
        seed & 0xFFFFFFFF,
        (seed >> 32) & 0xFFFFFFFF,
        *_hash_words(model_id),
        *_hash_words(image_id),
        run,
    ]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _class_probs(n_classes: int, label: int, temperature: float) -> tuple[float, ...]:
    """Distribution concentrated on `label`, flattened by the temperature."""
    if n_classes == 1:
        return (1.0,)
    p = np.full(n_classes, (1.0 - TRUTH_MASS) / (n_classes - 1))
    p[label] = TRUTH_MASS
    if temperature > 1.0:
        p = p ** (1.0 / temperature)
    p /= p.sum()
    return tuple(float(v) for v in p)


def _image_id(spec: SceneSpec, index: int) -> str:
    width = max(3, len(str(spec.n_images - 1)))
    return f"{spec.image_prefix}_{index:0{width}d}"


def simulate_scene(spec: SceneSpec) -> Scene:
    """Generate annotations and the original model's (run 0) outputs.

    The original model is modeled as deterministic and exact: it detects
    every annotated object at its true box with mass 0.9 on the true
    label. All layout randomness is keyed by SceneSpec.seed alone.
    """
    truths = []
    originals = []
    side_lo = 0.06 * min(spec.width, spec.height)
    side_hi = 0.22 * min(spec.width, spec.height)
    for index in range(spec.n_images):
        image_id = _image_id(spec, index)
        rng = _rng(spec.seed, "scene-layout", image_id, 0)
        n_objects = int(rng.integers(spec.objects_min, spec.objects_max + 1))
        objects = []
        detections = []
        for _ in range(n_objects):
            w = float(rng.uniform(side_lo, side_hi))
            h = float(rng.uniform(side_lo, side_hi))
            x1 = float(rng.uniform(0.0, spec.width - w))
            y1 = float(rng.uniform(0.0, spec.height - h))
            label = int(rng.integers(spec.n_classes))
            box = BBox(x1, y1, x1 + w, y1 + h)
            objects.append(GroundTruthObject(bbox=box, label=label))
            probs = _class_probs(spec.n_classes, label, 1.0)
            detections.append(
                Detection(bbox=box, label=label, score=probs[label], probs=probs)
            )
        truths.append(GroundTruth(image_id=image_id, objects=tuple(objects)))
        originals.append(
            RunOutput(
                model_id=ORIGINAL_MODEL_ID,
                image_id=image_id,
                run=0,
                detections=tuple(detections),
            )
        )
    return Scene(spec=spec, ground_truth=tuple(truths), original=tuple(originals))


def replicate_original(scene: Scene, n_runs: int) -> list[RunOutput]:
    """The original model's records for runs 0..n-1 (identical by design)."""
    out = []
    for base in scene.original:
        for run in range(n_runs):
            out.append(
                RunOutput(
                    model_id=base.model_id,
                    image_id=base.image_id,
                    run=run,
                    detections=base.detections,
                )
            )
    return out


def _sane_interval(lo: float, hi: float, limit: float) -> tuple[float, float]:
    """Clip a jittered interval into [0, limit] keeping a positive width."""
    if hi < lo:
        lo, hi = hi, lo
    lo = max(lo, 0.0)
    hi = max(hi, lo + MIN_SIDE)
    if hi > limit:
        hi = limit
        lo = min(lo, hi - MIN_SIDE)
    return lo, hi


def simulate_mutant_runs(
    scene: Scene,
    cfg: MutationConfig | None,
    n_runs: int,
    seed: int | None = None,
    effects: EffectParams | None = None,
) -> list[RunOutput]:
    """Emit n runs of one mutant over the scene.

    cfg None selects the identity mutant ("identity"): its output is the
    original's detections verbatim, with no generator draws at all, so
    byte-level equality with the original stream is structural, not a
    numerical accident. `effects` overrides the curve for calibration
    experiments.
    """
    if n_runs < 1:
        raise ValidationError("n_runs", f"must be >= 1, got {n_runs}")
    model_id = IDENTITY_MODEL_ID if cfg is None else cfg.model_id
    if effects is None:
        effects = effect_curve(cfg)
    if seed is None:
        seed = scene.spec.seed
    spec = scene.spec
    out = []
    if effects.is_identity:
        for base in scene.original:
            for run in range(n_runs):
                out.append(
                    RunOutput(
                        model_id=model_id,
                        image_id=base.image_id,
                        run=run,
                        detections=base.detections,
                    )
                )
        return out
    ghost_side = min(
        GHOST_SIZE_FRAC * math.hypot(spec.width, spec.height),
        0.45 * min(spec.width, spec.height),
    )
    for base in scene.original:
        k = len(base.detections)
        crowd = 1.0 / (1.0 + CROWD_DAMP * max(k - 1, 0))
        p_miss = effects.p_miss * crowd
        sigma = effects.jitter_sigma * crowd
        p_flip = effects.label_flip * crowd
        for run in range(n_runs):
            rng = _rng(seed, model_id, base.image_id, run)
            detections = []
            for det in base.detections:
                if rng.random() < p_miss:
                    continue
                box = det.bbox
                if sigma > 0.0:
                    dx1, dy1, dx2, dy2 = rng.normal(0.0, sigma, size=4)
                    x1, x2 = _sane_interval(box.x1 + dx1, box.x2 + dx2, spec.width)
                    y1, y2 = _sane_interval(box.y1 + dy1, box.y2 + dy2, spec.height)
                    box = BBox(x1, y1, x2, y2)
                label = det.label
                if spec.n_classes >= 2 and rng.random() < p_flip:
                    other = int(rng.integers(spec.n_classes - 1))
                    label = other if other < label else other + 1
                probs = _class_probs(spec.n_classes, label, effects.prob_temperature)
                detections.append(
                    Detection(bbox=box, label=label, score=probs[label], probs=probs)
                )
            for _ in range(int(rng.poisson(effects.ghost_rate))):
                cx = float(rng.uniform(ghost_side / 2.0, spec.width - ghost_side / 2.0))
                cy = float(rng.uniform(ghost_side / 2.0, spec.height - ghost_side / 2.0))
                label = int(rng.integers(spec.n_classes))
                probs = _class_probs(spec.n_classes, label, effects.prob_temperature)
                detections.append(
                    Detection(
                        bbox=BBox(
                            cx - ghost_side / 2.0,
                            cy - ghost_side / 2.0,
                            cx + ghost_side / 2.0,
                            cy + ghost_side / 2.0,
                        ),
                        label=label,
                        score=probs[label],
                        probs=probs,
                    )
                )
            out.append(
                RunOutput(
                    model_id=model_id,
                    image_id=base.image_id,
                    run=run,
                    detections=tuple(detections),
                )
            )
    return out


def mcd_grid() -> list[MutationConfig]:
    """The nine inference-dropout rates of the standard ratio grid."""
    return [MutationConfig(operator="mcd", dropout_rate=r) for r in MCD_RATES]


def mcb_grid() -> list[MutationConfig]:
    """The 9 x 5 dropblock grid: every rate crossed with every block size."""
    return [
        MutationConfig(operator="mcb", dropout_rate=r, block_size=b)
        for r in MCD_RATES
        for b in MCB_BLOCKS
    ]


def simulate_dataset(
    spec: SceneSpec,
    mutants: list[MutationConfig | None],
    n_runs: int,
    seed: int | None = None,
) -> tuple[list[GroundTruth], list[RunOutput]]:
    """Scene + original + all mutant records in one go.

    Record order is deterministic: original first, then mutants in the
    given order, image-major then run-major within each model.
    """
    scene = simulate_scene(spec)
    records = replicate_original(scene, n_runs)
    for cfg in mutants:
        records.extend(simulate_mutant_runs(scene, cfg, n_runs, seed=seed))
    return list(scene.ground_truth), records
