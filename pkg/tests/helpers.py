"""Shared builders for test data."""

from __future__ import annotations

import numpy as np

from mutadet.matching import ORIGIN_REFERENCE, ObjectTrack
from mutadet.types import BBox, Detection


def det(x1=0.0, y1=0.0, x2=10.0, y2=10.0, label=0, score=0.9, probs=None):
    if probs is None:
        k = label + 1
        probs = tuple(0.0 if i != label else 1.0 for i in range(k))
        score = 1.0
    return Detection(bbox=BBox(x1, y1, x2, y2), label=label, score=score, probs=probs)


def track_from_boxes(boxes, labels=None, probs=None, n_runs=None, origin=ORIGIN_REFERENCE):
    """Track with one present detection per given box; None entries are
    absent runs."""
    n = n_runs if n_runs is not None else len(boxes)
    per_run = []
    first = None
    for i in range(n):
        box = boxes[i] if i < len(boxes) else None
        if box is None:
            per_run.append(None)
            continue
        label = labels[i] if labels else 0
        p = probs[i] if probs else None
        d = det(*box, label=label, probs=p, score=0.5 if p else 0.9)
        per_run.append(d)
        if first is None:
            first = d
    assert first is not None, "need at least one present run"
    return ObjectTrack(reference=first, per_run=tuple(per_run), origin=origin)


def random_track(rng: np.random.Generator, max_runs=12, max_classes=6) -> ObjectTrack:
    """Random valid track: boxes anywhere in a 1000x1000 field, random
    class count, normalized random probability vectors."""
    n_runs = int(rng.integers(1, max_runs + 1))
    n_present = int(rng.integers(1, n_runs + 1))
    present_at = rng.choice(n_runs, size=n_present, replace=False)
    k = int(rng.integers(1, max_classes + 1))
    per_run: list = [None] * n_runs
    first = None
    for idx in sorted(int(i) for i in present_at):
        x1, y1 = rng.uniform(0, 900, size=2)
        w, h = rng.uniform(1, 100, size=2)
        raw = rng.uniform(0.05, 1.0, size=k)
        probs = raw / raw.sum()
        label = int(rng.integers(k))
        d = Detection(
            bbox=BBox(float(x1), float(y1), float(x1 + w), float(y1 + h)),
            label=label,
            score=float(probs[label]),
            probs=tuple(float(p) for p in probs),
        )
        per_run[idx] = d
        if first is None:
            first = d
    return ObjectTrack(reference=first, per_run=tuple(per_run), origin=ORIGIN_REFERENCE)


def shift_track(track: ObjectTrack, dx: float, dy: float) -> ObjectTrack:
    def move(d):
        if d is None:
            return None
        return Detection(
            bbox=BBox(d.bbox.x1 + dx, d.bbox.y1 + dy, d.bbox.x2 + dx, d.bbox.y2 + dy),
            label=d.label,
            score=d.score,
            probs=d.probs,
        )

    return ObjectTrack(
        reference=move(track.reference),
        per_run=tuple(move(d) for d in track.per_run),
        origin=track.origin,
    )


def scale_track(track: ObjectTrack, s: float) -> ObjectTrack:
    def scale(d):
        if d is None:
            return None
        return Detection(
            bbox=BBox(d.bbox.x1 * s, d.bbox.y1 * s, d.bbox.x2 * s, d.bbox.y2 * s),
            label=d.label,
            score=d.score,
            probs=d.probs,
        )

    return ObjectTrack(
        reference=scale(track.reference),
        per_run=tuple(scale(d) for d in track.per_run),
        origin=track.origin,
    )
