"""Match/miss/ghost partition and cross-run object tracks.

Two distinct association problems live here and they are deliberately not
the same:

* match_outputs pairs one original output against one mutant output with
  the full predicate (IoU above threshold AND equal labels). Its counts
  feed the detection-level mutation scores.
* build_tracks associates a fixed reference output with each of a model's
  n repeated runs using IoU only. Label equality is dropped on purpose:
  label flips across runs are a classification-uncertainty signal and the
  uncertainty metrics must see them, not lose the object.
"""

from __future__ import annotations

from dataclasses import dataclass

from mutadet.types import BBox, Detection, RunOutput, iou

ORIGIN_REFERENCE = "reference"
ORIGIN_GHOST = "ghost"

SET_MATCH = "match"
SET_MISS = "miss"
SET_GHOST = "ghost"


@dataclass(frozen=True)
class MatchReport:
    """Partition of one (original, mutant) output pair.

    Every original index lands in matches or miss; every mutant index in
    matches or ghost.
    """

    matches: tuple[tuple[int, int, float], ...]
    miss: tuple[int, ...]
    ghost: tuple[int, ...]


def greedy_pairs(
    boxes_a: list[BBox],
    boxes_b: list[BBox],
    labels_a: list[int] | None,
    labels_b: list[int] | None,
    threshold: float,
) -> list[tuple[int, int, float]]:
    """One-to-one greedy assignment by descending IoU.

    Candidates need IoU strictly above the threshold; when labels are
    given they must also be equal. Ties break on (lower a index, lower b
    index), which makes the result a pure function of its inputs.
    """
    candidates = []
    for i, box_a in enumerate(boxes_a):
        for j, box_b in enumerate(boxes_b):
            if labels_a is not None and labels_a[i] != labels_b[j]:
                continue
            overlap = iou(box_a, box_b)
            if overlap > threshold:
                candidates.append((-overlap, i, j))
    candidates.sort()
    taken_a: set[int] = set()
    taken_b: set[int] = set()
    pairs = []
    for neg, i, j in candidates:
        if i in taken_a or j in taken_b:
            continue
        taken_a.add(i)
        taken_b.add(j)
        pairs.append((i, j, -neg))
    return pairs


def match_outputs(
    original: list[Detection] | tuple[Detection, ...],
    mutant: list[Detection] | tuple[Detection, ...],
    iou_threshold: float,
) -> MatchReport:
    """Partition detections of one original/mutant pair into the three sets."""
    original = list(original)
    mutant = list(mutant)
    pairs = greedy_pairs(
        [d.bbox for d in original],
        [d.bbox for d in mutant],
        [d.label for d in original],
        [d.label for d in mutant],
        iou_threshold,
    )
    matched_a = {i for i, _, _ in pairs}
    matched_b = {j for _, j, _ in pairs}
    miss = tuple(i for i in range(len(original)) if i not in matched_a)
    ghost = tuple(j for j in range(len(mutant)) if j not in matched_b)
    return MatchReport(matches=tuple(pairs), miss=miss, ghost=ghost)


@dataclass(frozen=True)
class ObjectTrack:
    """One object followed across n repeated runs of one model.

    reference is the anchor detection for reference-anchored tracks, or
    the member centroid (mean box, majority label) for ghost clusters.
    per_run holds the associated detection per run index, None where the
    object did not appear in that run.
    """

    reference: Detection
    per_run: tuple[Detection | None, ...]
    origin: str

    @property
    def n_runs(self) -> int:
        return len(self.per_run)

    @property
    def n_present(self) -> int:
        return sum(1 for d in self.per_run if d is not None)

    @property
    def presence_rate(self) -> float:
        return self.n_present / len(self.per_run)

    def present(self) -> list[Detection]:
        return [d for d in self.per_run if d is not None]


@dataclass(frozen=True)
class TrackAssignment:
    track: ObjectTrack
    set_name: str
    presence_rate: float


def _pad(probs: tuple[float, ...], k: int) -> list[float]:
    return list(probs) + [0.0] * (k - len(probs))


class _GhostCluster:
    """Online cluster of unassociated detections, at most one per run."""

    __slots__ = ("members", "centroid")

    def __init__(self, run: int, det: Detection):
        self.members: dict[int, Detection] = {run: det}
        self.centroid = det.bbox

    def can_take(self, run: int, box: BBox, threshold: float) -> float | None:
        if run in self.members:
            return None
        overlap = iou(self.centroid, box)
        return overlap if overlap > threshold else None

    def add(self, run: int, det: Detection) -> None:
        self.members[run] = det
        boxes = [d.bbox for d in self.members.values()]
        n = len(boxes)
        self.centroid = BBox(
            sum(b.x1 for b in boxes) / n,
            sum(b.y1 for b in boxes) / n,
            sum(b.x2 for b in boxes) / n,
            sum(b.y2 for b in boxes) / n,
        )

    def to_track(self, n_runs: int) -> ObjectTrack:
        dets = list(self.members.values())
        labels = [d.label for d in dets]
        counts: dict[int, int] = {}
        for lab in labels:
            counts[lab] = counts.get(lab, 0) + 1
        best = max(counts.values())
        majority = min(lab for lab, c in counts.items() if c == best)
        k = max(len(d.probs) for d in dets)
        mean_probs = [0.0] * k
        for d in dets:
            padded = _pad(d.probs, k)
            for idx in range(k):
                mean_probs[idx] += padded[idx]
        mean_probs = [p / len(dets) for p in mean_probs]
        reference = Detection(
            bbox=self.centroid,
            label=majority,
            score=sum(d.score for d in dets) / len(dets),
            probs=tuple(mean_probs),
        )
        per_run = tuple(self.members.get(r) for r in range(n_runs))
        return ObjectTrack(reference=reference, per_run=per_run, origin=ORIGIN_GHOST)


def build_tracks(
    reference: RunOutput,
    runs: list[RunOutput],
    iou_threshold: float,
) -> list[ObjectTrack]:
    """Follow each reference object (and each recurring spurious object)
    across the given runs.

    Association per run is greedy descending-IoU without the label clause.
    Detections no reference object claims are pooled and clustered into
    ghost tracks: a detection joins the highest-IoU existing cluster whose
    centroid overlaps above the threshold and which has no member from the
    same run (ties to the earliest-created cluster), else it seeds a new
    one. Output order: reference-anchored tracks in reference order, then
    ghost clusters in creation order.
    """
    for run in runs:
        if run.model_id != runs[0].model_id or run.image_id != reference.image_id:
            raise ValueError(
                "runs must share one model_id and the reference image_id, got "
                f"{run.model_id!r} / {run.image_id!r}"
            )
    run_list = sorted(runs, key=lambda r: r.run)
    n_runs = len(run_list)
    ref_boxes = [d.bbox for d in reference.detections]
    slots: list[list[Detection | None]] = [[None] * n_runs for _ in ref_boxes]
    pooled: list[tuple[int, Detection]] = []
    for run_idx, run in enumerate(run_list):
        pairs = greedy_pairs(
            ref_boxes, [d.bbox for d in run.detections], None, None, iou_threshold
        )
        claimed = set()
        for i, j, _ in pairs:
            slots[i][run_idx] = run.detections[j]
            claimed.add(j)
        for j, det in enumerate(run.detections):
            if j not in claimed:
                pooled.append((run_idx, det))
    tracks = [
        ObjectTrack(reference=ref, per_run=tuple(slots[i]), origin=ORIGIN_REFERENCE)
        for i, ref in enumerate(reference.detections)
    ]
    clusters: list[_GhostCluster] = []
    for run_idx, det in pooled:
        best_overlap = None
        best_cluster = None
        for cluster in clusters:
            overlap = cluster.can_take(run_idx, det.bbox, iou_threshold)
            if overlap is not None and (best_overlap is None or overlap > best_overlap):
                best_overlap = overlap
                best_cluster = cluster
        if best_cluster is None:
            clusters.append(_GhostCluster(run_idx, det))
        else:
            best_cluster.add(run_idx, det)
    tracks.extend(cluster.to_track(n_runs) for cluster in clusters)
    return tracks


def classify_tracks(tracks: list[ObjectTrack], miss_threshold: float) -> list[TrackAssignment]:
    """Bind tracks to the match/miss/ghost object sets.

    A reference-anchored track is MISS when its cross-run miss fraction
    reaches the threshold, MATCH otherwise; ghost clusters are GHOST.
    Output order follows the input.
    """
    out = []
    for track in tracks:
        rate = track.presence_rate
        if track.origin == ORIGIN_GHOST:
            set_name = SET_GHOST
        elif 1.0 - rate >= miss_threshold:
            set_name = SET_MISS
        else:
            set_name = SET_MATCH
        out.append(TrackAssignment(track=track, set_name=set_name, presence_rate=rate))
    return out
