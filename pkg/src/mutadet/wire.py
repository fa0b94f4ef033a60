"""Line-oriented record interchange: parsing, serialization, run-set validation.

One JSON object per line. Detection records carry (model_id, image_id, run,
detections); ground-truth lines use the same shape minus run/score/probs.
Parsing is strict about value invariants (delegated to the domain types) but
lenient about unknown keys, so exports from richer tools still load.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from mutadet.types import (
    AnalysisConfig,
    BBox,
    Detection,
    GroundTruth,
    GroundTruthObject,
    MutationConfig,
    RunOutput,
    ValidationError,
)

# Model ids reserved for non-mutant streams: the unmodified model under test
# and the effect-free control mutant.
ORIGINAL_MODEL_ID = "original"
IDENTITY_MODEL_ID = "identity"
RESERVED_MODEL_IDS = (ORIGINAL_MODEL_ID, IDENTITY_MODEL_ID)

_MCD_RE = re.compile(r"^mcd:(\d+\.\d{2})$")
_MCB_RE = re.compile(r"^mcb:(\d+\.\d{2})x(\d+)$")


class WireFormatError(ValueError):
    """A line could not be decoded into a record."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def parse_model_id(model_id: str) -> MutationConfig | None:
    """Decode a model identifier.

    Returns None for the reserved non-mutant ids, a MutationConfig for a
    well-formed mutant id, and raises ValidationError for anything else.
    The grammar is bit-exact: rates carry exactly two decimals.
    """
    if model_id in RESERVED_MODEL_IDS:
        return None
    m = _MCD_RE.match(model_id)
    if m:
        return MutationConfig(operator="mcd", dropout_rate=float(m.group(1)))
    m = _MCB_RE.match(model_id)
    if m:
        return MutationConfig(
            operator="mcb", dropout_rate=float(m.group(1)), block_size=int(m.group(2))
        )
    raise ValidationError("model_id", f"not a recognized model id: {model_id!r}")


def synthesize_probs(label: int) -> tuple[float, ...]:
    """One-hot probability vector for a record that omitted probs.

    Length label+1 is the smallest class count that can carry the label;
    downstream averaging zero-pads vectors to a common length.
    """
    return tuple(0.0 for _ in range(label)) + (1.0,)


def _lines(stream: str | bytes | Iterable[str]) -> Iterable[str]:
    if isinstance(stream, bytes):
        stream = stream.decode("utf-8")
    if isinstance(stream, str):
        return stream.splitlines()
    return stream


def _decode_line(line_number: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise WireFormatError(line_number, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise WireFormatError(line_number, f"expected an object, got {type(obj).__name__}")
    return obj


def _need(obj: dict, key: str, line_number: int):
    if key not in obj:
        raise WireFormatError(line_number, f"missing key {key!r}")
    return obj[key]


def _decode_bbox(raw, line_number: int) -> BBox:
    if not isinstance(raw, list) or len(raw) != 4:
        raise WireFormatError(line_number, f"bbox must be a 4-element array, got {raw!r}")
    return BBox(*raw)


def _decode_detection(raw, line_number: int) -> Detection:
    if not isinstance(raw, dict):
        raise WireFormatError(line_number, "detection must be an object")
    bbox = _decode_bbox(_need(raw, "bbox", line_number), line_number)
    label = _need(raw, "label", line_number)
    score = _need(raw, "score", line_number)
    probs = raw.get("probs")
    if probs is None:
        if not isinstance(label, int) or isinstance(label, bool) or label < 0:
            raise ValidationError("label", f"expected a non-negative integer, got {label!r}")
        probs = synthesize_probs(label)
    elif not isinstance(probs, list):
        raise WireFormatError(line_number, f"probs must be an array, got {probs!r}")
    return Detection(bbox=bbox, label=label, score=score, probs=tuple(probs))


def parse_records(stream: str | bytes | Iterable[str]) -> list[RunOutput]:
    """Parse detection records, one per non-empty line, order preserved.

    Raises WireFormatError (carrying the 1-based line number) for
    undecodable lines and ValidationError (naming the field) for decoded
    values that violate a domain invariant.
    """
    records = []
    for line_number, line in enumerate(_lines(stream), start=1):
        if not line.strip():
            continue
        obj = _decode_line(line_number, line)
        raw_dets = _need(obj, "detections", line_number)
        if not isinstance(raw_dets, list):
            raise WireFormatError(line_number, "detections must be an array")
        try:
            detections = tuple(_decode_detection(d, line_number) for d in raw_dets)
            record = RunOutput(
                model_id=_need(obj, "model_id", line_number),
                image_id=_need(obj, "image_id", line_number),
                run=_need(obj, "run", line_number),
                detections=detections,
            )
        except ValidationError as exc:
            raise ValidationError(exc.field_name, f"line {line_number}: {exc}") from exc
        records.append(record)
    return records


def parse_records_file(path: str | Path) -> list[RunOutput]:
    return parse_records(Path(path).read_text(encoding="utf-8"))


def parse_ground_truth(stream: str | bytes | Iterable[str]) -> list[GroundTruth]:
    """Parse ground-truth lines: record shape without run/score/probs.

    A model_id key is tolerated and ignored (some exporters keep it).
    """
    truths = []
    for line_number, line in enumerate(_lines(stream), start=1):
        if not line.strip():
            continue
        obj = _decode_line(line_number, line)
        raw_dets = _need(obj, "detections", line_number)
        if not isinstance(raw_dets, list):
            raise WireFormatError(line_number, "detections must be an array")
        objects = []
        try:
            for raw in raw_dets:
                if not isinstance(raw, dict):
                    raise WireFormatError(line_number, "detection must be an object")
                objects.append(
                    GroundTruthObject(
                        bbox=_decode_bbox(_need(raw, "bbox", line_number), line_number),
                        label=_need(raw, "label", line_number),
                    )
                )
            truths.append(
                GroundTruth(image_id=_need(obj, "image_id", line_number), objects=tuple(objects))
            )
        except ValidationError as exc:
            raise ValidationError(exc.field_name, f"line {line_number}: {exc}") from exc
    return truths


def parse_ground_truth_file(path: str | Path) -> list[GroundTruth]:
    return parse_ground_truth(Path(path).read_text(encoding="utf-8"))


def _detection_to_obj(det: Detection) -> dict:
    return {
        "bbox": det.bbox.as_list(),
        "label": det.label,
        "score": det.score,
        "probs": list(det.probs),
    }


def serialize_records(records: Iterable[RunOutput]) -> str:
    """Serialize records to the wire format, one line per record.

    Key order and float formatting are fixed, so equal inputs produce
    byte-equal output and parse/serialize round-trips are stable.
    """
    lines = []
    for rec in records:
        obj = {
            "model_id": rec.model_id,
            "image_id": rec.image_id,
            "run": rec.run,
            "detections": [_detection_to_obj(d) for d in rec.detections],
        }
        lines.append(json.dumps(obj, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")


def serialize_ground_truth(truths: Iterable[GroundTruth]) -> str:
    lines = []
    for gt in truths:
        obj = {
            "image_id": gt.image_id,
            "detections": [{"bbox": o.bbox.as_list(), "label": o.label} for o in gt.objects],
        }
        lines.append(json.dumps(obj, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class RunSetDefect:
    """One completeness violation for a (model, image) group."""

    model_id: str
    image_id: str
    kind: str  # "missing" | "duplicate" | "extra"
    runs: tuple[int, ...]

    def describe(self) -> str:
        runs = ", ".join(str(r) for r in self.runs)
        return f"{self.model_id} / {self.image_id}: {self.kind} run(s) {{{runs}}}"


@dataclass(frozen=True)
class RunSetReport:
    """Outcome of checking a record set against the expected run grid."""

    n_runs: int
    n_records: int
    models: tuple[str, ...]
    images: tuple[str, ...]
    defects: tuple[RunSetDefect, ...]
    warnings: tuple[str, ...] = field(default=())

    @property
    def complete(self) -> bool:
        return not self.defects

    def to_dict(self) -> dict:
        return {
            "complete": self.complete,
            "n_runs": self.n_runs,
            "n_records": self.n_records,
            "models": list(self.models),
            "images": list(self.images),
            "defects": [
                {
                    "model_id": d.model_id,
                    "image_id": d.image_id,
                    "kind": d.kind,
                    "runs": list(d.runs),
                }
                for d in self.defects
            ],
            "warnings": list(self.warnings),
        }


def validate_run_set(records: list[RunOutput], cfg: AnalysisConfig) -> RunSetReport:
    """Check that every model x image group holds exactly runs 0..n_runs-1.

    Report-only: never raises. Label/argmax disagreements are surfaced as
    warnings, not defects; detectors that report the NMS class instead of
    the posterior mode are legal inputs.
    """
    n = cfg.n_runs
    groups: dict[tuple[str, str], list[int]] = {}
    warnings = []
    for rec in records:
        groups.setdefault((rec.model_id, rec.image_id), []).append(rec.run)
        for idx, det in enumerate(rec.detections):
            arg = max(range(len(det.probs)), key=lambda i: det.probs[i])
            if arg != det.label:
                warnings.append(
                    f"{rec.model_id} / {rec.image_id} run {rec.run} detection {idx}: "
                    f"label {det.label} != argmax(probs) {arg}"
                )
    defects = []
    for (model_id, image_id) in sorted(groups):
        runs = groups[(model_id, image_id)]
        seen = set()
        dupes = set()
        for r in runs:
            if r in seen:
                dupes.add(r)
            seen.add(r)
        missing = [r for r in range(n) if r not in seen]
        extra = sorted(r for r in seen if r >= n)
        if missing:
            defects.append(RunSetDefect(model_id, image_id, "missing", tuple(missing)))
        if dupes:
            defects.append(RunSetDefect(model_id, image_id, "duplicate", tuple(sorted(dupes))))
        if extra:
            defects.append(RunSetDefect(model_id, image_id, "extra", tuple(extra)))
    models = tuple(sorted({m for m, _ in groups}))
    images = tuple(sorted({i for _, i in groups}))
    return RunSetReport(
        n_runs=n,
        n_records=len(records),
        models=models,
        images=images,
        defects=tuple(defects),
        warnings=tuple(warnings),
    )
