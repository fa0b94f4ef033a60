"""Command-line client over the service operations.

Subcommands mirror the HTTP endpoints one-to-one and call the same
operation layer in-process, so batch use needs no running server.

Exit codes: 0 success, 1 internal error, 2 input-validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from mutadet import service
from mutadet.analysis import AnalysisInputError
from mutadet.reports import FORMATS, canonical_json, render
from mutadet.stats import ConvergenceError
from mutadet.types import ValidationError
from mutadet.wire import WireFormatError

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat `key = value` config text; # starts a comment line."""
    overrides: dict[str, str] = {}
    for line_number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValidationError("config", f"line {line_number}: expected key = value")
        key, _, value = stripped.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def _load_config(args) -> dict[str, object]:
    overrides: dict[str, object] = {}
    if getattr(args, "config", None):
        overrides.update(parse_config_file(args.config))
    if getattr(args, "alpha", None) is not None:
        overrides["alpha"] = args.alpha
    if getattr(args, "iou_threshold", None) is not None:
        overrides["iou_threshold"] = args.iou_threshold
    return overrides


def _read_records(paths) -> list[str]:
    return [Path(p).read_text(encoding="utf-8") for p in paths]


def _read_suites(path: str | None) -> dict[str, str] | None:
    if path is None:
        return None
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
    ):
        raise ValidationError("suites", "expected a JSON object mapping image_id to suite label")
    return raw


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    texts = _read_records(args.records)
    report = service.op_validate("".join(texts), runs=args.runs, config=_load_config(args))
    summary = dict(report)
    _emit(canonical_json(summary), args.out)
    if not report["complete"]:
        for defect in report["defects"]:
            print(
                f"defect: {defect['model_id']} / {defect['image_id']}: "
                f"{defect['kind']} run(s) {defect['runs']}",
                file=sys.stderr,
            )
        return EXIT_INVALID
    return EXIT_OK


def cmd_simulate(args) -> int:
    objects_min, objects_max = args.objects
    result = service.op_simulate(
        images=args.images,
        objects_min=objects_min,
        objects_max=objects_max,
        width=args.extent[0],
        height=args.extent[1],
        classes=args.classes,
        seed=args.seed,
        runs=args.runs,
        grid=args.grid,
        image_prefix=args.image_prefix,
    )
    Path(args.out).write_text(result["records"], encoding="utf-8")
    if args.ground_truth:
        Path(args.ground_truth).write_text(result["ground_truth"], encoding="utf-8")
    if args.suites:
        mapping = {image_id: args.image_prefix for image_id in result["images"]}
        Path(args.suites).write_text(
            json.dumps(mapping, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(
        f"wrote {len(result['images'])} images x {args.runs} runs ({args.grid} grid) "
        f"to {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_analyze(args) -> int:
    texts = _read_records(args.records)
    gt_text = Path(args.ground_truth).read_text(encoding="utf-8") if args.ground_truth else None
    report = service.op_analyze(
        texts,
        ground_truth_text=gt_text,
        suites=_read_suites(args.suites),
        config=_load_config(args),
        runs=args.runs,
    )
    _emit(render(report, args.format), args.out)
    return EXIT_OK


def _read_report(path: str) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValidationError("report", "expected a JSON report document")
    return doc


def cmd_compare_suites(args) -> int:
    doc = service.op_compare_suites(
        _read_report(args.report),
        keys=args.keys.split(",") if args.keys else None,
        alpha=args.alpha,
    )
    _emit(render(doc, args.format), args.out)
    return EXIT_OK


def cmd_correlate(args) -> int:
    doc = service.op_correlate(
        _read_report(args.report),
        args.operator,
        keys=args.keys.split(",") if args.keys else None,
        alpha=args.alpha,
    )
    _emit(render(doc, args.format), args.out)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("mutadet.service:app", host=args.host, port=args.port)
    return EXIT_OK


def _objects_range(text: str) -> tuple[int, int]:
    try:
        lo, _, hi = text.partition(":")
        return int(lo), int(hi if hi else lo)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected MIN:MAX, got {text!r}") from exc


def _extent(text: str) -> tuple[float, float]:
    try:
        w, _, h = text.partition("x")
        return float(w), float(h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mutadet",
        description="Uncertainty-aware mutation analysis for object-detection software",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check record files for run-grid completeness")
    p.add_argument("--records", nargs="+", required=True, metavar="PATH")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--runs", type=int)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, metavar="PATH", help="records file to write")
    p.add_argument("--ground-truth", metavar="PATH", help="annotations file to write")
    p.add_argument("--suites", metavar="PATH", help="suite-map file to write")
    p.add_argument("--images", type=int, default=25)
    p.add_argument("--objects", type=_objects_range, default=(1, 5), metavar="MIN:MAX")
    p.add_argument("--extent", type=_extent, default=(640.0, 480.0), metavar="WxH")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--grid", choices=service.GRID_CHOICES, default="mcd")
    p.add_argument("--image-prefix", default="img")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="score mutants from record files")
    p.add_argument("--records", nargs="+", required=True, metavar="PATH")
    p.add_argument("--ground-truth", metavar="PATH")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--suites", metavar="PATH", help="JSON image_id -> suite label map")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=FORMATS, default="canonical")
    p.add_argument("--runs", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--iou-threshold", type=float)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare-suites", help="rank-test score keys across suites")
    p.add_argument("--report", required=True, metavar="PATH", help="canonical analyze output")
    p.add_argument("--keys", metavar="KEY[,KEY...]")
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=FORMATS, default="canonical")
    p.set_defaults(func=cmd_compare_suites)

    p = sub.add_parser("correlate", help="correlate mutation ratios with scores")
    p.add_argument("--report", required=True, metavar="PATH", help="canonical analyze output")
    p.add_argument("--operator", choices=("mcd", "mcb"), required=True)
    p.add_argument("--keys", metavar="KEY[,KEY...]")
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=FORMATS, default="canonical")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, WireFormatError, AnalysisInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, AnalysisInputError):
            for defect in exc.defects:
                print(f"defect: {defect}", file=sys.stderr)
        return EXIT_INVALID
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - safety net
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
