"""Serialization of report and statistics documents.

Three formats: canonical (indented JSON, stable key order, the only format
meant for machine consumption and byte-level comparison), csv, and a
human-readable table.
"""

from __future__ import annotations

import io
from typing import Mapping

from mutadet.scores import SCORE_KEYS

FORMATS = ("canonical", "csv", "table")


def canonical_json(doc: Mapping) -> str:
    """Deterministic JSON: documents are built with ordered keys, so plain
    serialization with a fixed layout is byte-stable."""
    import json

    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_line(cells) -> str:
    out = []
    for cell in cells:
        text = _cell(cell)
        if any(ch in text for ch in ",\"\n"):
            text = '"' + text.replace('"', '""') + '"'
        out.append(text)
    return ",".join(out)


def _fmt(value, width: int | None = None) -> str:
    if value is None:
        text = "-"
    elif isinstance(value, bool):
        text = "yes" if value else "no"
    elif isinstance(value, float):
        text = f"{value:.6g}"
    else:
        text = str(value)
    return text if width is None else text.rjust(width)


def report_to_csv(report: Mapping) -> str:
    """One row per (suite, mutant) plus one aggregate row per suite."""
    buf = io.StringIO()
    header = ["suite", "model_id", "operator", "dropout_rate", "block_size", *SCORE_KEYS]
    buf.write(_csv_line(header) + "\n")
    for suite_id in report["suites"]:
        suite = report["suites"][suite_id]
        for row in suite["mutants"]:
            cells = [
                suite_id,
                row["model_id"],
                row["operator"],
                row["dropout_rate"],
                row["block_size"],
                *[row["scores"][k] for k in SCORE_KEYS],
            ]
            buf.write(_csv_line(cells) + "\n")
        aggregate = suite["aggregate"]
        buf.write(
            _csv_line(
                [suite_id, "(aggregate)", None, None, None]
                + [aggregate[k] for k in SCORE_KEYS]
            )
            + "\n"
        )
    return buf.getvalue()


def report_to_table(report: Mapping) -> str:
    """Compact human-readable view: per-suite kill summary and aggregates."""
    lines = []
    cfg = report["config"]
    lines.append(
        f"analysis report  (runs={cfg['n_runs']}, iou>{cfg['iou_threshold']}, "
        f"alpha={cfg['alpha']}, null p={cfg['binomial_null_p']})"
    )
    filt = report["filter"]
    lines.append(
        f"images kept: {len(filt['kept_images'])}"
        + (f", dropped by filter: {len(filt['dropped_images'])}" if filt["dropped_images"] else "")
    )
    for suite_id in report["suites"]:
        suite = report["suites"][suite_id]
        lines.append("")
        lines.append(f"suite {suite_id!r}  ({len(suite['images'])} images)")
        header = f"  {'mutant':<14} {'killed':<10} {'obj_miss':>9} {'obj_ghost':>9} {'obj_mg':>9} {'iou_ms':>9}"
        lines.append(header)
        for row in suite["mutants"]:
            kills = "".join(
                criterion[0].upper() if row["kills"][criterion]["killed"] else "-"
                for criterion in ("miss", "ghost", "mg")
            )
            scores = row["scores"]
            lines.append(
                f"  {row['model_id']:<14} {kills:<10}"
                f" {_fmt(scores['obj_ms_miss'], 9)} {_fmt(scores['obj_ms_ghost'], 9)}"
                f" {_fmt(scores['obj_ms_mg'], 9)} {_fmt(scores['iou_ms'], 9)}"
            )
        lines.append("  aggregate means:")
        aggregate = suite["aggregate"]
        for key in SCORE_KEYS:
            lines.append(f"    {key:<16} {_fmt(aggregate[key])}")
    return "\n".join(lines) + "\n"


def stats_to_csv(doc: Mapping) -> str:
    """Rows of a compare-suites or correlate document."""
    rows = doc["rows"]
    buf = io.StringIO()
    has_suite = any("suite" in row for row in rows)
    header = (["suite"] if has_suite else []) + [
        "score_key",
        "status",
        "n",
        "statistic",
        "p_value",
        "effect",
        "df",
        "band",
        "significant",
    ]
    buf.write(_csv_line(header) + "\n")
    for row in rows:
        n = row.get("n")
        if n is None and "n_per_suite" in row:
            n = "+".join(str(v) for v in row["n_per_suite"])
        cells = ([row.get("suite")] if has_suite else []) + [
            row.get("score_key"),
            row.get("status"),
            n,
            row.get("statistic"),
            row.get("p_value"),
            row.get("effect"),
            row.get("df"),
            row.get("band"),
            row.get("significant"),
        ]
        buf.write(_csv_line(cells) + "\n")
    return buf.getvalue()


def stats_to_table(doc: Mapping) -> str:
    lines = []
    title = doc.get("test", "statistics")
    extra = f" operator={doc['operator']}" if "operator" in doc else ""
    lines.append(f"{title}{extra}  (alpha={doc['alpha']})")
    for row in doc["rows"]:
        prefix = f"{row['suite']}/" if "suite" in row else ""
        key = f"{prefix}{row['score_key']}"
        if row.get("status") != "ok":
            lines.append(f"  {key:<28} {row.get('status')}")
            continue
        lines.append(
            f"  {key:<28} stat={_fmt(row['statistic'])} p={_fmt(row['p_value'])}"
            f" effect={_fmt(row['effect'])} df={row['df']} [{row['band']}]"
            f"{'  *' if row['significant'] else ''}"
        )
    return "\n".join(lines) + "\n"


def render(doc: Mapping, fmt: str) -> str:
    """Dispatch a document to one of the three output formats."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")
    if fmt == "canonical":
        return canonical_json(doc)
    schema = doc.get("schema", "")
    if schema.startswith("mutadet/report/"):
        return report_to_csv(doc) if fmt == "csv" else report_to_table(doc)
    return stats_to_csv(doc) if fmt == "csv" else stats_to_table(doc)
