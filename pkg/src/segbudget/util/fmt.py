"""Data Formatting.

Number formatting and the text, JSON and CSV renderings of evaluation
reports and training logs.
"""


import csv
import io
import json
import logging
import math

from typing import Any, Dict, List, Mapping, Optional

from segbudget.util import pymagic


log = logging.getLogger(__name__)

FORMATS = ("text", "json", "csv")

REPORT_COLUMNS = (
    "name",
    "n",
    "tokens",
    "rscore",
    "rst",
    "giou",
    "ciou",
    "sat",
    "urss",
    "uncertainty",
)
REPORT_HEADINGS = (
    "Level",
    "N",
    "#Token",
    "RScore",
    "RST",
    "gIoU",
    "cIoU",
    "SAT",
    "URSS",
)
LOG_COLUMNS = (
    "level",
    "n_tasks",
    "expected_length",
    "expected_accuracy",
    "window_mean_length",
)
LOG_HEADINGS = ("Level", "Tasks", "E[len]", "E[acc]", "Window")
LEVEL_ORDER = ("easy", "medium", "hard")
SCHEME_DEFAULTS = (("leveling", "both"), ("splits", 3), ("l_medium", None))


def human_size(size: float) -> str:
    """Return a human-readable representation of a byte size.

    @param size: Number of bytes.
    @return: Formatted result, e.g. "1.5 KiB".
    """
    if size < 0:
        return "-??? bytes"

    if size < 1024:
        return f"{int(size):4d} bytes".lstrip()

    rem = float(size)
    for unit in ("KiB", "MiB", "GiB", "TiB", "PiB"):
        rem /= 1024.0
        if rem < 1024:
            return f"{rem:6.1f} {unit}".lstrip()

    return f"{rem:6.1f} PiB".lstrip()


def fmt_score(value: Optional[float]) -> str:
    """Two decimals, or N/A for missing values."""
    try:
        value = float(value)
    except (ValueError, TypeError):
        return "N/A"
    if not math.isfinite(value):
        return "N/A"
    return f"{value:.2f}"


def fmt_pc(value: Optional[float]) -> str:
    """Scale a ratio value to percent, with two decimals."""
    try:
        return fmt_score(float(value) * 100.0)
    except (ValueError, TypeError):
        return "N/A"


def fmt_json(val) -> str:
    """JSON serialization."""
    return json.dumps(val, cls=pymagic.JSONEncoder, indent=2, sort_keys=True) + "\n"


def _row(cells) -> str:
    return " ".join([f"{cells[0]:<6}"] + [f"{i:>8}" for i in cells[1:]]).rstrip()


def _table(headings, rows: List[List[str]]) -> List[str]:
    return [_row(headings)] + [_row(i) for i in rows]


def _csv(columns, rows: List[Mapping[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row.get(i) is None else row.get(i) for i in columns])
    return buffer.getvalue()


def report_text(report: Mapping[str, Any]) -> str:
    """Aligned table of an evaluation report (dict form)."""
    rows = [
        [
            row["name"],
            str(row["n"]),
            fmt_score(row["tokens"]),
            fmt_score(row["rscore"]),
            fmt_score(row["rst"]),
            fmt_pc(row["giou"]),
            fmt_pc(row["ciou"]),
            fmt_score(row["sat"]),
            fmt_score(row["urss"]),
        ]
        for row in report["rows"]
    ]
    lines = _table(REPORT_HEADINGS, rows)
    footer = (
        f"P={report['params']:g}B gamma={report['gamma']:g}"
        f" tokens={report['token_mode']}"
    )
    if report.get("skipped"):
        footer += f" skipped={report['skipped']}"
    lines.append(footer)
    return "\n".join(lines) + "\n"


def report_csv(report: Mapping[str, Any]) -> str:
    """CSV rows of an evaluation report, at full precision."""
    return _csv(REPORT_COLUMNS, report["rows"])


def _level_key(name: str):
    if name in LEVEL_ORDER:
        return LEVEL_ORDER.index(name), name
    return len(LEVEL_ORDER), name


def _log_rows(summary: Mapping[str, Any]) -> List[Dict[str, Any]]:
    # training logs are written with sorted keys
    levels = summary["levels"]
    return [
        dict(level=name, **{key: levels[name].get(key) for key in LOG_COLUMNS[1:]})
        for name in sorted(levels, key=_level_key)
    ]


def log_text(summary: Mapping[str, Any]) -> str:
    """Aligned table of a training summary."""
    rows = [
        [
            row["level"].capitalize(),
            str(row["n_tasks"]),
            fmt_score(row["expected_length"]),
            fmt_pc(row["expected_accuracy"]),
            fmt_score(row["window_mean_length"]),
        ]
        for row in _log_rows(summary)
    ]
    lines = _table(LOG_HEADINGS, rows)
    footer = (
        f"steps={summary['steps']} seed={summary['seed']} beta={summary['beta']:g}"
        f" accuracy={fmt_pc(summary['expected_accuracy'])}%"
    )
    scheme = summary.get("scheme") or {}
    for key, default in SCHEME_DEFAULTS:
        value = scheme.get(key, default)
        if value == default:
            continue
        if isinstance(value, float):
            value = f"{value:g}"
        footer += f" {key}={value}"
    lines.append(footer)
    return "\n".join(lines) + "\n"


def log_csv(summary: Mapping[str, Any]) -> str:
    """CSV rows of a training summary, at full precision."""
    return _csv(LOG_COLUMNS, _log_rows(summary))


def render_report(report: Mapping[str, Any], output_format: str = "text") -> str:
    """Render an evaluation report dict."""
    if output_format == "json":
        return fmt_json(report)
    if output_format == "csv":
        return report_csv(report)
    return report_text(report)


def render_log(summary: Mapping[str, Any], output_format: str = "text") -> str:
    """Render a training summary dict."""
    if output_format == "json":
        return fmt_json(summary)
    if output_format == "csv":
        return log_csv(summary)
    return log_text(summary)
