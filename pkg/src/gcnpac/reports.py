"""JSON and CSV emission with fixed significant-digit rounding."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, is_dataclass

import numpy as np

JSON_DIGITS = 12
CSV_DIGITS = 6

SUMMARY_FIELDS = ("design", "empirical_margin_loss", "complexity_term", "kl_exact", "kl_upper",
                  "final_bound", "order_bound", "baseline_bound")


def round_sig(x: float, digits: int) -> float | str:
    """Round to ``digits`` significant digits; non-finite values become strings."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.{digits}g}")


def normalize(obj, digits: int = JSON_DIGITS):
    """Convert dataclasses, numpy values and enums to plain JSON types, rounding floats."""
    if is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else asdict(obj)
    if isinstance(obj, dict):
        return {str(k): normalize(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return normalize(obj.tolist(), digits)
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return round_sig(obj, digits)
    return obj


def to_json(obj, digits: int = JSON_DIGITS) -> str:
    return json.dumps(normalize(obj, digits), indent=2, sort_keys=True) + "\n"


def _cell(v, digits):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{digits}g}"
    return str(v)


def to_csv(rows: list[dict], fields=None, digits: int = CSV_DIGITS) -> str:
    """CSV text, one row per dict; missing fields are left empty."""
    fields = list(fields or (rows[0].keys() if rows else ()))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_cell(r.get(f), digits) for f in fields])
    return buf.getvalue()


def report_summary(report) -> dict:
    d = report.to_dict() if hasattr(report, "to_dict") else dict(report)
    return {f: d.get(f) for f in SUMMARY_FIELDS}
