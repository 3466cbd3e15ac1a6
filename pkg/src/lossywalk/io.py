"""Tabular output with fixed formatting.

Numbers are written with 12 significant digits in the C locale; the same rows
always produce the same bytes. Rows are sequences of dicts (or dataclass
instances) that share one key order.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from pathlib import Path

import numpy as np

DIGITS = 12
FORMATS = ("csv", "json")


def format_number(x) -> str:
    """Text form of a scalar: ints verbatim, floats as ``%.12g``, NaN as ``nan``."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        s = f"{x:.{DIGITS}g}"
        return "0" if s == "-0" else s
    return str(x)


def _json_value(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{DIGITS}g}") + 0.0
    return x


def _as_dicts(rows) -> list[dict]:
    out = []
    for row in rows:
        if dataclasses.is_dataclass(row):
            row = dataclasses.asdict(row)
        out.append(dict(row))
    return out


def _check_homogeneous(rows: list[dict], header) -> list[str]:
    if header is None:
        if not rows:
            raise ValueError("header is required for an empty row list")
        header = list(rows[0])
    header = list(header)
    for i, row in enumerate(rows):
        if list(row) != header:
            raise ValueError(f"row {i} has keys {list(row)}, expected {header}")
    return header


def to_csv(rows, header=None) -> str:
    rows = _as_dicts(rows)
    header = _check_homogeneous(rows, header)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(row[k]) for k in header])
    return buf.getvalue()


def to_json(rows, header=None) -> str:
    rows = _as_dicts(rows)
    if rows:
        _check_homogeneous(rows, header)
    data = [{k: _json_value(v) for k, v in row.items()} for row in rows]
    return json.dumps(data, indent=1, allow_nan=False) + "\n"


def write_rows(path, rows, fmt: str = "csv", header=None) -> Path:
    """Serialize ``rows`` to ``path``; I/O failures name the path."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
    text = to_csv(rows, header) if fmt == "csv" else to_json(rows, header)
    path = Path(path)
    try:
        if path.parent != Path(""):
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="ascii", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _parse_scalar(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_rows(path, fmt: str | None = None) -> list[dict]:
    """Parse a file written by :func:`write_rows` back into dicts."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    with open(path, encoding="ascii", newline="") as fh:
        if fmt == "json":
            return json.load(fh)
        if fmt != "csv":
            raise ValueError(f"unknown format {fmt!r}")
        reader = csv.DictReader(fh)
        return [{k: _parse_scalar(v) for k, v in row.items()} for row in reader]
