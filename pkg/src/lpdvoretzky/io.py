"""Result files: JSON records and CSV tables with a commented metadata header.

Floats in CSV are written with 17 significant digits (always with a ``.``
or exponent so they read back as floats); JSON uses Python's shortest
round-trip ``repr``. Both round-trip exactly.
"""
import csv
import io
import json
import math
import re

import numpy as np

from .errors import ParseError

_INT = re.compile(r"^[+-]?\d+$")
_META = "# meta: "


def format_float(x):
    s = format(float(x), ".17g")
    if math.isfinite(x) and not any(c in s for c in ".en"):
        s += ".0"
    return s


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def parse_cell(s):
    if s == "true":
        return True
    if s == "false":
        return False
    if _INT.match(s):
        return int(s)
    try:
        return float(s)
    except ValueError:
        return s


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps_json(record):
    return json.dumps(_plain(record), indent=2, sort_keys=True) + "\n"


def write_json(path, record):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(record))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}: {e.msg}") from None


def dumps_csv(rows, columns, meta=None):
    buf = io.StringIO()
    if meta is not None:
        buf.write(_META + json.dumps(_plain(meta), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns, meta=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_csv(rows, columns, meta))


def loads_csv(text, name="<csv>"):
    """Parse a table written by ``dumps_csv``; returns ``(meta, rows)``."""
    meta = None
    header = None
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if line.startswith(_META):
                try:
                    meta = json.loads(line[len(_META):])
                except json.JSONDecodeError as e:
                    raise ParseError(f"{name}: line {lineno}: bad metadata ({e.msg})") from None
            continue
        cells = next(csv.reader([line]))
        if header is None:
            header = cells
            continue
        if len(cells) != len(header):
            raise ParseError(f"{name}: line {lineno}: expected {len(header)} fields, got {len(cells)}")
        rows.append({k: parse_cell(v) for k, v in zip(header, cells)})
    if header is None:
        raise ParseError(f"{name}: no header row")
    return meta, rows


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        return loads_csv(fh.read(), str(path))


def load_matrix_csv(path):
    """Numeric matrix, one row per line, comma or whitespace separated.

    A non-numeric first line is skipped as a header.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ParseError(f"{path}: empty matrix file")
    out = []
    width = None
    for lineno, line in enumerate(lines, 1):
        cells = next(csv.reader([line])) if "," in line else line.split()
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            if lineno == 1:
                continue
            raise ParseError(f"{path}: line {lineno}: non-numeric entry") from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise ParseError(f"{path}: line {lineno}: expected {width} columns, got {len(vals)}")
        out.append(vals)
    if not out:
        raise ParseError(f"{path}: no numeric rows")
    return np.array(out, dtype=np.float64)


def save_matrix_csv(path, A):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in np.atleast_2d(A):
            fh.write(",".join(format_float(v) for v in row) + "\n")
