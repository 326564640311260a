"""Deterministic CSV/JSON writers.

All numeric output is rounded to 12 significant digits before writing, so
repeated runs with the same configuration produce byte-identical files.
Files always use LF line endings and end with a newline.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1"


def fmt_float(x) -> str:
    """Render a real number with 12 significant digits (``-0`` normalized)."""
    x = float(x)
    if x == 0.0:
        x = 0.0
    return f"{x:.12g}"


def round_float(x) -> float:
    """Round to the 12-significant-digit value that :func:`fmt_float` prints."""
    return float(fmt_float(x))


def json_ready(obj):
    """Recursively convert numbers/arrays/complex values to JSON-safe types.

    Complex numbers become ``{"re": ..., "im": ...}`` objects; floats are
    rounded to 12 significant digits; numpy scalars and arrays are converted
    to their Python equivalents.
    """
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        return {"re": round_float(z.real), "im": round_float(z.imag)}
    if isinstance(obj, (float, np.floating)):
        return round_float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize object of type {type(obj).__name__}")


def write_json(path, payload: dict) -> Path:
    """Write a JSON report with the schema version stamped in."""
    path = Path(path)
    body = {"schema_version": SCHEMA_VERSION}
    body.update(json_ready(payload))
    text = json.dumps(body, indent=2, sort_keys=True) + "\n"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return fmt_float(value)
    raise TypeError(f"cannot render CSV cell of type {type(value).__name__}")


def write_csv(path, header, rows) -> Path:
    """Write a CSV table with a header row and formatted numeric cells."""
    path = Path(path)
    lines = [",".join(header)]
    width = len(header)
    for row in rows:
        cells = [_cell(v) for v in row]
        if len(cells) != width:
            raise ValueError(
                f"CSV row has {len(cells)} cells but the header has {width} columns"
            )
        lines.append(",".join(cells))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
