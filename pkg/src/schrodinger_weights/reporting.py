"""CSV and JSON writers for grid functions, characteristics and check reports.

Floats are written with ``repr`` (shortest round-tripping form), so every
numeric output keeps full double precision.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .grid import Grid, GridFunction

__all__ = [
    "json_ready",
    "dumps_json",
    "rows_to_csv",
    "write_rows",
    "write_json",
    "grid_function_to_csv",
    "grid_function_header",
    "read_grid_function",
]


def json_ready(obj):
    """Recursively convert numpy types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_ready(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if hasattr(obj, "to_dict"):
        return json_ready(obj.to_dict())
    return obj


def dumps_json(obj) -> str:
    return json.dumps(json_ready(obj), sort_keys=True, indent=1) + "\n"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def rows_to_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    """CSV text; column order is ``columns`` or first-seen key order."""
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for r in rows:
        wr.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def write_rows(path: str | Path, rows: list[dict], columns: list[str] | None = None) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(rows_to_csv(rows, columns))
    return p


def write_json(path: str | Path, obj) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps_json(obj))
    return p


def grid_function_header(f: GridFunction) -> dict:
    return f.grid.to_dict()


def grid_function_to_csv(f: GridFunction) -> str:
    """One sample per row in index-major order, columns ``index, x0..x{n-1}, value``."""
    g = f.grid
    cols = ["index"] + [f"x{k}" for k in range(g.dim)] + ["value"]
    rows = []
    for i, (pt, v) in enumerate(zip(g.centers, f.samples)):
        row = {"index": i, "value": float(v)}
        row.update({f"x{k}": float(pt[k]) for k in range(g.dim)})
        rows.append(row)
    return rows_to_csv(rows, cols)


def write_grid_function(stem: str | Path, f: GridFunction) -> tuple[Path, Path]:
    """Write ``stem.csv`` and ``stem.json`` (the grid header)."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    csv_path = stem.with_suffix(".csv")
    csv_path.write_text(grid_function_to_csv(f))
    return csv_path, write_json(stem.with_suffix(".json"), grid_function_header(f))


def read_grid_function(csv_path: str | Path, header_path: str | Path) -> GridFunction:
    hd = json.loads(Path(header_path).read_text())
    g = Grid(hd["dim"], hd["half_extent"], hd["cells_per_axis"])
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return GridFunction(g, np.array([float(r["value"]) for r in rows]))
