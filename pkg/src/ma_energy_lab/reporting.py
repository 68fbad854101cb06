"""Deterministic report emission.

JSON reports carry the schema tag and print every float with 17 significant
digits, so identical inputs produce byte-identical files.  CSV files start
with a comment line documenting the columns.  Timing is never written to
reports.
"""

from __future__ import annotations

import math
import os
from typing import Iterable

SCHEMA = "ma-energy-lab/1"


def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent: int = 0) -> str:
    """Minimal JSON serializer with fixed float formatting and key order."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}{dumps(str(k))}: {dumps(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{inner}{dumps(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    try:
        import numpy as np
        if isinstance(obj, np.integer):
            return str(int(obj))
        if isinstance(obj, np.floating):
            return format_float(float(obj))
        if isinstance(obj, np.ndarray):
            return dumps(obj.tolist(), indent)
    except ImportError:          # pragma: no cover
        pass
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_json(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(payload))
        fh.write("\n")


def write_csv(path: str, columns: Iterable[str], rows: Iterable[tuple]) -> None:
    cols = list(columns)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# columns: " + ", ".join(cols) + "\n")
        fh.write(",".join(cols) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, float):
                    cells.append(format_float(v))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def report_payload(command: str, config: dict, results, seed=None, grid_hash=None) -> dict:
    return {
        "schema": SCHEMA,
        "command": command,
        "seed": seed,
        "grid_hash": grid_hash,
        "config": config,
        "results": results,
    }
