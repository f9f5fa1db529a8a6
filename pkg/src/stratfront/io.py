"""Artifact writers: atomic CSV/JSON/JSON-lines, run-length set exchange.

Every writer goes through an atomic rename so partially written artifacts
never appear under their final name.  Numbers are serialized with repr
precision so reruns are byte-identical.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import ModelError
from .functionals import DiscreteSet
from .model import CylinderGrid


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True,
                                       default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def append_jsonl(path: str, record: dict) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "a") as f:
        f.write(json.dumps(record, sort_keys=True, default=_json_default) + "\n")


def write_discrete_set(path: str, s: DiscreteSet) -> None:
    """Run-length CSV (y_index, z_start, z_end): half-open cell-index runs.

    z_start = -1 marks a column extending to -infinity (its run then starts
    at the window bottom).
    """
    rows = []
    occ = s.occupancy
    for i in range(occ.shape[0]):
        j = 0
        nz = occ.shape[1]
        while j < nz:
            if occ[i, j]:
                start = j
                while j < nz and occ[i, j]:
                    j += 1
                z0 = -1 if (start == 0 and s.extends_below[i]) else start
                rows.append((i, z0, j))
            else:
                j += 1
    write_csv(path, ["y_index", "z_start", "z_end"], rows)


def read_discrete_set(path: str, grid: CylinderGrid) -> DiscreteSet:
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines or lines[0].split(",") != ["y_index", "z_start", "z_end"]:
        raise ModelError(f"{path}: expected header y_index,z_start,z_end")
    occ = np.zeros((grid.section.nodes, grid.nz - 1), dtype=bool)
    ext = np.zeros(grid.section.nodes, dtype=bool)
    for ln in lines[1:]:
        i_s, a_s, b_s = ln.split(",")
        i, a, b = int(i_s), int(a_s), int(b_s)
        if a == -1:
            ext[i] = True
            a = 0
        occ[i, a:b] = True
    return DiscreteSet(grid, occ, ext)
