"""CSV / JSON writers and readers for trajectories, tables and run summaries."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import Trajectory


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def trajectory_columns(traj: Trajectory):
    shape = traj.states.shape[1:]
    if len(shape) == 1:
        labels = [str(i + 1) for i in range(shape[0])]
    else:
        labels = [f"{i + 1}_{k + 1}" for i in range(shape[0]) for k in range(shape[1])]
    return ["t"] + [f"theta_{s}" for s in labels] + [f"dtheta_{s}" for s in labels]


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Columns ``t, theta_*, dtheta_*``; vector states use node-major ``i_k`` labels."""
    t_count = traj.states.shape[0]
    body = np.hstack([traj.times[:, None], traj.states.reshape(t_count, -1),
                      traj.derivs.reshape(t_count, -1)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_columns(traj))
        for row in body:
            w.writerow([repr(float(v)) for v in row])


def read_trajectory_csv(path, dim: int | None = None):
    """Return ``(times, states, derivs)``; pass ``dim`` to unflatten vector states."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    width = (data.shape[1] - 1) // 2
    states = data[:, 1:1 + width]
    derivs = data[:, 1 + width:]
    if dim:
        states = states.reshape(len(data), -1, dim)
        derivs = derivs.reshape(len(data), -1, dim)
    return data[:, 0], states, derivs


def write_table(rows: list[dict], path) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def _parse_cell(s):
    if s == "":
        return None
    if s in ("True", "False"):
        return s == "True"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: _parse_cell(v) for k, v in r.items()} for r in csv.DictReader(fh)]


def write_grid(values, path) -> None:
    values = np.asarray(values, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in values:
            w.writerow([repr(float(v)) for v in row])


def read_grid(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in r] for r in csv.reader(fh)])


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats for ``json``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_json(record, path) -> None:
    Path(path).write_text(json.dumps(jsonable(record), indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
