"""CSV/YAML serialization of closed-loop logs.

A run directory holds ``trajectory.csv`` (one row per applied input),
``predicted_<k>.csv`` (the open-loop state prediction used at step ``k``)
and ``summary.yaml``. Floats are written with 17 significant digits, so
reading a file back gives the exact binary values.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import yaml

__all__ = ["LogIOError", "write_log", "read_trajectory", "read_predicted",
           "trajectory_header"]

_FMT = "%.17g"


class LogIOError(OSError):
    """I/O failure while writing or reading a run directory."""

    def __init__(self, path, exc):
        super().__init__(f"{path}: {exc}")
        self.path = Path(path)


def _num(v):
    return _FMT % float(v)


def trajectory_header(n_x, n_u):
    return (["step"] + [f"x{i}" for i in range(n_x)] + [f"u{i}" for i in range(n_u)]
            + ["penalty", "iters", "solve_ms", "resid_inf"])


def _dims(log):
    n_x = log.states[0].size if log.states else log.x_ref.size
    n_u = log.inputs[0].size if log.inputs else 0
    return n_x, n_u


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise LogIOError(path, exc) from exc


def write_log(log, path, n_u=None):
    """Write ``log`` into directory ``path`` (created if missing).

    ``n_u`` sets the input-column count for an empty log; it is inferred
    otherwise. Returns the list of files written.
    """
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise LogIOError(out, exc) from exc
    n_x, inferred = _dims(log)
    n_u = inferred if log.inputs or n_u is None else int(n_u)

    rows = []
    for k in range(len(log)):
        rows.append([str(k)] + [_num(v) for v in log.states[k]]
                    + [_num(v) for v in log.inputs[k]]
                    + [_num(log.penalty[k]), str(int(log.iterations[k])),
                       _num(log.solve_time[k] * 1e3), _num(log.residual[k])])
    files = [out / "trajectory.csv"]
    _write_csv(files[0], trajectory_header(n_x, n_u), rows)

    for k, pred in enumerate(log.predicted):
        f = out / f"predicted_{k}.csv"
        _write_csv(f, ["stage"] + [f"x{i}" for i in range(n_x)],
                   [[str(j)] + [_num(v) for v in row] for j, row in enumerate(pred)])
        files.append(f)

    summary = log.summary()
    summary["status_counts"] = {s: log.status.count(s) for s in sorted(set(log.status))}
    summary["reached_target"] = bool(log.reached_target())
    summary["clear_of_obstacles"] = bool(log.clear_of_obstacles())
    f = out / "summary.yaml"
    try:
        f.write_text(yaml.safe_dump(summary, sort_keys=False))
    except OSError as exc:
        raise LogIOError(f, exc) from exc
    files.append(f)
    return files


def _read_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise LogIOError(path, exc) from exc
    if not rows:
        raise LogIOError(path, "empty file (missing header)")
    return rows[0], rows[1:]


def read_trajectory(path):
    """Read ``trajectory.csv`` (or a run directory containing it).

    Returns a dict mapping each column name to a numpy array; ``step`` and
    ``iters`` are integer arrays, everything else float.
    """
    path = Path(path)
    if path.is_dir():
        path = path / "trajectory.csv"
    header, rows = _read_csv(path)
    cols = {}
    for j, name in enumerate(header):
        dtype = int if name in ("step", "iters") else float
        cols[name] = np.array([dtype(r[j]) for r in rows], dtype=dtype)
    return cols


def read_predicted(path, k):
    """Open-loop prediction of step ``k`` as an ``(N+1, n_x)`` array."""
    path = Path(path)
    f = path / f"predicted_{k}.csv" if path.is_dir() else path
    _, rows = _read_csv(f)
    return np.array([[float(v) for v in r[1:]] for r in rows])
