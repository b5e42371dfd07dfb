"""Dataset ingestion and result serialization.

Dataset files are CSV with header ``t,u,y`` and one time-ordered sample per
row.  Input locations are built by windowing the raw series: with output
memory ``m_y`` and input memory ``m_u`` the location for time t is

    z_t = [y(t-1), ..., y(t-m_y), u(t), u(t-1), ..., u(t-m_u+1)]

and the first max(m_y, m_u - 1) rows, which lack full history, are dropped.

Serialized JSON is written with sorted keys and 2-space indentation; CSV
floats use ``repr``.  Both are byte-reproducible for identical results.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .experiment import CONTROLLERS, ORACLE_SINGULAR_FLAG
from .regression import Dataset

CSV_HEADER = ["t", "u", "y"]
RUNS_CSV_HEADER = ["run", "controller", "J", "J1", "J2", "flags"]


def build_locations(u: np.ndarray, y: np.ndarray, memory_y: int, memory_u: int) -> Dataset:
    """Window raw input/output series into regression locations."""
    u = np.asarray(u, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if u.size != y.size:
        raise ValueError("input and output series must have equal length")
    if memory_y < 0 or memory_u < 1:
        raise ValueError("memory_y must be >= 0 and memory_u >= 1")
    start = max(memory_y, memory_u - 1)
    n = u.size - start
    if n < 1:
        raise ValueError(
            f"series of length {u.size} is too short for memory "
            f"(need at least {start + 1} rows)"
        )
    locs = np.empty((n, memory_y + memory_u))
    for i, t in enumerate(range(start, u.size)):
        for j in range(memory_y):
            locs[i, j] = y[t - 1 - j]
        for j in range(memory_u):
            locs[i, memory_y + j] = u[t - j]
    return Dataset(locations=locs, outputs=y[start:])


def load_dataset(path, memory_y: int = 1, memory_u: int | None = None) -> Dataset:
    """Read a ``t,u,y`` CSV and window it into a Dataset.

    ``memory_u`` defaults to ``memory_y`` (the standard lagged-output /
    lagged-input layout).
    """
    if memory_u is None:
        memory_u = memory_y
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise ValueError(f"{path}: expected header 't,u,y', got {header!r}")
        times, us, ys = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: row {lineno} has {len(row)} fields, expected 3")
            try:
                t, u, y = (float(v) for v in row)
            except ValueError:
                raise ValueError(f"{path}: row {lineno} is not numeric: {row!r}") from None
            if not (math.isfinite(t) and math.isfinite(u) and math.isfinite(y)):
                raise ValueError(f"{path}: row {lineno} contains a non-finite value")
            if times and t <= times[-1]:
                raise ValueError(f"{path}: row {lineno} breaks the time ordering")
            times.append(t)
            us.append(u)
            ys.append(y)
    if not times:
        raise ValueError(f"{path}: no data rows")
    return build_locations(np.array(us), np.array(ys), memory_y, memory_u)


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_runs_csv(records, path) -> None:
    """Per-run cost records, one row per (run, controller).

    Columns J1 and J2 carry the first two per-step components (J2 is empty
    for horizon 1); excluded oracle rows have empty cost fields and the
    exclusion flag set.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUNS_CSV_HEADER)
        for rec in records:
            for name in CONTROLLERS:
                if name not in rec.costs:
                    writer.writerow([rec.run, name, "", "", "", ORACLE_SINGULAR_FLAG])
                    continue
                cost = rec.costs[name]
                steps = cost.steps
                j2 = repr(float(steps[1])) if steps.size > 1 else ""
                writer.writerow([
                    rec.run, name, repr(cost.total), repr(float(steps[0])), j2, "",
                ])
