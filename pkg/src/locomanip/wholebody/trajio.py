"""Columnar trajectory files.

Plain CSV with a header row ``t,<name>,<name>,...`` and one row per node.
Floats are written with ``repr`` so a write/read cycle is lossless and output
is byte-stable. Solution exports append ``f_<contact>_{x,y,z}`` columns; the
last node has no input, so its force cells are ``nan``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class TrajectoryFormatError(ValueError):
    pass


@dataclass(eq=False)
class Trajectory:
    names: list[str]
    t: np.ndarray
    values: np.ndarray  # (rows, len(names))

    def __post_init__(self):
        self.names = list(self.names)
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.values = np.asarray(self.values, dtype=float).reshape(self.t.size, len(self.names))
        if len(set(self.names)) != len(self.names):
            raise TrajectoryFormatError("duplicate column names")

    def __len__(self):
        return self.t.size

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def select(self, names) -> np.ndarray:
        return np.stack([self.column(n) for n in names], axis=1)


def dumps_trajectory(traj: Trajectory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", *traj.names])
    for t, row in zip(traj.t, traj.values):
        writer.writerow([repr(float(t)), *(repr(float(v)) for v in row)])
    return buf.getvalue()


def loads_trajectory(text: str) -> Trajectory:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows or rows[0][0] != "t":
        raise TrajectoryFormatError("first header column must be 't'")
    names = rows[0][1:]
    data = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(names) + 1:
            raise TrajectoryFormatError(f"line {lineno}: expected {len(names) + 1} fields, got {len(r)}")
        try:
            data.append([float(x) for x in r])
        except ValueError as exc:
            raise TrajectoryFormatError(f"line {lineno}: {exc}") from exc
    arr = np.array(data, dtype=float).reshape(-1, len(names) + 1)
    return Trajectory(names, arr[:, 0], arr[:, 1:])


def read_trajectory(path: str | Path) -> Trajectory:
    return loads_trajectory(Path(path).read_text())


def write_trajectory(path: str | Path, traj: Trajectory) -> None:
    Path(path).write_text(dumps_trajectory(traj))


def solution_trajectory(problem, solution) -> Trajectory:
    """Positions of every coordinate plus contact-force columns."""
    N, dt = problem.N, problem.dt
    names = list(problem.coordinates)
    cols = [solution.X[:, : problem.n_q]]
    if problem.contacts:
        F = solution.U[:, problem.dynamics.force_slice]
        F = np.vstack([F, np.full((1, F.shape[1]), np.nan)])
        cols.append(F)
        for c in problem.contacts:
            names += [f"f_{c.leg}_{axis}" for axis in "xyz"]
    return Trajectory(names, np.arange(N + 1) * dt, np.hstack(cols))
