"""Piecewise-linear paths and observation grids."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


def _as_points(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a sequence of points, got shape {arr.shape}")
    return arr


def pointwise_norm(diff: np.ndarray) -> np.ndarray:
    """Euclidean norm of each row, without underflow for tiny entries."""
    diff = np.abs(np.asarray(diff, dtype=float))
    if diff.shape[1] == 1:
        return diff[:, 0]
    scale = diff.max(axis=1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    return scale[:, 0] * np.sqrt(np.sum((diff / safe) ** 2, axis=1))


def knot_grid(delta: float, n_intervals: int) -> np.ndarray:
    """Knot times k*delta, k=0..N, computed once by multiplication."""
    return np.arange(n_intervals + 1, dtype=float) * delta


@dataclass(frozen=True, eq=False)
class PiecewiseLinearPath:
    """A continuous path that is linear between consecutive knots.

    ``knot_values`` has shape (n_knots, m). When the path was built by
    :func:`from_slopes` the generating slopes are kept so that
    :func:`slopes` returns them unchanged.
    """

    knot_times: np.ndarray
    knot_values: np.ndarray
    _slopes: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        times = np.asarray(self.knot_times, dtype=float)
        values = _as_points(self.knot_values, "knot_values")
        if times.ndim != 1 or times.size < 1:
            raise ValueError("knot_times must be a nonempty 1-d sequence")
        if times[0] != 0.0:
            raise ValueError(f"first knot time must be 0, got {times[0]}")
        if np.any(np.diff(times) <= 0):
            raise ValueError("knot_times must be strictly increasing")
        if values.shape[0] != times.size:
            raise ValueError(
                f"{values.shape[0]} knot values for {times.size} knot times"
            )
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(times)):
            raise ValueError("path knots must be finite")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "knot_times", times)
        object.__setattr__(self, "knot_values", values)

    @property
    def dimension(self) -> int:
        return self.knot_values.shape[1]

    @property
    def final_time(self) -> float:
        return float(self.knot_times[-1])

    @property
    def n_intervals(self) -> int:
        return self.knot_times.size - 1

    def __call__(self, t):
        return evaluate(self, t)


@dataclass(frozen=True, eq=False)
class ObservationGrid:
    """Observed response values Y_{k delta}, k=0..N, on a homogeneous grid."""

    delta: float
    values: np.ndarray

    def __post_init__(self):
        values = _as_points(self.values, "values")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if values.shape[0] < 2:
            raise ValueError("need at least two observations (N >= 1)")
        if not np.all(np.isfinite(values)):
            raise ValueError("observations must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "values", values)

    @property
    def n_intervals(self) -> int:
        return self.values.shape[0] - 1

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def final_time(self) -> float:
        return self.n_intervals * self.delta

    @property
    def times(self) -> np.ndarray:
        return knot_grid(self.delta, self.n_intervals)

    @property
    def initial_value(self) -> np.ndarray:
        return self.values[0]


def from_slopes(start, delta: float, slopes) -> PiecewiseLinearPath:
    """Build the path start + delta * cumsum(slopes) on the grid k*delta."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    c = _as_points(slopes, "slopes")
    if c.shape[0] == 0:
        raise ValueError("slopes must be nonempty")
    if not np.all(np.isfinite(c)):
        raise ValueError("slopes must be finite")
    x0 = np.broadcast_to(np.asarray(start, dtype=float), (c.shape[1],))
    values = np.empty((c.shape[0] + 1, c.shape[1]))
    values[0] = x0
    values[1:] = x0 + delta * np.cumsum(c, axis=0)
    return PiecewiseLinearPath(knot_grid(delta, c.shape[0]), values, _slopes=c.copy())


def evaluate(path: PiecewiseLinearPath, t):
    """Linear interpolation of the knot values at time(s) t.

    Scalar t gives an (m,) array; an array of times gives (len(t), m).
    """
    times = path.knot_times
    tt = np.asarray(t, dtype=float)
    scalar = tt.ndim == 0
    tt = np.atleast_1d(tt)
    if np.any(tt < 0.0) or np.any(tt > times[-1]) or np.any(np.isnan(tt)):
        raise ValueError(f"t outside path domain [0, {times[-1]}]")
    if times.size == 1:
        out = np.repeat(path.knot_values, tt.size, axis=0)
        return out[0] if scalar else out
    idx = np.clip(np.searchsorted(times, tt, side="right") - 1, 0, times.size - 2)
    t0 = times[idx]
    w = ((tt - t0) / (times[idx + 1] - t0))[:, None]
    v = path.knot_values
    out = (1.0 - w) * v[idx] + w * v[idx + 1]
    return out[0] if scalar else out


def interpolate_observations(obs: ObservationGrid) -> PiecewiseLinearPath:
    """The piecewise-linear path through the observations."""
    return PiecewiseLinearPath(obs.times, obs.values)


def grid_step(path: PiecewiseLinearPath, rtol: float = 1e-12) -> float:
    """Common knot spacing; raises if the knots are not equally spaced."""
    if path.n_intervals < 1:
        raise ValueError("path needs at least two knots")
    # grids built by knot_grid have t_1 == delta exactly; prefer it so that a
    # grid read back from disk regenerates bitwise-identical knot times
    delta = float(path.knot_times[1])
    if not np.array_equal(path.knot_times, knot_grid(delta, path.n_intervals)):
        delta = path.final_time / path.n_intervals
    expected = knot_grid(delta, path.n_intervals)
    if not np.allclose(path.knot_times, expected, rtol=0.0, atol=rtol * path.final_time):
        raise ValueError("knots are not equally spaced")
    return delta


def slopes(path: PiecewiseLinearPath) -> np.ndarray:
    """Per-interval slopes c_k = (x_k - x_{k-1}) / delta, shape (N, m)."""
    delta = grid_step(path)
    if path._slopes is not None:
        return path._slopes.copy()
    return np.diff(path.knot_values, axis=0) / delta


def sup_distance(a: PiecewiseLinearPath, b: PiecewiseLinearPath) -> float:
    """Exact L-infinity distance between two piecewise-linear paths.

    The difference is linear between consecutive points of the union of
    both knot sets, so the maximum is attained at one of them.
    """
    if a.dimension != b.dimension:
        raise ValueError("paths have different dimensions")
    if a.final_time != b.final_time:
        raise ValueError("paths have different final times")
    if a.knot_times.size == b.knot_times.size and np.array_equal(a.knot_times, b.knot_times):
        diff = a.knot_values - b.knot_values
    else:
        t = np.union1d(a.knot_times, b.knot_times)
        diff = evaluate(a, t) - evaluate(b, t)
    return float(np.max(pointwise_norm(diff)))


def slopes_from_angles(u, clip: float | None = None) -> np.ndarray:
    """Slopes tan(u) for angles in (-pi/2, pi/2), optionally clipped."""
    c = np.tan(np.asarray(u, dtype=float))
    if clip is not None:
        c = np.clip(c, -clip, clip)
    return c


def generate_random_control(
    delta: float,
    n_intervals: int,
    seed: int,
    clip: float | None = None,
    dimension: int = 1,
) -> PiecewiseLinearPath:
    """Random control starting at 0 with slopes tan(U), U ~ Uniform(-pi/2, pi/2).

    Angles are drawn sequentially from one generator, so a longer control
    with the same seed extends a shorter one.
    """
    if n_intervals < 1:
        raise ValueError("n_intervals must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.random((n_intervals, dimension))
    # the open interval excludes tan(-pi/2)
    while np.any(v == 0.0):
        v[v == 0.0] = rng.random(int(np.sum(v == 0.0)))
    u = np.pi * (v - 0.5)
    return from_slopes(np.zeros(dimension), delta, slopes_from_angles(u, clip))


def write_path_csv(path: PiecewiseLinearPath, dest, prefix: str = "x") -> None:
    """Write knots as ``t,x1,...,xm`` rows with round-trip precision."""
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"{prefix}{i + 1}" for i in range(path.dimension)])
        for t, v in zip(path.knot_times, path.knot_values):
            w.writerow([f"{t:.17g}"] + [f"{x:.17g}" for x in v])


def read_path_csv(src) -> PiecewiseLinearPath:
    data = np.loadtxt(Path(src), delimiter=",", skiprows=1, ndmin=2)
    return PiecewiseLinearPath(data[:, 0], data[:, 1:])


def write_observations_csv(obs: ObservationGrid, dest) -> None:
    write_path_csv(interpolate_observations(obs), dest, prefix="y")


def read_observations_csv(src) -> ObservationGrid:
    path = read_path_csv(src)
    return ObservationGrid(grid_step(path), path.knot_values)
