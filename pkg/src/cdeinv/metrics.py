"""Error functionals comparing a reconstructed control with the true one."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .paths import PiecewiseLinearPath, pointwise_norm, slopes


@dataclass
class ErrorReport:
    sup_error: float
    knot_times: np.ndarray
    knot_errors: np.ndarray
    per_interval_slope_errors: np.ndarray
    argmax_time: float

    def summary(self) -> dict:
        return {
            "sup_error": self.sup_error,
            "argmax_time": self.argmax_time,
            "uniformity_ratio": uniformity_ratio(self),
        }


def path_error(true_path: PiecewiseLinearPath, approx_path: PiecewiseLinearPath) -> ErrorReport:
    """Knot-wise and supremum distance between two paths on the same grid.

    The difference of two piecewise-linear paths on one grid is linear on
    each interval, so its supremum is the largest knot error.
    """
    if true_path.knot_times.shape != approx_path.knot_times.shape or not np.array_equal(
        true_path.knot_times, approx_path.knot_times
    ):
        raise ValueError("paths are not defined on the same grid")
    if true_path.dimension != approx_path.dimension:
        raise ValueError("paths have different dimensions")
    knot_errors = pointwise_norm(true_path.knot_values - approx_path.knot_values)
    i = int(np.argmax(knot_errors))
    try:
        slope_err = pointwise_norm(slopes(true_path) - slopes(approx_path))
    except ValueError:
        slope_err = pointwise_norm(
            np.diff(true_path.knot_values - approx_path.knot_values, axis=0)
        ) / np.diff(true_path.knot_times)
    return ErrorReport(
        sup_error=float(knot_errors[i]),
        knot_times=true_path.knot_times.copy(),
        knot_errors=knot_errors,
        per_interval_slope_errors=slope_err,
        argmax_time=float(true_path.knot_times[i]),
    )


def slope_error(true_slopes, approx_slopes, delta: float) -> float:
    """max_k |sum_{j<=k} (c_j - c'_j)| * delta."""
    a = np.asarray(true_slopes, dtype=float)
    b = np.asarray(approx_slopes, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"slope vectors differ in shape: {a.shape} vs {b.shape}")
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    cum = delta * np.cumsum(a - b, axis=0)
    return float(np.max(pointwise_norm(cum)))


def uniformity_ratio(report: ErrorReport) -> float:
    """Largest knot error on (T/2, T] over the largest on [0, T/2].

    Close to 1 when the error is spread evenly in time, about 2 or more when
    it accumulates.
    """
    e = np.asarray(report.knot_errors)
    if e.size == 0:
        raise ValueError("empty error report")
    t = np.asarray(report.knot_times)
    half = 0.5 * t[-1]
    first = float(np.max(e[t <= half]))
    second = float(np.max(e[t > half])) if np.any(t > half) else 0.0
    if first == 0.0:
        return 1.0 if second == 0.0 else math.inf
    return second / first


def write_error_curve_csv(report: ErrorReport, dest) -> None:
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "knot_error"])
        for k, (t, e) in enumerate(zip(report.knot_times, report.knot_errors)):
            w.writerow([k, f"{t:.17g}", f"{e:.17g}"])


def read_error_curve_csv(src) -> ErrorReport:
    data = np.loadtxt(src, delimiter=",", skiprows=1, ndmin=2)
    t, e = data[:, 1], data[:, 2]
    i = int(np.argmax(e))
    return ErrorReport(float(e[i]), t, e, np.full(max(t.size - 1, 0), np.nan), float(t[i]))


def summary_json(report: ErrorReport) -> str:
    return json.dumps(report.summary(), indent=2)
