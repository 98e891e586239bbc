"""Iteration histories produced by the inverters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .paths import PiecewiseLinearPath, from_slopes


@dataclass
class IterationTrace:
    """Slope vectors recorded over the iterations of one inverter run.

    ``iterations[i]`` is the iteration count after which
    ``slope_history[i]`` (shape (N, m)) was recorded; iteration 0 is the
    initial guess. Once a run stops early its last slopes stand for every
    later iteration.
    """

    method_tag: Literal["newton", "signature"]
    delta: float
    iterations: list[int] = field(default_factory=list)
    slope_history: list[np.ndarray] = field(default_factory=list)
    error_history: list[float] | None = None
    flags: dict[int, str] = field(default_factory=dict)
    converged: bool = False
    failure: str | None = None
    diagnostics: dict = field(default_factory=dict)

    def record(self, n: int, slopes: np.ndarray) -> None:
        if self.slope_history and slopes.shape != self.slope_history[0].shape:
            raise ValueError("recorded slope vectors must all have length N")
        self.iterations.append(int(n))
        self.slope_history.append(np.array(slopes, dtype=float))

    @property
    def n_intervals(self) -> int:
        return self.slope_history[0].shape[0]

    @property
    def last_iteration(self) -> int:
        return self.iterations[-1]

    @property
    def final_slopes(self) -> np.ndarray:
        return self.slope_history[-1]

    def slopes_at(self, n: int) -> np.ndarray:
        """Slopes after iteration n (the latest record at or before n)."""
        i = int(np.searchsorted(self.iterations, n, side="right")) - 1
        if i < 0:
            raise ValueError(f"no record at or before iteration {n}")
        return self.slope_history[i]

    def path_at(self, n: int, start=0.0) -> PiecewiseLinearPath:
        return from_slopes(start, self.delta, self.slopes_at(n))
