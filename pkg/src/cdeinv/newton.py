"""Per-interval Newton-Raphson inversion.

Each interval k is solved on its own: find c with F(delta; Y_{k-1}, c) = Y_k,
starting from the observed Y_{k-1}. Errors of the individual solves add up
along the assembled path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import CDEError, SingularJacobian
from .fields import VectorFieldModel, check_observations
from .ode import IntegratorConfig, flow, flow_with_sensitivity
from .paths import ObservationGrid, PiecewiseLinearPath, from_slopes, sup_distance
from .trace import IterationTrace


@dataclass(frozen=True)
class NewtonConfig:
    max_iterations: int = 50
    residual_tolerance: float = 0.0
    # relative to 1 + |c|
    step_tolerance: float = 1e-12
    initial_slope_rule: Literal["zero", "inverse_ito_seed"] = "zero"
    damping: float = 1.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.residual_tolerance < 0 or self.step_tolerance < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.residual_tolerance == 0 and self.step_tolerance == 0:
            raise ValueError("at least one of residual_tolerance/step_tolerance must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.initial_slope_rule not in ("zero", "inverse_ito_seed"):
            raise ValueError(f"unknown initial_slope_rule '{self.initial_slope_rule}'")


@dataclass
class NewtonDiagnostics:
    residuals: list[float] = field(default_factory=list)
    slopes: list[np.ndarray] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    final_residual: float = float("nan")
    flag: str | None = None


def solve_interval(
    model: VectorFieldModel,
    y_start,
    y_target,
    delta: float,
    c_init,
    newton_cfg: NewtonConfig = NewtonConfig(),
    integ_cfg: IntegratorConfig = IntegratorConfig(),
) -> tuple[np.ndarray, NewtonDiagnostics]:
    """Solve F(delta; y_start, c) = y_target for c by damped Newton.

    ``diagnostics.slopes[n]`` holds the iterate after n updates
    (``slopes[0]`` is ``c_init``); ``residuals[n]`` the residual norm at it.
    Running out of iterations is reported in the diagnostics, not raised.
    """
    if model.dim_state != model.dim_control:
        raise ValueError("Newton inversion requires d == m")
    y_target = np.asarray(y_target, dtype=float).reshape(model.dim_state)
    c = np.array(c_init, dtype=float).reshape(model.dim_control)
    diag = NewtonDiagnostics(slopes=[c.copy()])
    try:
        for it in range(newton_cfg.max_iterations):
            res = flow_with_sensitivity(model, y_start, c, delta, integ_cfg)
            r = y_target - res.terminal_value
            rnorm = float(np.linalg.norm(r))
            diag.residuals.append(rnorm)
            if rnorm <= newton_cfg.residual_tolerance:
                diag.converged = True
                break
            g = res.sensitivity
            det = g[0, 0] if g.shape == (1, 1) else np.linalg.det(g)
            if not abs(det) >= model.det_threshold:
                raise SingularJacobian(f"sensitivity matrix is singular, |det G| = {abs(det):.3g}", it + 1)
            step = newton_cfg.damping * np.linalg.solve(g, r)
            c = c + step
            diag.slopes.append(c.copy())
            diag.iterations = it + 1
            if np.linalg.norm(step) <= newton_cfg.step_tolerance * (1.0 + np.linalg.norm(c)):
                diag.converged = True
                break
        if diag.converged and len(diag.residuals) > diag.iterations:
            diag.final_residual = diag.residuals[-1]
        else:
            end = flow(model, y_start, c, delta, integ_cfg).terminal_value
            diag.final_residual = float(np.linalg.norm(y_target - end))
    except CDEError as exc:
        exc.diagnostics = diag
        raise
    if not diag.converged:
        diag.flag = "not converged"
    return c, diag


def _seed_slope(model, y_start, y_target, delta, nodes: int = 64) -> np.ndarray:
    # inverse-Ito slope along the chord, as in the signature initialisation
    from .signature import segment_inverse_ito

    return segment_inverse_ito(model, y_start, y_target, delta, nodes)


def reconstruct(
    model: VectorFieldModel,
    obs: ObservationGrid,
    n_sweeps: int,
    newton_cfg: NewtonConfig = NewtonConfig(),
    integ_cfg: IntegratorConfig = IntegratorConfig(),
    order=None,
    true_path: PiecewiseLinearPath | None = None,
) -> IterationTrace:
    """Run up to n_sweeps Newton iterations on every interval independently.

    The trace records the slope vector after every sweep n = 0..n_sweeps.
    Intervals whose solve fails keep their last valid iterate and are
    flagged. ``order`` permutes the processing order (results do not depend
    on it). Observations outside the model domain raise DomainViolation.
    """
    check_observations(model, obs.values, obs.delta)
    cfg = NewtonConfig(
        max_iterations=n_sweeps,
        residual_tolerance=newton_cfg.residual_tolerance,
        step_tolerance=newton_cfg.step_tolerance,
        initial_slope_rule=newton_cfg.initial_slope_rule,
        damping=newton_cfg.damping,
    )
    n, m = obs.n_intervals, model.dim_control
    history = np.empty((n_sweeps + 1, n, m))
    final_residuals = np.full(n, np.nan)
    iterations = np.zeros(n, dtype=int)
    trace = IterationTrace("newton", obs.delta)
    y = obs.values
    for k in (range(n) if order is None else order):
        if cfg.initial_slope_rule == "zero":
            c0 = np.zeros(m)
        else:
            try:
                c0 = _seed_slope(model, y[k], y[k + 1], obs.delta)
            except CDEError:
                c0 = np.zeros(m)
        try:
            c, diag = solve_interval(model, y[k], y[k + 1], obs.delta, c0, cfg, integ_cfg)
            seq = diag.slopes
            final_residuals[k] = diag.final_residual
            if diag.flag:
                trace.flags[k + 1] = diag.flag
        except SingularJacobian as exc:
            seq = exc.diagnostics.slopes
            trace.flags[k + 1] = str(exc)
        except CDEError as exc:
            seq = getattr(exc, "diagnostics", NewtonDiagnostics(slopes=[c0])).slopes
            trace.flags[k + 1] = f"target unreachable: {exc}"
        iterations[k] = len(seq) - 1
        for j in range(n_sweeps + 1):
            history[j, k] = seq[min(j, len(seq) - 1)]
    for j in range(n_sweeps + 1):
        trace.record(j, history[j])
    if true_path is not None:
        trace.error_history = [sup_distance(true_path, from_slopes(0.0, obs.delta, c)) for c in history]
    trace.converged = not trace.flags
    trace.diagnostics = {"final_residuals": final_residuals, "iterations": iterations}
    return trace
