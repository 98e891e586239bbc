"""Signature-iteration inversion in its path form.

Starting from the inverse-Ito slopes of the interpolated observations, each
iteration propagates the current piecewise-linear control, measures the
mismatch Y_k - Ytilde_k at every knot, converts it to a slope correction r_k
through the inverse Ito map along the straight segment joining the two
points, and updates c_k <- c_k + r_k - r_{k-1}. The control's knot k thus
moves by exactly delta * r_k, so knot errors do not accumulate along the
path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CDEError, DomainViolation
from .fields import VectorFieldModel, check_observations, inverse_diffusion
from .ode import IntegratorConfig, propagate
from .paths import ObservationGrid, PiecewiseLinearPath, from_slopes, sup_distance
from .trace import IterationTrace


@dataclass(frozen=True)
class SignatureConfig:
    quadrature_nodes: int = 64
    max_iterations: int = 300
    slope_change_tolerance: float = 1e-10
    record_every: int = 1
    correction_damping: float = 1.0

    def __post_init__(self):
        if self.quadrature_nodes < 2:
            raise ValueError("quadrature_nodes must be >= 2")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.slope_change_tolerance < 0:
            raise ValueError("slope_change_tolerance must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not 0 < self.correction_damping <= 1:
            raise ValueError("correction_damping must lie in (0, 1]")


def _locate(exc: CDEError, what: str, k: int) -> CDEError:
    if isinstance(exc, DomainViolation):
        return exc.at(interval=k)
    return type(exc)(f"{what} {k}: {exc}")


def trapezoid_weights(nodes: int) -> np.ndarray:
    """Composite trapezoid weights on an equispaced grid of [0, 1]."""
    w = np.full(nodes, 1.0 / (nodes - 1))
    w[0] = w[-1] = 0.5 / (nodes - 1)
    return w


def _segment(model: VectorFieldModel, a, b, nodes: int):
    a = np.asarray(a, dtype=float).reshape(model.dim_state)
    b = np.asarray(b, dtype=float).reshape(model.dim_state)
    s = np.linspace(0.0, 1.0, nodes)
    pts = a + s[:, None] * (b - a)
    pts[-1] = b
    return a, b, pts


def segment_average_inverse(model: VectorFieldModel, a, b, nodes: int) -> np.ndarray:
    """Trapezoid approximation of int_0^1 f(a + s (b - a))^{-1} ds, shape (m, d)."""
    _, _, pts = _segment(model, a, b, nodes)
    return np.tensordot(trapezoid_weights(nodes), inverse_diffusion(model, pts), axes=1)


def segment_inverse_ito(model: VectorFieldModel, a, b, delta: float, nodes: int) -> np.ndarray:
    """Slope of the inverse Ito map along the straight response a -> b over time delta.

    Equals (1/delta) int f^{-1} (dY - g(Y) dt) with Y moving linearly from a
    to b, i.e. int_0^1 f(l(s))^{-1} [(b - a)/delta - g(l(s))] ds.
    """
    a, b, pts = _segment(model, a, b, nodes)
    finv = inverse_diffusion(model, pts)
    w = trapezoid_weights(nodes)
    out = np.tensordot(w, finv, axes=1) @ ((b - a) / delta)
    if model.drift is not None:
        out = out - np.tensordot(w, np.einsum("qmd,qd->qm", finv, model.drift(pts)), axes=1)
    return out


def initialize_slopes(model: VectorFieldModel, obs: ObservationGrid, quadrature_nodes: int = 64) -> np.ndarray:
    """Inverse-Ito slopes of the linear interpolation of the observations, shape (N, m)."""
    if model.dim_state != model.dim_control:
        raise ValueError("signature inversion requires d == m")
    y = obs.values
    out = np.empty((obs.n_intervals, model.dim_control))
    for k in range(obs.n_intervals):
        try:
            out[k] = segment_inverse_ito(model, y[k], y[k + 1], obs.delta, quadrature_nodes)
        except CDEError as exc:
            raise _locate(exc, "initialisation failed on interval", k + 1) from exc
    return out


def tree_correction(model: VectorFieldModel, y_tilde, y_obs, delta: float, quadrature_nodes: int = 64) -> np.ndarray:
    """r = Mbar (y_obs - y_tilde) / delta with Mbar the segment average of f^{-1}.

    The connecting segment is inserted without consuming time, so no drift
    is removed here.
    """
    y_tilde = np.asarray(y_tilde, dtype=float).reshape(model.dim_state)
    y_obs = np.asarray(y_obs, dtype=float).reshape(model.dim_state)
    if np.array_equal(y_tilde, y_obs):
        return np.zeros(model.dim_control)
    mbar = segment_average_inverse(model, y_tilde, y_obs, quadrature_nodes)
    return mbar @ ((y_obs - y_tilde) / delta)


@dataclass
class IterationStep:
    slopes: np.ndarray
    knots: np.ndarray
    corrections: np.ndarray


def iterate(
    model: VectorFieldModel,
    obs: ObservationGrid,
    current_slopes,
    sig_cfg: SignatureConfig = SignatureConfig(),
    integ_cfg: IntegratorConfig = IntegratorConfig(),
) -> IterationStep:
    """One update c(n) -> c(n+1); also returns the propagated knots and r."""
    c = np.asarray(current_slopes, dtype=float).reshape(obs.n_intervals, model.dim_control)
    knots = propagate(model, obs.initial_value, c, obs.delta, integ_cfg).knots
    r = np.zeros_like(c)
    for k in range(1, obs.n_intervals + 1):
        try:
            r[k - 1] = tree_correction(model, knots[k], obs.values[k], obs.delta, sig_cfg.quadrature_nodes)
        except CDEError as exc:
            raise _locate(exc, "tree correction failed at knot", k) from exc
    if sig_cfg.correction_damping != 1.0:
        r = sig_cfg.correction_damping * r
    r_prev = np.zeros_like(r)
    r_prev[1:] = r[:-1]
    return IterationStep(c + (r - r_prev), knots, r)


def reconstruct(
    model: VectorFieldModel,
    obs: ObservationGrid,
    sig_cfg: SignatureConfig = SignatureConfig(),
    integ_cfg: IntegratorConfig = IntegratorConfig(),
    true_path: PiecewiseLinearPath | None = None,
) -> IterationTrace:
    """Run the signature iteration until the slope change drops below tolerance.

    Failures (domain exits, singular diffusion) end the run early; the trace
    keeps everything computed so far and records the failure. Observations
    outside the model domain raise DomainViolation before any iteration.
    """
    check_observations(model, obs.values, obs.delta)
    trace = IterationTrace("signature", obs.delta)
    if true_path is not None:
        trace.error_history = []
    mismatch = []

    def _record(n, c):
        trace.record(n, c)
        if true_path is not None:
            trace.error_history.append(sup_distance(true_path, from_slopes(0.0, obs.delta, c)))

    c = initialize_slopes(model, obs, sig_cfg.quadrature_nodes)
    _record(0, c)
    n = 0
    try:
        while n < sig_cfg.max_iterations:
            step = iterate(model, obs, c, sig_cfg, integ_cfg)
            mismatch.append(float(np.max(np.abs(step.knots - obs.values))))
            change = float(np.max(np.abs(step.slopes - c))) * obs.delta
            c = step.slopes
            n += 1
            done = change < sig_cfg.slope_change_tolerance
            if done or n % sig_cfg.record_every == 0 or n == sig_cfg.max_iterations:
                _record(n, c)
            if done:
                trace.converged = True
                break
    except CDEError as exc:
        trace.failure = str(exc)
        trace.flags[0] = str(exc)
        if trace.last_iteration != n:
            _record(n, c)
    if not trace.converged and trace.failure is None:
        trace.flags[0] = f"not converged after {n} iterations"
    trace.diagnostics = {"knot_mismatch": mismatch, "iterations": n}
    return trace
