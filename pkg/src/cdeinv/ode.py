"""Fixed-step integration of the interval flow dY = (g(Y) + f(Y) c) dt.

The sensitivity G = dF/dc is obtained by integrating the variational system
Z' = A(Y; c) Z + f(Y), Z(0) = 0 alongside Y with the same scheme, so G is
the exact derivative of the discrete flow map with respect to c.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import math

import numpy as np

from .errors import DomainViolation
from .fields import VectorFieldModel


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: Literal["euler", "rk4"] = "rk4"
    substeps: int = 50
    dense_output: bool = False

    def __post_init__(self):
        if self.scheme not in ("euler", "rk4"):
            raise ValueError(f"unknown scheme '{self.scheme}'")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError("substeps must be a positive integer")


@dataclass
class FlowResult:
    terminal_value: np.ndarray
    sensitivity: np.ndarray | None = None
    dense_output: list[tuple[float, np.ndarray]] | None = None


def _stage(field: VectorFieldModel, y, c, sens: bool):
    field.check(y)
    fy = field.diffusion(y)
    v = fy @ c
    if field.drift is not None:
        v = v + field.drift(y)
    if not sens:
        return v, fy, None
    a = field.gradient(y) @ c
    if field.drift_gradient is not None:
        a = a + field.drift_gradient(y)
    return v, fy, a


def _integrate_scalar(field, y0, c, delta, config: IntegratorConfig, sens: bool, t0: float):
    # same scheme as the array path, on Python floats (d = m = 1)
    sf = field.scalar
    f, df, g, dg, lower = sf.f, sf.df, sf.g, sf.dg, sf.lower
    y = float(np.asarray(y0, dtype=float).reshape(-1)[0])
    c = float(np.asarray(c, dtype=float).reshape(-1)[0])
    z = 0.0
    n = int(config.substeps)
    h = delta / n
    hh = 0.5 * h
    h6 = h / 6.0
    dense = [(t0, np.array([y]))] if config.dense_output else None
    rk4 = config.scheme == "rk4"
    isfinite = math.isfinite

    def fail(val, t):
        return DomainViolation(field.name, [val], time=t)

    i = 0
    try:
        for i in range(n):
            if not (y > lower and isfinite(y)):
                raise fail(y, t0 + i * h)
            f1 = f(y)
            k1 = f1 * c if g is None else g(y) + f1 * c
            if rk4:
                y2 = y + hh * k1
                if not (y2 > lower and isfinite(y2)):
                    raise fail(y2, t0 + i * h)
                f2 = f(y2)
                k2 = f2 * c if g is None else g(y2) + f2 * c
                y3 = y + hh * k2
                if not (y3 > lower and isfinite(y3)):
                    raise fail(y3, t0 + i * h)
                f3 = f(y3)
                k3 = f3 * c if g is None else g(y3) + f3 * c
                y4 = y + h * k3
                if not (y4 > lower and isfinite(y4)):
                    raise fail(y4, t0 + i * h)
                f4 = f(y4)
                k4 = f4 * c if g is None else g(y4) + f4 * c
                if sens:
                    if dg is None:
                        a1, a2, a3, a4 = df(y) * c, df(y2) * c, df(y3) * c, df(y4) * c
                    else:
                        a1 = df(y) * c + dg(y)
                        a2 = df(y2) * c + dg(y2)
                        a3 = df(y3) * c + dg(y3)
                        a4 = df(y4) * c + dg(y4)
                    m1 = a1 * z + f1
                    m2 = a2 * (z + hh * m1) + f2
                    m3 = a3 * (z + hh * m2) + f3
                    m4 = a4 * (z + h * m3) + f4
                    z = z + h6 * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
                y = y + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            else:
                if sens:
                    a1 = df(y) * c if dg is None else df(y) * c + dg(y)
                    z = z + h * (a1 * z + f1)
                y = y + h * k1
            if dense is not None:
                dense.append((t0 + (i + 1) * h, np.array([y])))
    except OverflowError:
        # power-law fields can blow up in finite time; report it as a domain exit
        raise fail(math.inf, t0 + i * h) from None
    if not (y > lower and isfinite(y)):
        raise fail(y, t0 + delta)
    return FlowResult(np.array([y]), np.array([[z]]) if sens else None, dense)


def _integrate(field, y0, c, delta, config: IntegratorConfig, sens: bool, t0: float = 0.0):
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if field.scalar is not None:
        return _integrate_scalar(field, y0, c, delta, config, sens, t0)
    return _integrate_array(field, y0, c, delta, config, sens, t0)


def _integrate_array(field, y0, c, delta, config: IntegratorConfig, sens: bool, t0: float = 0.0):
    y = np.array(y0, dtype=float).reshape(field.dim_state)
    c = np.asarray(c, dtype=float).reshape(field.dim_control)
    z = np.zeros((field.dim_state, field.dim_control)) if sens else None
    n = int(config.substeps)
    h = delta / n
    dense = [(t0, y.copy())] if config.dense_output else None
    rk4 = config.scheme == "rk4"
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            t = t0 + i * h
            try:
                if rk4:
                    k1, f1, a1 = _stage(field, y, c, sens)
                    y2 = y + (0.5 * h) * k1
                    k2, f2, a2 = _stage(field, y2, c, sens)
                    y3 = y + (0.5 * h) * k2
                    k3, f3, a3 = _stage(field, y3, c, sens)
                    y4 = y + h * k3
                    k4, f4, a4 = _stage(field, y4, c, sens)
                    if sens:
                        m1 = a1 @ z + f1
                        m2 = a2 @ (z + (0.5 * h) * m1) + f2
                        m3 = a3 @ (z + (0.5 * h) * m2) + f3
                        m4 = a4 @ (z + h * m3) + f4
                        z = z + (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
                    y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                else:
                    k1, f1, a1 = _stage(field, y, c, sens)
                    if sens:
                        z = z + h * (a1 @ z + f1)
                    y = y + h * k1
            except DomainViolation as exc:
                raise exc.at(time=t) from None
            if dense is not None:
                dense.append((t0 + (i + 1) * h, y.copy()))
    try:
        field.check(y)
    except DomainViolation as exc:
        raise exc.at(time=t0 + delta) from None
    return FlowResult(y, z, dense)


def flow(field: VectorFieldModel, y0, c, delta: float, config: IntegratorConfig = IntegratorConfig()) -> FlowResult:
    """Approximate F(delta; y0, c)."""
    return _integrate(field, y0, c, delta, config, sens=False)


def flow_with_sensitivity(
    field: VectorFieldModel, y0, c, delta: float, config: IntegratorConfig = IntegratorConfig()
) -> FlowResult:
    """Approximate F(delta; y0, c) and G(delta; y0, c) = dF/dc."""
    return _integrate(field, y0, c, delta, config, sens=True)


@dataclass
class Propagation:
    knots: np.ndarray
    dense_output: list[tuple[float, np.ndarray]] | None = None


def propagate(
    field: VectorFieldModel,
    y0,
    slopes: Sequence,
    delta: float,
    config: IntegratorConfig = IntegratorConfig(),
) -> Propagation:
    """Forward map on a piecewise-linear control: knot values Y_0..Y_N.

    Each interval starts from the terminal value of the previous one.
    """
    c = np.asarray(slopes, dtype=float).reshape(-1, field.dim_control)
    knots = np.empty((c.shape[0] + 1, field.dim_state))
    knots[0] = np.asarray(y0, dtype=float).reshape(field.dim_state)
    dense = [] if config.dense_output else None
    for k in range(c.shape[0]):
        try:
            res = _integrate(field, knots[k], c[k], delta, config, sens=False, t0=k * delta)
        except DomainViolation as exc:
            raise exc.at(interval=k + 1) from None
        knots[k + 1] = res.terminal_value
        if dense is not None:
            dense.extend(res.dense_output if k == 0 else res.dense_output[1:])
    return Propagation(knots, dense)
