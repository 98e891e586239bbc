"""Vector-field models f: R^d -> L(R^m, R^d) with an optional known drift.

Model callables are batch-friendly: ``diffusion`` maps an array of shape
(..., d) to (..., d, m), ``gradient`` to (..., d, d, m) with
``gradient(y)[i, j, l] = d f_{il} / d y_j``, ``drift`` to (..., d) and
``drift_gradient`` to (..., d, d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DomainViolation, SingularDiffusion

DEFAULT_FLOOR = 1e-12
DEFAULT_DET_THRESHOLD = 1e-12

ArrayMap = Callable[[np.ndarray], np.ndarray]


class ScalarField(NamedTuple):
    """Plain-float versions of a d = m = 1 model, used by the fast integrator.

    The domain is ``y > lower``; ``g``/``dg`` may be None (no drift).
    """

    f: Callable[[float], float]
    df: Callable[[float], float]
    g: Callable[[float], float] | None
    dg: Callable[[float], float] | None
    lower: float


@dataclass(frozen=True)
class VectorFieldModel:
    name: str
    dim_state: int
    dim_control: int
    diffusion: ArrayMap
    gradient: ArrayMap
    drift: ArrayMap | None = None
    drift_gradient: ArrayMap | None = None
    domain: Callable[[np.ndarray], bool] = lambda y: True
    params: dict = field(default_factory=dict)
    det_threshold: float = DEFAULT_DET_THRESHOLD
    scalar: ScalarField | None = field(default=None, repr=False, compare=False)

    def check(self, y: np.ndarray) -> None:
        """Raise DomainViolation unless every point of y is finite and in the domain."""
        if not (np.all(np.isfinite(y)) and self.domain(y)):
            raise DomainViolation(self.name, np.asarray(y).tolist())

    def spec(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}


def apply(field: VectorFieldModel, y, c) -> np.ndarray:
    """Velocity g(y) + f(y) c of the interval flow."""
    y = np.asarray(y, dtype=float)
    field.check(y)
    v = field.diffusion(y) @ np.asarray(c, dtype=float)
    if field.drift is not None:
        v = v + field.drift(y)
    return v


def coefficient_matrix(field: VectorFieldModel, y, c) -> np.ndarray:
    """A(y; c) = (grad_y f(y)) c + grad_y g(y), the Jacobian of apply in y."""
    y = np.asarray(y, dtype=float)
    field.check(y)
    a = field.gradient(y) @ np.asarray(c, dtype=float)
    if field.drift_gradient is not None:
        a = a + field.drift_gradient(y)
    return a


def check_observations(field: VectorFieldModel, values, delta: float) -> None:
    """Reject observed knot values outside the model domain.

    A value at knot k > 0 is reported as the end of interval k, the initial
    value as the start of interval 1.
    """
    values = np.asarray(values, dtype=float)
    for k, y in enumerate(values):
        try:
            field.check(y)
        except DomainViolation as exc:
            raise exc.at(time=delta if k else 0.0, interval=max(k, 1)) from None


def inverse_diffusion(field: VectorFieldModel, y) -> np.ndarray:
    """f(y)^{-1}, shape (..., m, d). Requires d == m."""
    if field.dim_state != field.dim_control:
        raise ValueError("inverse_diffusion needs a square diffusion (d == m)")
    y = np.asarray(y, dtype=float)
    field.check(y)
    f = field.diffusion(y)
    if field.dim_state == 1:
        det = f[..., 0, 0]
    else:
        det = np.linalg.det(f)
    bad = np.abs(det) < field.det_threshold
    if np.any(bad):
        where = y[bad][0] if y.ndim > 1 else y
        count = int(np.count_nonzero(bad))
        more = f" and {count - 1} other point(s)" if count > 1 else ""
        raise SingularDiffusion(
            f"diffusion of model '{field.name}' is singular at y={where.tolist()}{more} "
            f"(|det f| < {field.det_threshold:g})"
        )
    if field.dim_state == 1:
        return 1.0 / f
    return np.linalg.inv(f)


@dataclass
class ProbeResult:
    y: np.ndarray
    in_domain: bool
    rank: int
    condition: float

    @property
    def ok(self) -> bool:
        return self.in_domain and np.isfinite(self.condition)


@dataclass
class ValidationReport:
    model: str
    dim_state: int
    probes: list[ProbeResult]

    @property
    def passed(self) -> bool:
        return all(p.in_domain and p.rank == self.dim_state for p in self.probes)

    @property
    def failures(self) -> list[ProbeResult]:
        return [p for p in self.probes if not (p.in_domain and p.rank == self.dim_state)]


def validate(field: VectorFieldModel, probe_points: Sequence) -> ValidationReport:
    """Check domain membership and full rank of f(y) at each probe point."""
    probes = []
    for y in probe_points:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        in_domain = bool(np.all(np.isfinite(y)) and field.domain(y))
        try:
            with np.errstate(all="ignore"):
                f = np.atleast_2d(field.diffusion(y))
            finite = bool(np.all(np.isfinite(f)))
        except (ValueError, FloatingPointError, ZeroDivisionError):
            f, finite = None, False
        if not finite:
            probes.append(ProbeResult(y, in_domain, 0, np.inf))
            continue
        s = np.linalg.svd(f, compute_uv=False)
        rank = int(np.sum(s > field.det_threshold))
        cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
        probes.append(ProbeResult(y, in_domain, rank, cond))
    return ValidationReport(field.name, field.dim_state, probes)


def _positive_domain(floor: float):
    def domain(y):
        return bool(np.all(np.asarray(y) > floor))

    return domain


def make_cir(a: float, b: float, sigma: float, floor: float = DEFAULT_FLOOR) -> VectorFieldModel:
    """dY = a (b - Y) dt + sigma sqrt(Y) dX on Y > floor."""

    def diffusion(y):
        return (sigma * np.sqrt(y))[..., None]

    def gradient(y):
        return (0.5 * sigma / np.sqrt(y))[..., None, None]

    def drift(y):
        return a * (b - y)

    def drift_gradient(y):
        return np.full(y.shape + (1,), -a)

    scalar = ScalarField(
        lambda y: sigma * math.sqrt(y),
        lambda y: 0.5 * sigma / math.sqrt(y),
        lambda y: a * (b - y),
        lambda y: -a,
        floor,
    )
    return VectorFieldModel(
        "cir", 1, 1, diffusion, gradient, drift, drift_gradient,
        _positive_domain(floor), {"a": a, "b": b, "sigma": sigma, "floor": floor},
        scalar=scalar,
    )


def make_cev(mu: float, sigma: float, gamma: float, floor: float = DEFAULT_FLOOR) -> VectorFieldModel:
    """dY = mu Y dt + sigma Y^gamma dX on Y > floor."""

    def diffusion(y):
        return (sigma * y**gamma)[..., None]

    def gradient(y):
        return (sigma * gamma * y ** (gamma - 1.0))[..., None, None]

    def drift(y):
        return mu * y

    def drift_gradient(y):
        return np.full(y.shape + (1,), mu)

    scalar = ScalarField(
        lambda y: sigma * y**gamma,
        lambda y: sigma * gamma * y ** (gamma - 1.0),
        lambda y: mu * y,
        lambda y: mu,
        floor,
    )
    return VectorFieldModel(
        "cev", 1, 1, diffusion, gradient, drift, drift_gradient,
        _positive_domain(floor), {"mu": mu, "sigma": sigma, "gamma": gamma, "floor": floor},
        scalar=scalar,
    )


def make_geometric() -> VectorFieldModel:
    """f(y) = y, no drift; flows are y exp(c t)."""

    def diffusion(y):
        return y[..., None]

    def gradient(y):
        return np.ones(y.shape + (1, 1))

    scalar = ScalarField(lambda y: y, lambda y: 1.0, None, None, 0.0)
    return VectorFieldModel(
        "geometric", 1, 1, diffusion, gradient, domain=_positive_domain(0.0), scalar=scalar
    )


def make_constant(matrix) -> VectorFieldModel:
    """f(y) = const, no drift."""
    mat = np.atleast_2d(np.asarray(matrix, dtype=float))
    d, m = mat.shape
    mat.setflags(write=False)

    def diffusion(y):
        return np.broadcast_to(mat, y.shape[:-1] + (d, m))

    def gradient(y):
        return np.zeros(y.shape[:-1] + (d, d, m))

    scalar = None
    if d == m == 1:
        f0 = float(mat[0, 0])
        scalar = ScalarField(lambda y: f0, lambda y: 0.0, None, None, -math.inf)
    return VectorFieldModel(
        "constant", d, m, diffusion, gradient, params={"matrix": mat.tolist()}, scalar=scalar
    )


_BUILDERS = {
    "cir": make_cir,
    "cev": make_cev,
    "geometric": make_geometric,
    "constant": make_constant,
}


def make_model(name: str, params: dict | None = None) -> VectorFieldModel:
    """Build a builtin model from its config name and parameter map."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown model '{name}', expected one of {sorted(_BUILDERS)}") from None
    return builder(**(params or {}))
