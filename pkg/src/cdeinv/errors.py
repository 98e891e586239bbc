"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CDEError(Exception):
    """Base class for all errors raised by cdeinv."""


class DomainViolation(CDEError, ValueError):
    """A state left the domain of a vector-field model.

    ``time`` is the time within the current interval at which the exit was
    detected and ``interval`` the 1-based interval index, when known.
    """

    def __init__(self, model: str, value, time: float | None = None, interval: int | None = None):
        self.model = model
        self.value = value
        self.time = time
        self.interval = interval
        super().__init__(self._message())

    def _message(self) -> str:
        msg = f"state {self.value!r} is outside the domain of model '{self.model}'"
        if self.interval is not None:
            msg += f" (interval {self.interval})"
        if self.time is not None:
            msg += f" at t={self.time:.6g}"
        return msg

    def at(self, *, time: float | None = None, interval: int | None = None) -> "DomainViolation":
        """Return a copy with location information filled in."""
        return DomainViolation(
            self.model,
            self.value,
            time=self.time if time is None else time,
            interval=self.interval if interval is None else interval,
        )


class SingularDiffusion(CDEError, ValueError):
    """f(y) is (numerically) not invertible at a point."""


class SingularJacobian(CDEError, ArithmeticError):
    """The Newton sensitivity matrix G is numerically singular."""

    def __init__(self, message: str, iteration: int):
        self.iteration = iteration
        super().__init__(f"{message} (iteration {iteration})")


class InfeasibleSpec(CDEError):
    """No admissible control could be simulated for an experiment."""
