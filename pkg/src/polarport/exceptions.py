"""Exception types shared across the solver stack."""

from __future__ import annotations


class ConfigurationError(ValueError):
    """A discretization or policy parameter is outside its legal range."""


class ExtrapolationError(ValueError):
    """Polynomial evaluation requested outside the grid interval.

    Values beyond the interval must come from the closed-form buy/sell
    extensions, never from the interpolant.
    """


class SolverFailure(RuntimeError):
    """A numerical step failed.  ``context`` carries (l, t, interval, ...)."""

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = dict(context)

    def __str__(self) -> str:
        base = super().__str__()
        if self.context:
            detail = ", ".join(f"{k}={v!r}" for k, v in sorted(self.context.items()))
            return f"{base} [{detail}]"
        return base


class FrontierDetectionError(SolverFailure):
    """No usable sign structure in an obstacle polynomial.

    Typically signals under-resolution: the empirical stability region for
    the spatial/temporal mesh has been left.
    """
