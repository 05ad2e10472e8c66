"""Exception hierarchy shared by all modules."""


class HJMLevyError(Exception):
    """Base class for every error raised by this package."""


class MeasureError(HJMLevyError, ValueError):
    """A Lévy measure description is malformed or out of range."""


class IntegrabilityViolation(MeasureError):
    """One of the moment integrals required of the jump measure diverges."""

    def __init__(self, integral: str, detail: str = ""):
        self.integral = integral
        msg = f"integrability violated: {integral} diverges"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SupportViolation(MeasureError):
    """The support of the measure reaches below -1/lambda_high."""

    def __init__(self, support_low: float, floor: float):
        self.support_low = support_low
        self.floor = floor
        super().__init__(
            f"support violation: support_low={support_low!r} lies below "
            f"-1/lambda_high={floor!r}"
        )


class RhoBoundaryError(MeasureError):
    """The stability index sits exactly on an excluded boundary value."""


class NumericOverflow(HJMLevyError, ArithmeticError):
    """An exponential in an evaluation would overflow double precision."""


class EpsRequired(HJMLevyError, ValueError):
    """Infinite-activity measures need a positive small-jump cutoff."""


class JumpBelowFloor(HJMLevyError, ValueError):
    """A jump produced a non-positive factor 1 + lambda * dL."""


class MaxIterExceeded(HJMLevyError, RuntimeError):
    """The fixed-point iteration neither converged nor diverged in time."""

    def __init__(self, max_iter: int, last_sups: tuple[float, float]):
        self.max_iter = max_iter
        self.last_sups = last_sups
        super().__init__(
            f"no convergence after {max_iter} iterations; last sup values "
            f"{last_sups[0]!r}, {last_sups[1]!r}"
        )


class MonotonicityViolation(HJMLevyError, AssertionError):
    """The monotone iteration produced a non-monotone step."""


class DegenerateDenominator(HJMLevyError, ZeroDivisionError):
    """The closed-form double integral was evaluated at its singular corner."""


class ConfigError(HJMLevyError, ValueError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


class RegimeMismatch(HJMLevyError):
    """A study was requested for a configuration in the wrong regime."""
