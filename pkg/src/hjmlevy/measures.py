"""Catalog of jump intensity measures and volatility bounds.

Every measure used by the package is one of a handful of parametric
families.  The stable-type families have density ``|y|**(-1 - rho)`` on a
kind-specific support; the finite-activity families are an exponential
density ``c * exp(-theta * y)`` on ``(0, inf)`` and a nonnegative
piecewise-linear density given by a table of knots.

A measure is only meaningful together with the volatility upper bound
``lambda_high``: jumps below ``-1 / lambda_high`` would make forward rates
negative.  :func:`validate` performs that pairing check and attaches the
basic moment integrals to the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

from .errors import (
    IntegrabilityViolation,
    MeasureError,
    RhoBoundaryError,
    SupportViolation,
)


class MeasureKind(str, Enum):
    TRUNCATED_STABLE_POSITIVE = "truncated_stable_positive"
    TRUNCATED_STABLE_SYMMETRIC = "truncated_stable_symmetric"
    TRUNCATED_STABLE_NEGATIVE = "truncated_stable_negative"
    FULL_STABLE_POSITIVE = "full_stable_positive"
    FULL_STABLE_TWO_SIDED = "full_stable_two_sided"
    FINITE_ACTIVITY_TABULATED = "finite_activity_tabulated"
    EXPONENTIAL_JUMPS = "exponential_jumps"


STABLE_KINDS = frozenset(
    {
        MeasureKind.TRUNCATED_STABLE_POSITIVE,
        MeasureKind.TRUNCATED_STABLE_SYMMETRIC,
        MeasureKind.TRUNCATED_STABLE_NEGATIVE,
        MeasureKind.FULL_STABLE_POSITIVE,
        MeasureKind.FULL_STABLE_TWO_SIDED,
    }
)

FULL_STABLE_KINDS = frozenset(
    {MeasureKind.FULL_STABLE_POSITIVE, MeasureKind.FULL_STABLE_TWO_SIDED}
)

_STABLE_SUPPORT = {
    MeasureKind.TRUNCATED_STABLE_POSITIVE: (0.0, 1.0),
    MeasureKind.TRUNCATED_STABLE_SYMMETRIC: (-1.0, 1.0),
    MeasureKind.TRUNCATED_STABLE_NEGATIVE: (-1.0, 0.0),
    MeasureKind.FULL_STABLE_POSITIVE: (0.0, math.inf),
    MeasureKind.FULL_STABLE_TWO_SIDED: (-1.0, math.inf),
}


@dataclass(frozen=True)
class LevyMeasureSpec:
    """Parametric description of a jump intensity measure.

    ``params`` holds ``(c, theta)`` for exponential jumps.  Tabulated
    densities carry their table in ``knots``/``values``; the support is the
    knot range.
    """

    kind: MeasureKind
    rho: float | None = None
    params: tuple[float, ...] = ()
    knots: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", MeasureKind(self.kind))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "knots", tuple(float(k) for k in self.knots))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.rho is not None:
            object.__setattr__(self, "rho", float(self.rho))

    # constructors -------------------------------------------------------
    @classmethod
    def truncated_stable_positive(cls, rho: float) -> "LevyMeasureSpec":
        return cls(MeasureKind.TRUNCATED_STABLE_POSITIVE, rho=rho)

    @classmethod
    def truncated_stable_symmetric(cls, rho: float) -> "LevyMeasureSpec":
        return cls(MeasureKind.TRUNCATED_STABLE_SYMMETRIC, rho=rho)

    @classmethod
    def truncated_stable_negative(cls, rho: float) -> "LevyMeasureSpec":
        return cls(MeasureKind.TRUNCATED_STABLE_NEGATIVE, rho=rho)

    @classmethod
    def full_stable_positive(cls, rho: float) -> "LevyMeasureSpec":
        return cls(MeasureKind.FULL_STABLE_POSITIVE, rho=rho)

    @classmethod
    def full_stable_two_sided(cls, rho: float) -> "LevyMeasureSpec":
        return cls(MeasureKind.FULL_STABLE_TWO_SIDED, rho=rho)

    @classmethod
    def exponential(cls, c: float = 1.0, theta: float = 1.0) -> "LevyMeasureSpec":
        return cls(MeasureKind.EXPONENTIAL_JUMPS, params=(c, theta))

    @classmethod
    def tabulated(cls, knots, values) -> "LevyMeasureSpec":
        return cls(MeasureKind.FINITE_ACTIVITY_TABULATED, knots=tuple(knots), values=tuple(values))

    # derived ------------------------------------------------------------
    @property
    def support(self) -> tuple[float, float]:
        if self.kind in _STABLE_SUPPORT:
            return _STABLE_SUPPORT[self.kind]
        if self.kind is MeasureKind.EXPONENTIAL_JUMPS:
            return (0.0, math.inf)
        if not self.knots:
            return (math.nan, math.nan)
        return (self.knots[0], self.knots[-1])

    @property
    def support_low(self) -> float:
        return self.support[0]

    @property
    def support_high(self) -> float:
        return self.support[1]

    @property
    def is_stable(self) -> bool:
        return self.kind in STABLE_KINDS

    @property
    def is_finite_activity(self) -> bool:
        return not self.is_stable

    # flat key-value serialisation --------------------------------------
    def to_mapping(self) -> dict[str, str]:
        out = {"kind": self.kind.value}
        if self.rho is not None:
            out["rho"] = repr(self.rho)
        if self.kind is MeasureKind.EXPONENTIAL_JUMPS:
            out["c"] = repr(self.params[0])
            out["theta"] = repr(self.params[1])
        if self.kind is MeasureKind.FINITE_ACTIVITY_TABULATED:
            out["knots"] = ", ".join(repr(k) for k in self.knots)
            out["values"] = ", ".join(repr(v) for v in self.values)
        return out

    @classmethod
    def from_mapping(cls, data: Mapping[str, str]) -> "LevyMeasureSpec":
        if "kind" not in data:
            raise MeasureError("measure block needs a 'kind' key")
        try:
            kind = MeasureKind(data["kind"].strip())
        except ValueError:
            raise MeasureError(f"unknown measure kind {data['kind']!r}") from None
        if kind in STABLE_KINDS:
            if "rho" not in data:
                raise MeasureError(f"{kind.value} needs 'rho'")
            return cls(kind, rho=float(data["rho"]))
        if kind is MeasureKind.EXPONENTIAL_JUMPS:
            return cls(kind, params=(float(data.get("c", "1.0")), float(data.get("theta", "1.0"))))
        knots = _float_list(data.get("knots", ""))
        values = _float_list(data.get("values", ""))
        return cls(kind, knots=knots, values=values)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(";", ",").split(",") if tok.strip())


@dataclass(frozen=True)
class VolatilitySpec:
    """Deterministic proportional volatility lambda(t, T).

    ``form`` is ``"constant"`` (``lambda == value``) or
    ``"separable_linear"`` (``lambda = a + b * t`` clamped into
    ``[lambda_low, lambda_high]``).  Both forms depend on ``t`` only.
    """

    lambda_low: float = 1.0
    lambda_high: float = 1.0
    form: str = "constant"
    value: float = 1.0
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if not (self.lambda_low > 0):
            raise MeasureError(f"lambda_low must be positive, got {self.lambda_low!r}")
        if self.lambda_high < self.lambda_low:
            raise MeasureError("lambda_high must not be below lambda_low")
        if self.lambda_high < 1.0:
            raise MeasureError(f"lambda_high must be >= 1, got {self.lambda_high!r}")
        if self.form == "constant":
            if not (self.lambda_low <= self.value <= self.lambda_high):
                raise MeasureError(
                    f"constant volatility {self.value!r} outside "
                    f"[{self.lambda_low!r}, {self.lambda_high!r}]"
                )
        elif self.form != "separable_linear":
            raise MeasureError(f"unknown volatility form {self.form!r}")

    @classmethod
    def constant(cls, value: float = 1.0, lambda_low: float | None = None,
                 lambda_high: float | None = None) -> "VolatilitySpec":
        lo = value if lambda_low is None else lambda_low
        hi = max(value, 1.0) if lambda_high is None else lambda_high
        return cls(lambda_low=lo, lambda_high=hi, form="constant", value=value)

    @classmethod
    def separable_linear(cls, a: float, b: float, lambda_low: float,
                         lambda_high: float) -> "VolatilitySpec":
        return cls(lambda_low=lambda_low, lambda_high=lambda_high,
                   form="separable_linear", a=a, b=b)

    @property
    def is_unit(self) -> bool:
        """True when lambda is identically one."""
        if self.form == "constant":
            return self.value == 1.0
        return self.lambda_low == self.lambda_high == 1.0

    def at(self, t, T=None) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.form == "constant":
            return np.full(np.broadcast_shapes(t.shape, np.shape(T)), self.value)
        lam = np.clip(self.a + self.b * t, self.lambda_low, self.lambda_high)
        return np.broadcast_to(lam, np.broadcast_shapes(t.shape, np.shape(T))).copy()

    def integral(self, t) -> np.ndarray:
        """Return int_0^t lambda(s) ds."""
        t = np.asarray(t, dtype=float)
        if self.form == "constant":
            return self.value * t
        if self.b == 0.0:
            return float(np.clip(self.a, self.lambda_low, self.lambda_high)) * t
        lo, hi = self.lambda_low, self.lambda_high

        def antider(u):
            return np.where(
                u <= lo,
                lo * u,
                np.where(u <= hi, lo * lo + 0.5 * (u * u - lo * lo),
                         lo * lo + 0.5 * (hi * hi - lo * lo) + hi * (u - hi)),
            )

        return (antider(self.a + self.b * t) - antider(np.asarray(self.a))) / self.b

    def on_grid(self, times: np.ndarray) -> np.ndarray:
        """lambda(t_i, T_j) as a square matrix over a uniform grid."""
        return np.broadcast_to(self.at(times)[:, None], (times.size, times.size))

    def to_mapping(self) -> dict[str, str]:
        out = {
            "form": self.form,
            "lambda_low": repr(self.lambda_low),
            "lambda_high": repr(self.lambda_high),
        }
        if self.form == "constant":
            out["value"] = repr(self.value)
        else:
            out["a"] = repr(self.a)
            out["b"] = repr(self.b)
        return out


@dataclass(frozen=True)
class ValidatedMeasure:
    """A measure checked against a volatility bound, with its moments."""

    spec: LevyMeasureSpec
    lambda_high: float
    m2_small: float
    m1_tail: float
    total_mass: float
    positive_small_first_moment: float = field(default=0.0)

    @property
    def kind(self) -> MeasureKind:
        return self.spec.kind

    @property
    def rho(self) -> float | None:
        return self.spec.rho

    @property
    def support_low(self) -> float:
        return self.spec.support_low

    @property
    def support_high(self) -> float:
        return self.spec.support_high

    @property
    def is_finite_activity(self) -> bool:
        return self.spec.is_finite_activity

    @property
    def has_negative_jumps(self) -> bool:
        return self.support_low < 0.0

    @property
    def has_positive_jumps(self) -> bool:
        return self.support_high > 0.0


def validate(spec: LevyMeasureSpec | ValidatedMeasure, vol: VolatilitySpec) -> ValidatedMeasure:
    """Check a measure against the standing assumptions and attach moments.

    Raises :class:`IntegrabilityViolation` when ``int y^2 ^ 1 dnu`` or
    ``int_1^inf y dnu`` diverges and :class:`SupportViolation` when the
    support reaches below ``-1 / vol.lambda_high``.
    """
    if isinstance(spec, ValidatedMeasure):
        spec = spec.spec
    _check_parameters(spec)
    floor = -1.0 / vol.lambda_high
    # the support is open at its lower end, so touching the floor is allowed
    if spec.support_low < floor:
        raise SupportViolation(spec.support_low, floor)
    m2, m1, total = _moments(spec)
    return ValidatedMeasure(
        spec=spec,
        lambda_high=float(vol.lambda_high),
        m2_small=m2,
        m1_tail=m1,
        total_mass=total,
        positive_small_first_moment=_positive_small_first_moment(spec),
    )


def mass_moments(measure: ValidatedMeasure) -> tuple[float, float, float]:
    """Return ``(m2_small, m1_tail, total_mass)``.

    ``m2_small`` integrates ``y**2`` over the support below 1, ``m1_tail``
    integrates ``y`` over ``[1, inf)``; ``total_mass`` is ``inf`` for the
    infinite-activity stable kinds.
    """
    return measure.m2_small, measure.m1_tail, measure.total_mass


def _check_parameters(spec: LevyMeasureSpec) -> None:
    kind = spec.kind
    if kind in STABLE_KINDS:
        rho = spec.rho
        if rho is None or not math.isfinite(rho):
            raise MeasureError(f"{kind.value} needs a finite rho")
        if rho >= 2.0:
            detail = "rho=2 is a boundary value" if rho == 2.0 else f"rho={rho!r} >= 2"
            raise IntegrabilityViolation("int min(y^2, 1) nu(dy)", detail)
        if kind in FULL_STABLE_KINDS and rho <= 1.0:
            detail = "rho=1 gives a divergent log integral" if rho == 1.0 else f"rho={rho!r} <= 1"
            raise IntegrabilityViolation("int_1^inf y nu(dy)", detail)
        if rho == 0.0:
            raise RhoBoundaryError("rho=0 is a boundary value and is not admitted")
        if rho < 0.0:
            raise MeasureError(f"rho must lie in (0, 2), got {rho!r}")
        if rho == 1.0 and kind is not MeasureKind.TRUNCATED_STABLE_POSITIVE:
            raise RhoBoundaryError(
                f"rho=1 is a boundary value; only truncated_stable_positive admits it, "
                f"not {kind.value}"
            )
    elif kind is MeasureKind.EXPONENTIAL_JUMPS:
        if len(spec.params) != 2:
            raise MeasureError("exponential jumps need params (c, theta)")
        c, theta = spec.params
        if not (c > 0 and theta > 0 and math.isfinite(c) and math.isfinite(theta)):
            raise MeasureError(f"exponential jumps need c > 0 and theta > 0, got {spec.params!r}")
    else:
        knots = np.asarray(spec.knots)
        values = np.asarray(spec.values)
        if knots.size < 2 or knots.size != values.size:
            raise MeasureError("tabulated density needs >= 2 knots and one value per knot")
        if not (np.all(np.isfinite(knots)) and np.all(np.isfinite(values))):
            raise MeasureError("tabulated density must be finite with a bounded support")
        if np.any(np.diff(knots) <= 0):
            raise MeasureError("tabulated knots must be strictly increasing")
        if np.any(values < 0):
            raise MeasureError("tabulated density must be nonnegative")
        if tabulated_moment(spec.knots, spec.values, 0) <= 0:
            raise MeasureError("tabulated density has zero total mass")


def tabulated_moment(knots, values, k: int, lo: float = -math.inf, hi: float = math.inf) -> float:
    """Exact ``int_lo^hi y**k p(y) dy`` for a piecewise-linear density."""
    x = np.asarray(knots, dtype=float)
    p = np.asarray(values, dtype=float)
    total = 0.0
    for x0, x1, p0, p1 in zip(x[:-1], x[1:], p[:-1], p[1:]):
        a, b = max(x0, lo), min(x1, hi)
        if b <= a:
            continue
        s = (p1 - p0) / (x1 - x0)
        c0 = p0 - s * x0
        total += c0 * (b ** (k + 1) - a ** (k + 1)) / (k + 1)
        total += s * (b ** (k + 2) - a ** (k + 2)) / (k + 2)
    return total


def _moments(spec: LevyMeasureSpec) -> tuple[float, float, float]:
    kind = spec.kind
    if kind in STABLE_KINDS:
        rho = spec.rho
        sides = 2.0 if kind in (MeasureKind.TRUNCATED_STABLE_SYMMETRIC,
                                MeasureKind.FULL_STABLE_TWO_SIDED) else 1.0
        m2 = sides / (2.0 - rho)
        m1 = 1.0 / (rho - 1.0) if kind in FULL_STABLE_KINDS else 0.0
        return m2, m1, math.inf
    if kind is MeasureKind.EXPONENTIAL_JUMPS:
        c, theta = spec.params
        e = math.exp(-theta)
        m2 = c * (2.0 - e * (theta * theta + 2.0 * theta + 2.0)) / theta**3
        m1 = c * e * (1.0 + theta) / theta**2
        return m2, m1, c / theta
    m2 = tabulated_moment(spec.knots, spec.values, 2, hi=1.0)
    m1 = tabulated_moment(spec.knots, spec.values, 1, lo=1.0)
    return m2, m1, tabulated_moment(spec.knots, spec.values, 0)


def _positive_small_first_moment(spec: LevyMeasureSpec) -> float:
    """``int_(0,1) y nu(dy)``; finite exactly when positive small jumps have finite variation."""
    kind = spec.kind
    if kind in STABLE_KINDS:
        if spec.support_high <= 0:
            return 0.0
        return 1.0 / (1.0 - spec.rho) if spec.rho < 1.0 else math.inf
    if kind is MeasureKind.EXPONENTIAL_JUMPS:
        c, theta = spec.params
        return c * (-math.expm1(-theta) - theta * math.exp(-theta)) / theta**2
    return tabulated_moment(spec.knots, spec.values, 1, lo=0.0, hi=1.0)
