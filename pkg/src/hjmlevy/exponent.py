"""Laplace exponent J of the driving noise and its first two derivatives.

For a validated measure ``nu`` with volatility bound ``lambda_high``

    J(z)   = int_(-1/lh, 1) (exp(-z y) - 1 + z y) nu(dy) + int_[1, inf) (exp(-z y) - 1) nu(dy)
    J'(z)  = int_(-1/lh, 1) y (1 - exp(-z y)) nu(dy) - int_[1, inf) y exp(-z y) nu(dy)
    J''(z) = int y**2 exp(-z y) nu(dy)

Every catalog measure splits into at most two of the following pieces, each
with its own evaluation routes:

``pos``   density ``y**(-1-rho)`` on (0, 1)
``neg``   density ``|y|**(-1-rho)`` on (-1, 0)
``sym``   ``pos + neg``
``tail``  density ``y**(-1-rho)`` on [1, inf)
``exp``   density ``c exp(-theta y)`` on (0, inf)
``tab``   piecewise-linear density on a bounded support

The power series used for moderate ``z`` only have positive terms, so they
do not cancel; above ``series_switch`` they give way to incomplete-gamma
closed forms or to quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicHermiteSpline

from .errors import NumericOverflow
from .measures import MeasureKind, ValidatedMeasure

EXP_LIMIT = 709.78
_TAIL_CUT = 60.0  # exp(-60) is below double precision relative to O(1) values
_EULER_GAMMA = 0.5772156649015329


class Strategy(str, Enum):
    SERIES_SMALL_Z = "series_small_z"
    QUADRATURE_GENERAL = "quadrature_general"
    CLOSED_FORM_LIMIT = "closed_form_limit"


_DEFAULT_STRATEGY = {
    MeasureKind.TRUNCATED_STABLE_POSITIVE: Strategy.SERIES_SMALL_Z,
    MeasureKind.TRUNCATED_STABLE_SYMMETRIC: Strategy.SERIES_SMALL_Z,
    MeasureKind.TRUNCATED_STABLE_NEGATIVE: Strategy.SERIES_SMALL_Z,
    MeasureKind.FULL_STABLE_POSITIVE: Strategy.SERIES_SMALL_Z,
    MeasureKind.FULL_STABLE_TWO_SIDED: Strategy.SERIES_SMALL_Z,
    MeasureKind.EXPONENTIAL_JUMPS: Strategy.CLOSED_FORM_LIMIT,
    MeasureKind.FINITE_ACTIVITY_TABULATED: Strategy.QUADRATURE_GENERAL,
}

_PIECES = {
    MeasureKind.TRUNCATED_STABLE_POSITIVE: ("pos",),
    MeasureKind.TRUNCATED_STABLE_SYMMETRIC: ("sym",),
    MeasureKind.TRUNCATED_STABLE_NEGATIVE: ("neg",),
    MeasureKind.FULL_STABLE_POSITIVE: ("pos", "tail"),
    MeasureKind.FULL_STABLE_TWO_SIDED: ("sym", "tail"),
    MeasureKind.EXPONENTIAL_JUMPS: ("exp",),
    MeasureKind.FINITE_ACTIVITY_TABULATED: ("tab",),
}


# ---------------------------------------------------------------------------
# scalar kernels, stable for small arguments

def _psi0(x: float) -> float:
    """(exp(-x) - 1 + x) / x**2."""
    if abs(x) < 0.1:
        # sum_k (-x)^k / (k+2)!
        acc = 0.0
        for k in range(13, -1, -1):
            acc = acc * (-x) + 1.0 / math.factorial(k + 2)
        return acc
    return (math.expm1(-x) + x) / (x * x)


def _psi1(x: float) -> float:
    """(1 - exp(-x)) / x."""
    if x == 0.0:
        return 1.0
    return -math.expm1(-x) / x


# ---------------------------------------------------------------------------
# power series (vectorised over z)

def _series_loop(z: np.ndarray, body, max_terms: int = 2000) -> np.ndarray:
    """Accumulate ``body(k, state)`` until terms fall below 1e-17 of the sum."""
    total = np.zeros_like(z)
    state: dict = {}
    quiet = 0  # consecutive negligible terms; lacunary series have zero terms
    for k in range(max_terms):
        term = body(k, state)
        total = total + term
        if k > z.max() and np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            quiet += 1
            if quiet >= 2:
                break
        else:
            quiet = 0
    return total


def _pos_jprime_series(z: np.ndarray, rho: float) -> np.ndarray:
    # exp(-z) sum_{n>=1} z^n/n! * sum_{m<=n} B(2-rho, m)
    a = 2.0 - rho

    def body(k, st):
        n = k + 1
        if k == 0:
            st["p"] = z.copy()          # z^n / n!
            st["b"] = 1.0 / a           # B(a, n)
            st["c"] = st["b"]
        else:
            st["p"] = st["p"] * z / n
            st["b"] = st["b"] * (n - 1) / (n - 1 + a)
            st["c"] = st["c"] + st["b"]
        return st["p"] * st["c"]

    return np.exp(-z) * _series_loop(z, body)


def _pos_jsecond_series(z: np.ndarray, rho: float) -> np.ndarray:
    # exp(-z) sum_k z^k / prod_{i<=k} (2 - rho + i)
    a = 2.0 - rho

    def body(k, st):
        st["t"] = np.full_like(z, 1.0 / a) if k == 0 else st["t"] * z / (a + k)
        return st["t"]

    return np.exp(-z) * _series_loop(z, body)


def _pos_j_small(z: np.ndarray, rho: float) -> np.ndarray:
    # sum_{k>=2} (-z)^k / (k! (k - rho)), only used for z < 0.5
    def body(k, st):
        st["p"] = np.ones_like(z) if k == 0 else st["p"] * (-z) / k
        return st["p"] / (k - rho) if k >= 2 else np.zeros_like(z)

    return _series_loop(z, body)


def _neg_series(z: np.ndarray, rho: float, shift: float, start: int, step: int = 1) -> np.ndarray:
    # sum_{k>=start, k = start mod step} z^k / (k! (k + shift))
    def body(k, st):
        st["p"] = np.ones_like(z) if k == 0 else st["p"] * z / k
        if k < start or (k - start) % step:
            return np.zeros_like(z)
        return st["p"] / (k + shift)

    return _series_loop(z, body)


# ---------------------------------------------------------------------------
# incomplete-gamma closed forms

def _at_positive(z: np.ndarray, at_zero: float, fn) -> np.ndarray:
    out = np.full_like(z, at_zero)
    pos = z > 0
    if np.any(pos):
        out[pos] = fn(z[pos])
    return out


def _ein(z: np.ndarray) -> np.ndarray:
    """int_0^z (1 - exp(-v)) / v dv."""
    out = np.empty_like(z)
    small = z < 1.0
    zs = z[small]
    if zs.size:
        # sum_{n>=1} (-1)^(n+1) z^n / (n n!)
        def body(k, st):
            n = k + 1
            st["p"] = zs.copy() if k == 0 else st["p"] * (-zs) / n
            return st["p"] / n

        out[small] = _series_loop(zs, body)
    zl = z[~small]
    out[~small] = special.exp1(zl) + np.log(zl) + _EULER_GAMMA
    return out


def _pos_jprime_closed(z: np.ndarray, rho: float) -> np.ndarray:
    if rho == 1.0:
        return _ein(z)
    a = 2.0 - rho
    return _at_positive(
        z, 0.0,
        lambda x: (-np.expm1(-x) - x ** (rho - 1.0) * special.gamma(a) * special.gammainc(a, x))
        / (1.0 - rho),
    )


def positive_part_j_prime(z, rho: float) -> np.ndarray:
    """z**(rho-1) int_0^z (1 - exp(-v)) v**(-rho) dv, the J' of y**(-1-rho) on (0, 1)."""
    z = np.asarray(z, dtype=float)
    return _pos_jprime_closed(np.atleast_1d(z), rho).reshape(z.shape)


def _pos_jsecond_closed(z: np.ndarray, rho: float) -> np.ndarray:
    a = 2.0 - rho
    return _at_positive(z, 1.0 / a, lambda x: x ** (-a) * special.gamma(a) * special.gammainc(a, x))


def _pos_j_from_jprime(z: np.ndarray, rho: float, jp: np.ndarray) -> np.ndarray:
    out = (-(np.expm1(-z) + z) + z * jp) / rho
    small = z < 0.5
    if np.any(small):
        out[small] = _pos_j_small(z[small], rho)
    return out


def _tail_jprime_closed(z: np.ndarray, rho: float) -> np.ndarray:
    # -E_rho(z) with E_rho(z) = (exp(-z) - z^(rho-1) Gamma(2-rho) Q(2-rho, z)) / (rho - 1)
    a = 2.0 - rho
    e_rho = _at_positive(
        z, 1.0 / (rho - 1.0),
        lambda x: (np.exp(-x) - x ** (rho - 1.0) * special.gamma(a) * special.gammaincc(a, x))
        / (rho - 1.0),
    )
    return -e_rho


def _tail_jsecond_closed(z: np.ndarray, rho: float) -> np.ndarray:
    a = 2.0 - rho
    return _at_positive(z, math.inf, lambda x: x ** (-a) * special.gamma(a) * special.gammaincc(a, x))


def _tail_j_from_jprime(z: np.ndarray, rho: float, jp: np.ndarray) -> np.ndarray:
    return (np.expm1(-z) + z * jp) / rho


def _exp_closed(z: np.ndarray, c: float, theta: float, d: int) -> np.ndarray:
    small_mean = c * (-math.expm1(-theta) - theta * math.exp(-theta)) / theta**2
    if d == 0:
        return -c * z / (theta * (theta + z)) + z * small_mean
    if d == 1:
        return small_mean - c / (theta + z) ** 2
    return 2.0 * c / (theta + z) ** 3


# ---------------------------------------------------------------------------
# quadrature

_QUAD = dict(epsabs=0.0, epsrel=1e-13, limit=400)


def _quad(fn, lo, hi, **kw):
    opts = dict(_QUAD)
    opts.update(kw)
    val, _ = integrate.quad(fn, lo, hi, **opts)
    return val


def _power_kernel_integral(kernel, rho: float, upper: float) -> float:
    """int_0^upper v**(1 - rho) kernel(v) dv for a smooth kernel."""
    head = min(upper, 1.0)
    total = _quad(kernel, 0.0, head, weight="alg", wvar=(1.0 - rho, 0.0))
    if upper > 1.0:
        total += _quad(lambda v: v ** (1.0 - rho) * kernel(v), 1.0, upper)
    return total


def _power_integral(p: float, lo: float, hi: float) -> float:
    """int_lo^hi v**(-p) dv."""
    if p == 1.0:
        return math.log(hi / lo)
    return (hi ** (1.0 - p) - lo ** (1.0 - p)) / (1.0 - p)


def _pos_quad(z: float, rho: float, d: int) -> float:
    kernels = (_psi0, _psi1, lambda v: math.exp(-v))
    ker = kernels[d]
    scale = 2 - d  # kernel_d(z, y) = y**2 z**scale ker(z y)
    if z <= 1.0:
        return z**scale * _quad(lambda y: ker(z * y), 0.0, 1.0, weight="alg", wvar=(1.0 - rho, 0.0))
    upper = min(z, _TAIL_CUT)
    body = _power_kernel_integral(ker, rho, upper)
    if z > _TAIL_CUT:
        # exp(-v) has died out: psi0 ~ (v - 1)/v^2, psi1 ~ 1/v
        if d == 0:
            body += _power_integral(rho, upper, z) - _power_integral(1.0 + rho, upper, z)
        elif d == 1:
            body += _power_integral(rho, upper, z)
    return z**scale * z ** (rho - 2.0) * body


def _neg_quad(z: float, rho: float, d: int) -> float:
    kernels = (
        lambda v: _psi0(-v),
        lambda v: _psi1(-v),
        lambda v: math.exp(v),
    )
    ker = kernels[d]
    scale = 2 - d
    if z <= 1.0:
        return z**scale * _quad(lambda w: ker(z * w), 0.0, 1.0, weight="alg", wvar=(1.0 - rho, 0.0))
    body = _quad(ker, 0.0, 1.0, weight="alg", wvar=(1.0 - rho, 0.0))
    cut = max(1.0, z - 40.0)
    fn = lambda v: v ** (1.0 - rho) * ker(v)
    if cut > 1.0:
        body += _quad(fn, 1.0, cut)
    body += _quad(fn, cut, z)
    return z**scale * z ** (rho - 2.0) * body


def _tail_quad(z: float, rho: float, d: int) -> float:
    # int_1^inf exp(-z y) y**(-q) dy in the variable s = log y
    q = (1.0 + rho, rho, rho - 1.0)[d]
    if z == 0.0:
        if q <= 1.0:
            return math.inf
        base = 1.0 / (q - 1.0)
    else:
        top = math.log1p(800.0 / z)
        fn = lambda s: math.exp(-z * math.exp(s) + (1.0 - q) * s)
        pts = [p for p in (-math.log(z),) if 0.0 < p < top]
        base = _quad(fn, 0.0, top, points=pts or None)
    if d == 0:
        return base - 1.0 / rho
    if d == 1:
        return -base
    return base


def _bounded_quad(density, lo: float, hi: float, z: float, d: int, breaks) -> float:
    """Integral of the J kernels against a bounded density on [lo, hi]."""

    def small(y):
        if d == 0:
            return z * z * y * y * _psi0(z * y) * density(y)
        if d == 1:
            return z * y * y * _psi1(z * y) * density(y)
        return y * y * math.exp(-z * y) * density(y)

    def large(y):
        if d == 0:
            return math.expm1(-z * y) * density(y)
        if d == 1:
            return -y * math.exp(-z * y) * density(y)
        return y * y * math.exp(-z * y) * density(y)

    total = 0.0
    if lo < 1.0:
        top = min(hi, 1.0)
        pts = sorted({b for b in breaks if lo < b < top} | ({1.0 / z} if z > 0 and lo < 1.0 / z < top else set()))
        total += _quad(small, lo, top, points=pts or None)
    if hi > 1.0:
        start = max(lo, 1.0)
        if math.isinf(hi):
            total += _quad(large, start, math.inf)
        else:
            pts = sorted(b for b in breaks if start < b < hi)
            total += _quad(large, start, hi, points=pts or None)
    return total


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentEvaluator:
    """Evaluates J, J' and J'' for one validated measure.

    Parameters
    ----------
    measure : ValidatedMeasure
    strategy : Strategy, optional
        Defaults to series for stable kinds, closed forms for exponential
        jumps and quadrature for tabulated densities.
    series_switch : float
        Largest ``z`` handled by the power series.
    """

    measure: ValidatedMeasure
    strategy: Strategy | None = None
    series_switch: float = 30.0
    table_per_decade: int = 64

    def __post_init__(self):
        if self.strategy is None:
            object.__setattr__(self, "strategy", _DEFAULT_STRATEGY[self.measure.kind])
        object.__setattr__(self, "strategy", Strategy(self.strategy))

    # public API -----------------------------------------------------------
    def j(self, z):
        return self._evaluate(z, 0)

    def j_prime(self, z):
        return self._evaluate(z, 1)

    def j_second(self, z):
        return self._evaluate(z, 2)

    @property
    def overflow_threshold(self) -> float:
        """Largest z for which exp(-z * support_low) is representable."""
        low = self.measure.support_low
        return math.inf if low >= 0 else EXP_LIMIT / (-low)

    @cached_property
    def j_prime_limit(self) -> float:
        """lim_{z -> inf} J'(z); finite only for finite-variation positive measures."""
        if self.measure.has_negative_jumps:
            return math.inf
        return self.measure.positive_small_first_moment

    @cached_property
    def table(self) -> "JPrimeTable":
        return JPrimeTable.build(self, per_decade=self.table_per_decade)

    def j_prime_fast(self, z) -> np.ndarray:
        """Vectorised J' for bulk use: exact closed form or a monotone table."""
        z = np.asarray(z, dtype=float)
        if self.measure.kind is MeasureKind.EXPONENTIAL_JUMPS:
            c, theta = self.measure.spec.params
            out = _exp_closed(np.where(np.isinf(z), 0.0, z), c, theta, 1)
            return np.where(np.isinf(z), self.j_prime_limit, out)
        return self.table(z)

    # internals -------------------------------------------------------------
    def _evaluate(self, z, d: int):
        arr = np.asarray(z, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr).astype(float)
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise ValueError("J and its derivatives are only evaluated at z >= 0")
        if arr.size and arr.max() > self.overflow_threshold:
            raise NumericOverflow(
                f"exp(-z*support_low) overflows at z={arr.max()!r} "
                f"(support_low={self.measure.support_low!r})"
            )
        out = np.zeros_like(arr)
        for piece in _PIECES[self.measure.kind]:
            out = out + self._piece(piece, arr, d)
        return float(out[0]) if scalar else out

    def _piece(self, piece: str, z: np.ndarray, d: int) -> np.ndarray:
        m = self.measure
        strat = self.strategy
        if piece == "exp":
            c, theta = m.spec.params
            if strat is Strategy.QUADRATURE_GENERAL:
                dens = lambda y: c * math.exp(-theta * y)
                return _vec(lambda x: _bounded_quad(dens, 0.0, math.inf, x, d, ()), z)
            return _exp_closed(z, c, theta, d)
        if piece == "tab":
            knots = np.asarray(m.spec.knots)
            vals = np.asarray(m.spec.values)
            dens = lambda y: float(np.interp(y, knots, vals))
            return _vec(lambda x: _bounded_quad(dens, knots[0], knots[-1], x, d, tuple(knots) + (0.0,)), z)
        rho = m.rho
        if piece == "tail":
            if strat is Strategy.QUADRATURE_GENERAL:
                return _vec(lambda x: _tail_quad(x, rho, d), z)
            jp = _tail_jprime_closed(z, rho)
            if d == 1:
                return jp
            if d == 2:
                return _tail_jsecond_closed(z, rho)
            return _tail_j_from_jprime(z, rho, jp)
        if strat is Strategy.QUADRATURE_GENERAL:
            if piece == "sym":
                return self._piece_quad("pos", z, d) + self._piece_quad("neg", z, d)
            return self._piece_quad(piece, z, d)
        out = np.empty_like(z)
        low = z <= self.series_switch
        if strat is Strategy.CLOSED_FORM_LIMIT and piece == "pos":
            low = np.zeros_like(z, dtype=bool)
        if np.any(low):
            out[low] = self._piece_series(piece, z[low], d)
        if np.any(~low):
            high = z[~low]
            if piece == "pos":
                out[~low] = self._pos_closed(high, d)
            elif piece == "neg":
                out[~low] = self._piece_quad("neg", high, d)
            else:
                out[~low] = self._pos_closed(high, d) + self._piece_quad("neg", high, d)
        return out

    def _pos_closed(self, z: np.ndarray, d: int) -> np.ndarray:
        rho = self.measure.rho
        if d == 2:
            return _pos_jsecond_closed(z, rho)
        jp = _pos_jprime_closed(z, rho)
        return jp if d == 1 else _pos_j_from_jprime(z, rho, jp)

    def _piece_quad(self, piece: str, z: np.ndarray, d: int) -> np.ndarray:
        rho = self.measure.rho
        fn = _pos_quad if piece == "pos" else _neg_quad
        return _vec(lambda x: fn(x, rho, d), z)

    def _piece_series(self, piece: str, z: np.ndarray, d: int) -> np.ndarray:
        rho = self.measure.rho
        if piece == "pos":
            if d == 2:
                return _pos_jsecond_series(z, rho)
            jp = _pos_jprime_series(z, rho)
            return jp if d == 1 else _pos_j_from_jprime(z, rho, jp)
        if piece == "neg":
            if d == 0:
                return _neg_series(z, rho, -rho, 2)
            if d == 1:
                return _neg_series(z, rho, 1.0 - rho, 1)
            return _neg_series(z, rho, 2.0 - rho, 0)
        # symmetric: only the even (J, J'') or odd (J') powers survive
        if d == 0:
            return 2.0 * _neg_series(z, rho, -rho, 2, 2)
        if d == 1:
            return 2.0 * _neg_series(z, rho, 1.0 - rho, 1, 2)
        return 2.0 * _neg_series(z, rho, 2.0 - rho, 0, 2)


def _vec(fn, z: np.ndarray) -> np.ndarray:
    return np.array([fn(float(x)) for x in z], dtype=float)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JPrimeTable:
    """Monotone cubic Hermite interpolant of J' on a logarithmic grid.

    The interpolated quantity is ``w = log1p(J' - J'(0))``, which stays
    smooth where J' grows exponentially.  Node slopes come from the exact
    J'' and are limited (Fritsch-Carlson) so ``w``, and therefore J', is
    nondecreasing.  Beyond the last node the table returns the limit for
    bounded J', ``inf`` once values pass ``cap`` or exp(-z y) overflows,
    and falls back to direct evaluation otherwise.
    """

    nodes: np.ndarray
    values: np.ndarray
    spline: CubicHermiteSpline = field(repr=False)
    base: float
    top: float
    above: str
    limit: float
    evaluator: ExponentEvaluator = field(repr=False)

    @classmethod
    def build(cls, ev: ExponentEvaluator, per_decade: int = 64, z_lo: float = 1e-12,
              z_hi: float = 1e12, cap: float = 1e250) -> "JPrimeTable":
        hi = min(z_hi, 0.999 * ev.overflow_threshold)
        count = int(math.ceil(per_decade * math.log10(hi / z_lo))) + 1
        nodes = np.concatenate([[0.0], np.geomspace(z_lo, hi, count)])
        vals = np.asarray(ev.j_prime(nodes), dtype=float)
        keep = np.isfinite(vals) & (vals < cap)
        truncated = not np.all(keep)
        if truncated:
            stop = int(np.argmin(keep))
            nodes, vals = nodes[:stop], vals[:stop]
        vals = np.maximum.accumulate(vals)
        base = float(vals[0])
        w = np.log1p(vals - base)
        slopes = np.asarray(ev.j_second(nodes), dtype=float) / (1.0 + vals - base)
        secant = np.diff(w) / np.diff(nodes)
        left = np.concatenate([[np.inf], secant])
        right = np.concatenate([secant, [np.inf]])
        slopes = np.clip(np.minimum(slopes, 3.0 * np.minimum(left, right)), 0.0, None)
        spline = CubicHermiteSpline(nodes, w, slopes, extrapolate=False)
        if truncated or ev.overflow_threshold < math.inf:
            above = "inf"
        elif math.isfinite(ev.j_prime_limit):
            above = "limit"
        else:
            above = "exact"
        top_value = base + float(np.expm1(spline(nodes[-1])))
        limit = max(float(ev.j_prime_limit), float(vals[-1]), top_value)
        return cls(nodes, vals, spline, base, float(nodes[-1]), above, limit, ev)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.empty(z.shape)
        inside = z <= self.top
        out[inside] = self.base + np.expm1(self.spline(z[inside]))
        if np.any(~inside):
            zo = z[~inside]
            if self.above == "inf":
                out[~inside] = math.inf
            elif self.above == "limit":
                out[~inside] = self.limit
            else:
                res = np.full(zo.shape, self.limit)
                fin = np.isfinite(zo)
                if np.any(fin):
                    res[fin] = np.maximum(self.evaluator.j_prime(zo[fin]), self.values[-1])
                out[~inside] = res
        return out
