"""Blow-up comparison functions and the dominance check built on them.

For ``alpha > 0``, ``gamma`` in (0, 1) and a corner ``(x, y)``:

    h(t, T) = (x - t + y - T)**(-3/gamma)          (inf at the corner)
    R(z)    = alpha z        for z <= 1,  alpha z**gamma  for z > 1
    g(t, T) = h(t, T) exp(-int_0^t R(int_s^T h(s, u) du) ds)   (0 at the corner)

``h`` is the solution of ``h = exp(int R(int h)) g`` and blows up at the
corner while ``g`` stays bounded.  A forward-rate field whose coefficient
dominates ``g`` (after the ``exp(beta t)`` correction) dominates ``h`` on
every sub-triangle that stops short of the corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DegenerateDenominator
from .solver import GridSpec

DOMINANCE_SLACK = 1e-12


def r_function(z, alpha: float, gamma: float):
    """R(z) = alpha z on [0, 1] and alpha z**gamma above 1."""
    z = np.asarray(z, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.where(z <= 1.0, alpha * z, alpha * np.power(np.maximum(z, 1.0), gamma))
    return out if out.ndim else float(out)


def blowup_h(t, T, x: float, y: float, gamma: float):
    """(x - t + y - T)**(-3/gamma), ``inf`` at the corner."""
    d = x - np.asarray(t, dtype=float) + y - np.asarray(T, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(d > 0, np.power(np.where(d > 0, d, 1.0), -3.0 / gamma), np.inf)
    return out if out.ndim else float(out)


def closed_double_integral(t: float, T: float, x: float, y: float) -> float:
    """int_0^t int_s^T (x - s + y - u)**-3 du ds in closed form."""
    dens = ((x - t + y - T), (x + y - 2.0 * t), (x + y - T), (x + y))
    if any(d == 0 for d in dens):
        raise DegenerateDenominator(f"closed form is singular at t={t!r}, T={T!r}, x={x!r}, y={y!r}")
    num = -T * T - T * t - t * y + 2.0 * T * y + 2.0 * T * x - t * x
    return 0.5 * t * num / (dens[0] * dens[1] * dens[2] * dens[3])


def inner_h_integral(s, T, x: float, y: float, gamma: float):
    """int_s^T h(s, u) du in closed form (``p = 3/gamma > 3``)."""
    p = 3.0 / gamma
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        lo = np.power(x - s + y - T, 1.0 - p)
    return (lo - np.power(x + y - 2.0 * s, 1.0 - p)) / (p - 1.0)


def g_exact(t: float, T: float, x: float, y: float, gamma: float, alpha: float) -> float:
    """Pointwise g from the closed inner integral and adaptive outer quadrature."""
    if t == x and T == y:
        return 0.0
    expo = exponent_exact(t, T, x, y, gamma, alpha)
    return float(blowup_h(t, T, x, y, gamma) * math.exp(-expo)) if math.isfinite(expo) else 0.0


def exponent_exact(t: float, T: float, x: float, y: float, gamma: float, alpha: float) -> float:
    """int_0^t R(int_s^T h(s, u) du) ds."""
    if t == 0:
        return 0.0
    fn = lambda s: float(r_function(inner_h_integral(s, T, x, y, gamma), alpha, gamma))
    val, _ = integrate.quad(fn, 0.0, t, epsabs=0.0, epsrel=1e-11, limit=400)
    return val


@dataclass(frozen=True, eq=False)
class ComparisonBundle:
    """h and g tabulated on the grid nodes of the sub-triangle T_{x,y}.

    Arrays have the full grid shape; entries outside the sub-triangle are
    NaN.  The corner holds ``h = inf`` and ``g = 0``.
    """

    x: float
    y: float
    gamma: float
    alpha: float
    grid: GridSpec
    ix: int
    iy: int
    h: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    exponent: np.ndarray = field(repr=False)

    @property
    def region(self) -> np.ndarray:
        idx = np.arange(self.grid.n + 1)
        return (idx[:, None] <= idx[None, :]) & (idx[:, None] <= self.ix) & (idx[None, :] <= self.iy)


def comparison_bundle(x: float, y: float, gamma: float, alpha: float, grid: GridSpec) -> ComparisonBundle:
    """Tabulate h and g with the same quadrature as the fixed-point operator."""
    if not (0 < gamma < 1):
        raise ValueError("gamma must lie in (0, 1)")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not (0 < x <= y <= grid.horizon * (1 + 1e-12)):
        raise ValueError("need 0 < x <= y <= horizon")
    ix, iy = grid.index(x), grid.index(y)
    t = grid.times
    idx = np.arange(grid.n + 1)
    region = (idx[:, None] <= idx[None, :]) & (idx[:, None] <= ix) & (idx[None, :] <= iy)
    h = np.where(region, blowup_h(t[:, None], t[None, :], t[ix], t[iy], gamma), np.nan)
    step = grid.step
    hz = np.where(region, h, 0.0)
    inner = np.zeros_like(hz)
    # trapezoid along each row from the diagonal; the corner sits only in the last row
    incr = np.where(region[:, :-1] & region[:, 1:], 0.5 * step * (hz[:, :-1] + hz[:, 1:]), 0.0)
    inner[:, 1:] = np.cumsum(incr, axis=1)
    contrib = np.where(region, step * r_function(inner, alpha, gamma), 0.0)
    expo = np.zeros_like(contrib)
    expo[1:] = np.cumsum(contrib[:-1], axis=0)
    with np.errstate(invalid="ignore", over="ignore"):
        g = np.where(region, h * np.exp(-expo), np.nan)
    g[ix, iy] = 0.0
    expo = np.where(region, expo, np.nan)
    return ComparisonBundle(t[ix], t[iy], gamma, alpha, grid, ix, iy, h, g, expo)


@dataclass(frozen=True)
class DominanceReport:
    hypothesis_checked: bool
    hypothesis_failed: bool
    hypothesis_margin: float
    deltas: tuple[float, ...]
    verified: tuple[bool, ...]
    smallest_verified_delta: float
    implied_constant: float
    inner_cell: tuple[int, int]
    f_inner: float
    h_inner: float

    @property
    def dominates(self) -> bool:
        """f >= h on every node up to one cell short of the corner."""
        return bool(self.verified) and self.verified[0]

    @property
    def certified(self) -> bool:
        """Dominance that is also backed by a checked a-vs-g hypothesis."""
        return self.hypothesis_checked and not self.hypothesis_failed and self.dominates


def delta_ladder(bundle: ComparisonBundle) -> tuple[int, ...]:
    """Cell offsets 1, 2, 4, ... that keep a nonempty sub-triangle."""
    out = []
    k = 1
    while k <= bundle.iy:
        out.append(k)
        k *= 2
    return tuple(out)


def comparison_dominates(f, bundle: ComparisonBundle, a=None, beta: float | None = None,
                         deltas: tuple[int, ...] | None = None) -> DominanceReport:
    """Check ``exp(beta t) a >= g`` on T_{x,y} and ``f >= h`` on T_{x,y-delta}.

    ``deltas`` are offsets in grid cells; the default ladder is 1, 2, 4, ...
    so the innermost check stops one cell short of the corner.  A failed
    hypothesis is reported, not raised.
    """
    fv = f.values if hasattr(f, "values") else np.asarray(f, dtype=float)
    t = bundle.grid.times
    region = bundle.region
    checked = a is not None
    failed = False
    margin = math.nan
    if checked:
        av = a.values if hasattr(a, "values") else np.asarray(a, dtype=float)
        b = 0.0 if beta is None else float(beta)
        lhs = np.exp(b * t)[:, None] * av
        diff = np.where(region, lhs - bundle.g * (1.0 + DOMINANCE_SLACK), np.inf)
        margin = float(np.min(diff))
        failed = margin < 0
    offs = delta_ladder(bundle) if deltas is None else tuple(int(d) for d in deltas)
    idx = np.arange(bundle.grid.n + 1)
    verified = []
    for d in offs:
        sub = region & (idx[None, :] <= bundle.iy - d)
        ok = bool(np.all(fv[sub] >= bundle.h[sub] * (1.0 - DOMINANCE_SLACK)))
        verified.append(ok)
    # smallest delta such that it and every larger delta verify
    smallest = math.inf
    for d, ok in sorted(zip(offs, verified), reverse=True):
        if not ok:
            break
        smallest = d * bundle.grid.step
    if math.isfinite(smallest):
        sub = region & (idx[None, :] <= bundle.iy - int(round(smallest / bundle.grid.step)))
        with np.errstate(invalid="ignore"):
            implied = float(np.min(fv[sub] / bundle.h[sub]))
    else:
        implied = math.nan
    j = bundle.iy - 1
    i = min(bundle.ix, j)
    return DominanceReport(checked, failed, margin, tuple(d * bundle.grid.step for d in offs),
                           tuple(verified), smallest, implied, (i, j), float(fv[i, j]),
                           float(bundle.h[i, j]))


def power_mean_check(knots, values, gamma: float, n: int = 10_000) -> bool:
    """int f**gamma <= (b - a)**(1 - gamma) (int f)**gamma for piecewise-linear f >= 0."""
    knots = np.asarray(knots, dtype=float)
    values = np.asarray(values, dtype=float)
    if not (0 < gamma < 1):
        raise ValueError("gamma must lie in (0, 1)")
    if np.any(values < 0):
        raise ValueError("function must be nonnegative")
    a, b = knots[0], knots[-1]
    xs = np.linspace(a, b, n + 1)
    fx = np.interp(xs, knots, values)
    lhs = np.trapezoid(fx**gamma, xs)
    rhs = (b - a) ** (1.0 - gamma) * np.trapezoid(fx, xs) ** gamma
    return bool(lhs <= rhs + 1e-9)
