"""Jump paths of the driving noise and the coefficient field they induce.

Jumps with ``|y| >= eps`` are simulated exactly as a compound Poisson
process.  Jumps below ``eps`` are replaced by their compensator, a constant
drift ``-int_{eps <= |y| < 1} y nu(dy)`` per unit time; no Gaussian
correction is added.  Each path owns a Philox stream keyed by its 64-bit
seed, so paths are reproducible and can be generated in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EpsRequired, JumpBelowFloor, NumericOverflow
from .measures import (
    FULL_STABLE_KINDS,
    MeasureKind,
    ValidatedMeasure,
    VolatilitySpec,
    tabulated_moment,
)

DEFAULT_EPS = 1e-4


def path_seed(master: int, index: int) -> int:
    """64-bit seed of path ``index`` under ``master``."""
    words = np.random.SeedSequence([int(master), int(index)]).generate_state(2, dtype=np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


@dataclass(frozen=True, eq=False)
class JumpPath:
    """One realisation: jump times/sizes on [0, horizon] plus compensator drift."""

    times: np.ndarray
    sizes: np.ndarray
    horizon: float
    truncation_eps: float
    compensator_rate: float
    seed: int

    @property
    def jumps(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.sizes.tolist()))

    def value_at(self, t) -> np.ndarray:
        """L(t) = sum of jumps up to t plus compensator drift."""
        t = np.asarray(t, dtype=float)
        csum = np.concatenate([[0.0], np.cumsum(self.sizes)])
        idx = np.searchsorted(self.times, t, side="right")
        return csum[idx] + self.compensator_rate * t

    def terminal_value(self) -> float:
        return float(np.sum(self.sizes) + self.compensator_rate * self.horizon)

    def coarsen(self, measure: ValidatedMeasure, eps: float) -> "JumpPath":
        """The same path with jumps below ``eps`` folded into the compensator."""
        if eps < self.truncation_eps:
            raise ValueError("can only coarsen to a larger cutoff")
        keep = np.abs(self.sizes) >= eps
        return JumpPath(self.times[keep], self.sizes[keep], self.horizon, eps,
                        compensator_rate(measure, eps), self.seed)


# ---------------------------------------------------------------------------
# restricted measure: side masses, inverse CDFs, compensator

def _stable_sides(m: ValidatedMeasure, eps: float):
    """[(mass, sampler(u))] for the restriction of a stable measure to |y| >= eps."""
    rho = m.rho
    kind = m.kind
    e = eps ** (-rho)
    sides = []
    pos_bounded = kind in (MeasureKind.TRUNCATED_STABLE_POSITIVE, MeasureKind.TRUNCATED_STABLE_SYMMETRIC)
    if kind in (MeasureKind.TRUNCATED_STABLE_POSITIVE, MeasureKind.TRUNCATED_STABLE_SYMMETRIC,
                MeasureKind.FULL_STABLE_POSITIVE, MeasureKind.FULL_STABLE_TWO_SIDED):
        if pos_bounded:
            if eps < 1.0:
                sides.append(((e - 1.0) / rho, lambda u: (e * (1.0 - u) + u) ** (-1.0 / rho)))
        else:
            sides.append((e / rho, lambda u: eps * (1.0 - u) ** (-1.0 / rho)))
    if kind in (MeasureKind.TRUNCATED_STABLE_NEGATIVE, MeasureKind.TRUNCATED_STABLE_SYMMETRIC,
                MeasureKind.FULL_STABLE_TWO_SIDED) and eps < 1.0:
        sides.append(((e - 1.0) / rho, lambda u: -((e * (1.0 - u) + u) ** (-1.0 / rho))))
    return sides


def _tab_segments(m: ValidatedMeasure, eps: float):
    """Segments (x0, x1, p0, p1) of the tabulated density restricted to |y| >= eps."""
    x = np.asarray(m.spec.knots)
    p = np.asarray(m.spec.values)
    segs = []
    for x0, x1, p0, p1 in zip(x[:-1], x[1:], p[:-1], p[1:]):
        pieces = [(x0, x1)]
        if eps > 0:
            pieces = [(a, b) for a, b in ((x0, min(x1, -eps)), (max(x0, eps), x1)) if b > a]
        for a, b in pieces:
            pa = p0 + (p1 - p0) * (a - x0) / (x1 - x0)
            pb = p0 + (p1 - p0) * (b - x0) / (x1 - x0)
            if pa + pb > 0:
                segs.append((a, b, pa, pb))
    return segs


def _tab_sampler(segs):
    a = np.array([s[0] for s in segs])
    w = np.array([s[1] - s[0] for s in segs])
    p0 = np.array([s[2] for s in segs])
    p1 = np.array([s[3] for s in segs])
    mass = 0.5 * (p0 + p1) * w
    cum = np.concatenate([[0.0], np.cumsum(mass)])
    slope = (p1 - p0) / w

    def sample(u):
        r = u * cum[-1]
        k = np.clip(np.searchsorted(cum, r, side="right") - 1, 0, len(segs) - 1)
        r = np.clip(r - cum[k], 0.0, mass[k])
        # p0 d + slope d^2 / 2 = r, written without cancellation
        d = 2.0 * r / (p0[k] + np.sqrt(np.maximum(p0[k] ** 2 + 2.0 * slope[k] * r, 0.0)))
        return a[k] + np.minimum(d, w[k])

    return float(cum[-1]), sample


def jump_sides(m: ValidatedMeasure, eps: float):
    """Mass and inverse CDF of each side of the measure restricted to |y| >= eps."""
    if m.kind is MeasureKind.EXPONENTIAL_JUMPS:
        c, theta = m.spec.params
        return [((c / theta) * math.exp(-theta * eps), lambda u: eps - np.log1p(-u) / theta)]
    if m.kind is MeasureKind.FINITE_ACTIVITY_TABULATED:
        segs = _tab_segments(m, eps)
        if not segs:
            return []
        mass, sampler = _tab_sampler(segs)
        return [(mass, sampler)]
    return _stable_sides(m, eps)


def compensator_rate(m: ValidatedMeasure, eps: float) -> float:
    """-int_{eps <= |y| < 1} y nu(dy)."""
    kind = m.kind
    if kind in (MeasureKind.TRUNCATED_STABLE_SYMMETRIC, MeasureKind.FULL_STABLE_TWO_SIDED):
        return 0.0
    if kind is MeasureKind.EXPONENTIAL_JUMPS:
        if eps >= 1.0:
            return 0.0
        c, theta = m.spec.params
        return -c * (math.exp(-theta * eps) * (1.0 + theta * eps)
                     - math.exp(-theta) * (1.0 + theta)) / theta**2
    if kind is MeasureKind.FINITE_ACTIVITY_TABULATED:
        k, v = m.spec.knots, m.spec.values
        if eps >= 1.0:
            return 0.0
        return -(tabulated_moment(k, v, 1, eps, 1.0) + tabulated_moment(k, v, 1, -1.0, -eps))
    if eps >= 1.0:
        return 0.0
    rho = m.rho
    first = -math.log(eps) if rho == 1.0 else (1.0 - eps ** (1.0 - rho)) / (1.0 - rho)
    sign = -1.0 if kind is MeasureKind.TRUNCATED_STABLE_NEGATIVE else 1.0
    return -sign * first


def simulate_path(measure: ValidatedMeasure, horizon: float, eps: float, seed: int) -> JumpPath:
    """Simulate the jumps of size ``|y| >= eps`` on [0, horizon].

    Jump times are cumulative exponential spacings; sizes are drawn by
    inverting the CDF of the normalised restricted measure.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0 and not measure.is_finite_activity:
        raise EpsRequired(f"{measure.kind.value} has infinite activity; a cutoff eps > 0 is required")
    rng = make_rng(seed)
    sides = [(mass, fn) for mass, fn in jump_sides(measure, eps) if mass > 0]
    rate = sum(mass for mass, _ in sides)
    times = _arrival_times(rng, rate, horizon)
    n = times.size
    if n == 0 or not sides:
        sizes = np.zeros(0)
    elif len(sides) == 1:
        sizes = sides[0][1](rng.random(n))
    else:
        pick = rng.random(n) * rate < sides[0][0]
        u = rng.random(n)
        sizes = np.where(pick, sides[0][1](u), sides[1][1](u))
    return JumpPath(times, np.asarray(sizes, dtype=float), float(horizon), float(eps),
                    compensator_rate(measure, eps), int(seed))


def _arrival_times(rng: np.random.Generator, rate: float, horizon: float) -> np.ndarray:
    if rate <= 0:
        return np.zeros(0)
    mean = rate * horizon
    block = int(mean + 6.0 * math.sqrt(mean) + 16)
    chunks = []
    last = 0.0
    while True:
        t = last + np.cumsum(rng.standard_exponential(block)) / rate
        inside = t[t <= horizon]
        chunks.append(inside)
        if inside.size < block:
            break
        last = float(t[-1])
    return np.concatenate(chunks)


# ---------------------------------------------------------------------------
# coefficient field

@dataclass(frozen=True, eq=False)
class CoefficientField:
    """a(t_i, T_j) on the grid triangle, NaN below the diagonal."""

    grid: "GridSpec"
    values: np.ndarray
    sup_a: float

    def scaled(self, factor: float) -> "CoefficientField":
        return CoefficientField(self.grid, self.values * factor, self.sup_a * factor)


def initial_curve(f0) -> Callable[[np.ndarray], np.ndarray]:
    """Turn a constant, a callable or a (knots, values) pair into a curve."""
    if callable(f0):
        return f0
    if isinstance(f0, tuple) and len(f0) == 2:
        knots, vals = (np.asarray(v, dtype=float) for v in f0)
        return lambda T: np.interp(T, knots, vals)
    value = float(f0)
    return lambda T: np.full(np.shape(T), value)


def a_field(path: JumpPath, f0, vol: VolatilitySpec, grid) -> CoefficientField:
    """a(t, T) = f0(T) exp(rate int_0^t lambda) prod_{s <= t} (1 + lambda(s) dL(s))."""
    t = grid.times
    curve = initial_curve(f0)(t)
    if np.any(~(curve > 0)):
        raise ValueError("the initial curve must be positive")
    lam_jump = vol.at(path.times)
    factors = 1.0 + lam_jump * path.sizes
    if np.any(factors <= 0):
        bad = int(np.argmin(factors))
        raise JumpBelowFloor(
            f"jump {path.sizes[bad]!r} at t={path.times[bad]!r} gives factor {factors[bad]!r} <= 0"
        )
    # a jump at s affects every row with t_i >= s
    rows = np.searchsorted(t, path.times, side="left")
    logs = np.bincount(rows, weights=np.log1p(lam_jump * path.sizes), minlength=t.size + 1)[: t.size]
    exponent = np.cumsum(logs) + path.compensator_rate * vol.integral(t)
    if np.any(exponent > 709.0):
        raise NumericOverflow("coefficient field exponent exceeds 709")
    values = np.exp(exponent)[:, None] * curve[None, :]
    values = np.where(grid.mask, values, np.nan)
    return CoefficientField(grid, values, float(np.nanmax(values)))
