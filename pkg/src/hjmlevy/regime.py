"""Existence / non-existence regimes for bounded forward-rate fields.

Two sufficient conditions are checked numerically:

* growth gap: ``ln z - lambda_high * T * J'(z)`` unbounded above, which
  gives a bounded solution;
* power lower bound: ``J'(z) >= alpha z**gamma + beta`` for all ``z >= 0``
  with ``alpha > 0`` and ``gamma`` in (0, 1), which rules bounded
  solutions out when the volatility is identically one.

Neither can be decided exactly on a computer.  The gap is required to grow
monotonically over the last two decades of a grid ending at 1e12 and to
clear a threshold; power bounds are only reported after they have been
verified at sampled points.  Anything else is ``INDETERMINATE``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NumericOverflow
from .exponent import ExponentEvaluator, positive_part_j_prime
from .measures import MeasureKind, ValidatedMeasure, VolatilitySpec

GAP_GRID = np.logspace(-6, 12, 181)
DEFAULT_THRESHOLD = 10.0
CERT_SLACK = 1e-9


class Verdict(str, Enum):
    EXISTENCE = "Existence"
    NON_EXISTENCE = "NonExistence"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class PowerCertificate:
    """Verified lower bound J'(z) >= alpha z**gamma + beta."""

    alpha: float
    gamma: float
    beta: float
    source: str
    grid: np.ndarray = field(repr=False, compare=False, default=None)
    margin: float = math.nan

    def bound(self, z):
        return self.alpha * np.asarray(z, dtype=float) ** self.gamma + self.beta


@dataclass(frozen=True)
class RegimeReport:
    verdict: Verdict
    certificate: PowerCertificate | None
    gap_max: float
    gap_argmax: float
    grid: np.ndarray = field(repr=False)
    j_prime: np.ndarray = field(repr=False)
    gap: np.ndarray = field(repr=False)
    notes: tuple[str, ...] = ()

    def rows(self):
        """(z, J'(z), gap, certificate bound) rows for tabular output."""
        bound = (self.certificate.bound(self.grid) if self.certificate is not None
                 else np.full(self.grid.shape, math.nan))
        return list(zip(self.grid, self.j_prime, self.gap, bound))


def _safe_j_prime(ev: ExponentEvaluator, z: np.ndarray) -> np.ndarray:
    """J' on a grid, with ``inf`` wherever the exponential overflows."""
    out = np.full(z.shape, math.inf)
    ok = z <= ev.overflow_threshold
    if np.any(ok):
        out[ok] = ev.j_prime(z[ok])
    return out


def growth_gap(ev: ExponentEvaluator, vol: VolatilitySpec, horizon: float,
               grid: np.ndarray = GAP_GRID) -> tuple[np.ndarray, np.ndarray]:
    jp = _safe_j_prime(ev, grid)
    with np.errstate(invalid="ignore"):
        gap = np.log(grid) - vol.lambda_high * horizon * jp
    return jp, gap


def classify(measure: ValidatedMeasure, vol: VolatilitySpec, horizon: float,
             evaluator: ExponentEvaluator | None = None,
             threshold: float = DEFAULT_THRESHOLD) -> RegimeReport:
    """Classify a (measure, volatility, horizon) triple.

    ``EXISTENCE`` needs the growth gap to increase strictly over
    [1e10, 1e12] and to exceed ``threshold`` at 1e12.  ``NON_EXISTENCE``
    needs a verified power certificate and unit volatility.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    ev = evaluator if evaluator is not None else ExponentEvaluator(measure)
    jp, gap = growth_gap(ev, vol, horizon)
    finite = np.isfinite(gap)
    if np.any(finite):
        k = int(np.nanargmax(np.where(finite, gap, -np.inf)))
        gap_max, gap_at = float(gap[k]), float(GAP_GRID[k])
    else:
        gap_max, gap_at = -math.inf, math.nan
    notes: list[str] = []

    tail = GAP_GRID >= 1e10 * (1 - 1e-12)
    tail_gap = gap[tail]
    grows = bool(np.all(np.isfinite(tail_gap)) and np.all(np.diff(tail_gap) > 0)
                 and tail_gap[-1] > threshold)
    lt = vol.lambda_high * horizon
    if (grows and measure.kind is MeasureKind.TRUNCATED_STABLE_POSITIVE
            and measure.rho == 1.0 and lt >= 1.0):
        grows = False
        notes.append("rho=1 with lambda_high*T >= 1 is not covered by the growth criterion")
    if grows:
        return RegimeReport(Verdict.EXISTENCE, None, gap_max, gap_at, GAP_GRID, jp, gap, tuple(notes))

    cert = fit_lower_power(ev)
    if cert is not None and vol.is_unit:
        return RegimeReport(Verdict.NON_EXISTENCE, cert, gap_max, gap_at, GAP_GRID, jp, gap, tuple(notes))
    if cert is not None:
        notes.append("power lower bound holds but the volatility is not identically one")
    else:
        notes.append("no verified power lower bound")
    return RegimeReport(Verdict.INDETERMINATE, cert, gap_max, gap_at, GAP_GRID, jp, gap, tuple(notes))


def certificate_grid(ev: ExponentEvaluator, points: int = 200) -> np.ndarray:
    top = min(1e12, 0.99 * ev.overflow_threshold)
    return np.concatenate([[0.0], np.logspace(-6, math.log10(top), points)])


def verify_power_bound(ev: ExponentEvaluator, alpha: float, gamma: float, beta: float,
                       grid: np.ndarray | None = None, slack: float = CERT_SLACK):
    """Return (ok, margin) for J'(z) >= alpha z^gamma + beta on ``grid``."""
    z = certificate_grid(ev) if grid is None else np.asarray(grid, dtype=float)
    jp = np.asarray(ev.j_prime(z), dtype=float)
    margin = jp - (alpha * z**gamma + beta)
    return bool(np.all(margin >= -slack)), float(np.min(margin))


def fit_lower_power(evaluator: ExponentEvaluator) -> PowerCertificate | None:
    """Find and verify ``(alpha, gamma, beta)`` with J' >= alpha z^gamma + beta.

    Closed-form candidates are tried first; otherwise a power law is fitted
    to the growth of ``J' - J'(0)`` over the upper decades of the grid.
    Returns ``None`` when no candidate survives verification.
    """
    ev = evaluator
    grid = certificate_grid(ev)
    for alpha, gamma, beta, source in _candidates(ev):
        if not (alpha > 0 and 0 < gamma < 1 and math.isfinite(beta)):
            continue
        ok, margin = verify_power_bound(ev, alpha, gamma, beta, grid)
        if ok:
            return PowerCertificate(alpha, gamma, beta, source, grid, margin)
    return None


def _candidates(ev: ExponentEvaluator):
    m = ev.measure
    kind, rho = m.kind, m.rho
    if kind in (MeasureKind.TRUNCATED_STABLE_SYMMETRIC, MeasureKind.FULL_STABLE_TWO_SIDED):
        # J' >= 2/(2 - rho) z - (tail mass) and z >= sqrt(z) - 1
        alpha = 2.0 / (2.0 - rho)
        beta = -alpha - (m.m1_tail if kind is MeasureKind.FULL_STABLE_TWO_SIDED else 0.0)
        yield alpha, 0.5, beta, "symmetric linear bound"
    if kind in (MeasureKind.TRUNCATED_STABLE_POSITIVE, MeasureKind.FULL_STABLE_POSITIVE) and 1.0 < rho < 2.0:
        # J'(z) >= alpha z^(rho - 1) for z >= 1 with alpha = J'_pos(1)
        alpha = float(positive_part_j_prime(1.0, rho))
        beta = -alpha - m.m1_tail
        yield alpha, rho - 1.0, beta, "positive power bound"
    if m.has_negative_jumps and not m.has_positive_jumps:
        # J' convex: J'(z) >= J''(0) z + J'(0) >= J''(0)(sqrt z - 1) + J'(0)
        a2 = float(ev.j_second(0.0))
        yield a2, 0.5, float(ev.j_prime(0.0)) - a2, "convex lower bound"
    fitted = _numeric_fit(ev)
    if fitted is not None:
        yield fitted


def _numeric_fit(ev: ExponentEvaluator):
    top = min(1e12, 0.99 * ev.overflow_threshold)
    if top <= 10.0:
        return None
    z = np.logspace(math.log10(top) - 2.0, math.log10(top), 21)
    try:
        jp = np.asarray(ev.j_prime(z))
        j0 = float(ev.j_prime(0.0))
    except NumericOverflow:
        return None
    rise = jp - j0
    if np.any(rise <= 0) or not np.all(np.isfinite(rise)):
        return None
    slope = float(np.polyfit(np.log(z), np.log(rise), 1)[0])
    if slope <= 0.05:
        return None
    gamma = float(np.clip(slope / 2.0, 0.05, 0.95))
    zz = np.logspace(0, math.log10(top), 200)
    alpha = float(np.min((np.asarray(ev.j_prime(zz)) - j0) / zz**gamma))
    if alpha <= 0:
        return None
    return alpha, gamma, j0 - alpha, "numeric power fit"


def bound_constant(evaluator: ExponentEvaluator, K: float, vol: VolatilitySpec,
                   horizon: float, c_max: float = 1e15, points: int = 1501) -> float | None:
    """Smallest ``c >= K`` with ``ln K + lh T max(J'(lh c T), 0) <= ln c``.

    Any field bounded by ``c`` is mapped by the fixed-point operator to a
    field bounded by ``c`` as long as the coefficient field is below ``K``.
    Returns ``None`` when no ``c <= c_max`` qualifies.
    """
    if not K > 0:
        raise ValueError("K must be positive")
    lt = vol.lambda_high * horizon
    log_k = math.log(K)

    def excess(c: np.ndarray) -> np.ndarray:
        jp = _safe_j_prime(evaluator, lt * np.asarray(c, dtype=float))
        with np.errstate(invalid="ignore"):
            return log_k + lt * np.maximum(jp, 0.0) - np.log(c)

    if excess(np.array([K]))[0] <= 0:
        return float(K)
    if c_max <= K:
        return None
    cs = np.geomspace(K, c_max, points)
    ok = excess(cs) <= 0
    if not np.any(ok):
        return None
    i = int(np.argmax(ok))
    lo, hi = math.log(cs[i - 1]), math.log(cs[i])
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if excess(np.array([math.exp(mid)]))[0] <= 0:
            hi = mid
        else:
            lo = mid
    return math.exp(hi)
