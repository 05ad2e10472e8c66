"""Discrete fixed-point operator for forward-rate fields and its solvers.

On the uniform triangle ``t_i <= T_j`` (``t_i = i * step``) the operator is

    (A f)(t_i, T_j) = a(t_i, T_j) exp( sum_{k < i} step lambda(t_k) J'(I_k(T_j)) ),
    I_k(T_j)        = trapezoid of lambda(t_k) f(t_k, u) over u in [t_k, T_j].

The outer sum uses left endpoints, matching the use of ``f(s-)`` inside the
time integral.  A consequence is that row ``i`` of ``A f`` depends on rows
``k < i`` of ``f`` only, so the discrete fixed point can also be obtained
exactly by marching forward in ``t`` (:func:`march`).  Monotone iteration
from zero reaches it in at most ``n + 1`` steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import MaxIterExceeded, MonotonicityViolation, NumericOverflow
from .exponent import ExponentEvaluator
from .measures import VolatilitySpec

EXPONENT_LIMIT = 700.0
MONOTONE_SLACK = 1e-12

JPrime = Union[ExponentEvaluator, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class GridSpec:
    horizon: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs n >= 2 steps, got {self.n!r}")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def step(self) -> float:
        return self.horizon / self.n

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.step

    @property
    def mask(self) -> np.ndarray:
        idx = np.arange(self.n + 1)
        return idx[:, None] <= idx[None, :]

    def index(self, t: float) -> int:
        """Grid index of a node, raising if ``t`` is not a node."""
        i = int(round(t / self.step))
        if not (0 <= i <= self.n) or abs(i * self.step - t) > 1e-9 * max(1.0, self.horizon):
            raise ValueError(f"{t!r} is not a grid node")
        return i


@dataclass(frozen=True, eq=False)
class ForwardField:
    grid: GridSpec
    values: np.ndarray
    iterations: int = 0
    converged: bool = False
    exploded: bool = False

    @property
    def sup(self) -> float:
        return float(np.nanmax(self.values))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "ForwardField":
        return cls(grid, np.where(grid.mask, float(value), np.nan))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ForwardField":
        return cls.constant(grid, 0.0)


@dataclass(frozen=True, eq=False)
class SolveResult:
    converged: bool
    field: ForwardField
    iterations: int
    history: list[tuple[int, float, float]] = field(repr=False)
    reason: str = ""

    @property
    def diverged(self) -> bool:
        return not self.converged


def _j_prime_fn(jp: JPrime) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(jp, ExponentEvaluator):
        return jp.j_prime_fast
    return jp


def _values(x) -> np.ndarray:
    return x.values if hasattr(x, "values") else np.asarray(x, dtype=float)


def inner_integrals(f: np.ndarray, lam: np.ndarray, step: float) -> np.ndarray:
    """I[k, j] = trapezoid of lam[k] f[k, u] over u from t_k to T_j (zero for j <= k)."""
    n1 = f.shape[0]
    idx = np.arange(n1)
    g = np.where(idx[:, None] <= idx[None, :], f, 0.0) * lam[:, None]
    upper = idx[:, None] <= idx[None, :-1]  # increment m -> m+1 lies in the row
    incr = np.where(upper, 0.5 * step * (g[:, :-1] + g[:, 1:]), 0.0)
    out = np.zeros_like(g)
    out[:, 1:] = np.cumsum(incr, axis=1)
    return out


def _apply(a: np.ndarray, f: np.ndarray, jp, lam: np.ndarray, step: float):
    n1 = a.shape[0]
    idx = np.arange(n1)
    mask = idx[:, None] <= idx[None, :]
    inner = inner_integrals(f, lam, step)
    contrib = np.where(mask, step * lam[:, None] * jp(np.where(mask, inner, 0.0)), 0.0)
    expo = np.zeros_like(contrib)
    expo[1:] = np.cumsum(contrib[:-1], axis=0)
    overflow = bool(np.any(expo[mask] > EXPONENT_LIMIT))
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.where(expo > EXPONENT_LIMIT, np.inf, a * np.exp(np.minimum(expo, EXPONENT_LIMIT)))
    out = np.where(a == 0.0, 0.0, out)
    return np.where(mask, out, np.nan), overflow


def apply_A(a, f, evaluator: JPrime, vol: VolatilitySpec) -> ForwardField:
    """One application of the fixed-point operator.

    Raises :class:`NumericOverflow` when an exponent passes 700; that is
    evidence of explosion rather than a floating-point accident.
    """
    av, fv = _values(a), _values(f)
    if av.shape != fv.shape:
        raise ValueError("coefficient and forward fields have different shapes")
    grid = a.grid if hasattr(a, "grid") else f.grid
    lam = vol.at(grid.times)
    out, overflow = _apply(av, fv, _j_prime_fn(evaluator), lam, grid.step)
    if overflow:
        raise NumericOverflow("operator exponent exceeds 700")
    return ForwardField(grid, out)


def march(a, evaluator: JPrime, vol: VolatilitySpec) -> ForwardField:
    """Exact discrete fixed point, computed row by row in extended reals.

    Entries are ``inf`` where the exponent passes 700; such entries only
    feed ``inf`` forward, which is how an exploding field is represented.
    """
    av = _values(a)
    grid = a.grid
    jp = _j_prime_fn(evaluator)
    lam = vol.at(grid.times)
    n1 = av.shape[0]
    step = grid.step
    f = np.full_like(av, np.nan)
    expo = np.zeros(n1)
    exploded = False
    for i in range(n1):
        row = slice(i, n1)
        with np.errstate(over="ignore"):
            vals = np.where(expo[row] > EXPONENT_LIMIT, np.inf,
                            av[i, row] * np.exp(np.minimum(expo[row], EXPONENT_LIMIT)))
        vals = np.where(av[i, row] == 0.0, 0.0, vals)
        exploded |= bool(np.any(np.isinf(vals)))
        f[i, row] = vals
        if i + 1 < n1:
            g = lam[i] * vals
            inner = np.concatenate([[0.0], np.cumsum(0.5 * step * (g[:-1] + g[1:]))])
            expo[row] += step * lam[i] * jp(inner)
    return ForwardField(grid, f, iterations=0, converged=not exploded, exploded=exploded)


def solve_fixed_point(a, evaluator: JPrime, vol: VolatilitySpec, max_iter: int = 200,
                      tol: float = 1e-8, ceiling: float = 1e12,
                      start: ForwardField | np.ndarray | None = None) -> SolveResult:
    """Monotone iteration ``h_{n+1} = A h_n``.

    Starting from zero the iterates increase pointwise.  A custom ``start``
    must be a sub- or super-solution; the direction is read off the first
    step and enforced afterwards.  Convergence is declared when
    ``sup|h_{n+1} - h_n| / (1 + sup h_n) < tol``; divergence when the sup
    passes ``ceiling`` or an exponent overflows, in which case the returned
    field is the marched extended-real fixed point.
    """
    grid = a.grid
    av = _values(a)
    jp = _j_prime_fn(evaluator)
    lam = vol.at(grid.times)
    mask = grid.mask
    h = np.where(mask, 0.0, np.nan) if start is None else np.array(_values(start), dtype=float)
    direction = 1 if start is None else 0
    history: list[tuple[int, float, float]] = []
    sups = [float(np.nanmax(h))]
    for it in range(1, max_iter + 1):
        new, overflow = _apply(av, h, jp, lam, grid.step)
        sup_new = float(np.nanmax(new))
        if overflow or not math.isfinite(sup_new) or sup_new > ceiling:
            history.append((it, sup_new, math.inf))
            reason = "exponent overflow" if overflow else f"sup exceeded ceiling {ceiling:g}"
            field_ = march(a, evaluator, vol)
            field_ = ForwardField(grid, field_.values, it, False, True)
            return SolveResult(False, field_, it, history, reason)
        diff = (new - h)[mask]
        if direction == 0:
            direction = 1 if np.all(diff >= 0) else (-1 if np.all(diff <= 0) else 2)
            if direction == 2:
                raise MonotonicityViolation("start is neither a sub- nor a super-solution")
        slack = MONOTONE_SLACK * (1.0 + np.abs(h[mask]))
        if np.any(direction * diff < -slack):
            bad = int(np.argmin(direction * diff + slack))
            raise MonotonicityViolation(
                f"iteration {it}: step {diff[bad]!r} against the monotone direction"
            )
        delta = float(np.max(np.abs(diff)))
        history.append((it, sup_new, delta))
        sups.append(sup_new)
        h = new
        if delta / (1.0 + sups[-2]) < tol:
            return SolveResult(True, ForwardField(grid, h, it, True, False), it, history, "converged")
    raise MaxIterExceeded(max_iter, (sups[-2], sups[-1]))


def bond_price(f: ForwardField, t: float, T: float) -> float:
    """exp(-trapezoid of f(t, .) over [t, T]) for grid nodes t <= T."""
    g = f.grid
    i, j = g.index(t), g.index(T)
    if j < i:
        raise ValueError("bond maturity precedes valuation time")
    row = f.values[i, i: j + 1]
    return float(math.exp(-np.trapezoid(row, dx=g.step))) if j > i else 1.0
