from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from hjmlevy.comparison import (
    blowup_h,
    closed_double_integral,
    comparison_bundle,
    comparison_dominates,
    delta_ladder,
    exponent_exact,
    g_exact,
    inner_h_integral,
    power_mean_check,
    r_function,
)
from hjmlevy.errors import DegenerateDenominator
from hjmlevy.solver import ForwardField, GridSpec


def test_r_function_values():
    assert r_function(1.0, 3.0, 0.4) == 3.0
    assert r_function(4.0, 2.0, 0.5) == 4.0
    assert r_function(0.5, 2.0, 0.5) == 1.0


@settings(max_examples=300, deadline=None)
@given(z=st.floats(0, 1e8), alpha=st.floats(0.01, 50), gamma=st.floats(0.01, 0.99))
def test_r_sandwich(z, alpha, gamma):
    r = r_function(z, alpha, gamma)
    upper = alpha * z**gamma
    assert r <= upper * (1 + 1e-12) + 1e-300
    assert r >= upper - alpha - 1e-9 * upper


def test_r_lower_sandwich_with_unit_offset_fails_for_large_alpha():
    # alpha z^gamma - 1 is only a lower bound when alpha <= 1; the offset must be alpha
    alpha, gamma, z = 8.0, 0.5, 0.25
    assert r_function(z, alpha, gamma) == 2.0
    assert alpha * z**gamma - 1.0 == 3.0


@settings(max_examples=300, deadline=None)
@given(z1=st.floats(0, 1e6), z2=st.floats(0, 1e6), alpha=st.floats(0.01, 50), gamma=st.floats(0.01, 0.99))
def test_r_lipschitz(z1, z2, alpha, gamma):
    d = abs(r_function(z1, alpha, gamma) - r_function(z2, alpha, gamma))
    assert d <= alpha * abs(z1 - z2) * (1 + 1e-12) + 1e-12


def test_h_corner_values():
    assert blowup_h(0.0, 0.0, 1.0, 1.0, 0.5) == 2.0**-6
    assert blowup_h(1.0, 1.0, 1.0, 1.0, 0.5) == math.inf


def test_closed_double_integral():
    assert closed_double_integral(0.0, 0.7, 1.0, 1.0) == 0.0
    ref = integrate.dblquad(lambda u, s: (2.0 - s - u) ** -3, 0, 0.5, lambda s: s, lambda s: 0.5,
                            epsabs=0, epsrel=1e-13)[0]
    assert closed_double_integral(0.5, 0.5, 1.0, 1.0) == pytest.approx(ref, rel=1e-9)
    with pytest.raises(DegenerateDenominator):
        closed_double_integral(1.0, 1.0, 1.0, 1.0)


def test_inner_integral_closed_form():
    for s, T in [(0.1, 0.5), (0.3, 0.95)]:
        ref = integrate.quad(lambda u: blowup_h(s, u, 1.0, 1.0, 0.6), s, T, epsrel=1e-13)[0]
        assert inner_h_integral(s, T, 1.0, 1.0, 0.6) == pytest.approx(ref, rel=1e-11)


def test_bundle_layout():
    b = comparison_bundle(0.5, 1.0, 0.5, 2.0, GridSpec(1.0, 20))
    assert b.h[0, 0] == pytest.approx(1.5**-6)
    assert b.h[10, 20] == math.inf and b.g[10, 20] == 0.0
    assert np.isnan(b.h[11, 15]) and np.isnan(b.g[3, 2])
    assert np.all(np.isfinite(b.g[b.region]))


def test_reconstruction_and_first_order_error():
    errs = []
    for n in (100, 200, 400):
        b = comparison_bundle(1.0, 1.0, 0.5, 2.0, GridSpec(1.0, n))
        t = b.grid.times
        i, j = n // 4, n // 2  # distance 1.25 from the corner
        rec = math.exp(exponent_exact(t[i], t[j], 1.0, 1.0, 0.5, 2.0)) * b.g[i, j]
        errs.append(abs(rec - b.h[i, j]) / b.h[i, j])
    assert errs[-1] < 1e-2
    assert 0.4 < errs[2] / errs[1] < 0.6


def test_g_vanishes_at_the_corner():
    vals = [g_exact(1.0 - r, 1.0 - r / 3, 1.0, 1.0, 0.5, 2.0) for r in (0.1, 0.03, 0.01, 0.003)]
    assert vals == sorted(vals, reverse=True)
    assert vals[-1] < 1e-300
    assert g_exact(1.0, 1.0, 1.0, 1.0, 0.5, 2.0) == 0.0


def test_dominance_of_h_itself_and_of_bounded_field():
    grid = GridSpec(1.0, 40)
    b = comparison_bundle(1.0, 1.0, 0.5, 2.0, grid)
    rep = comparison_dominates(ForwardField(grid, b.h), b)
    assert rep.dominates and all(rep.verified)
    assert rep.implied_constant == pytest.approx(1.0)
    rep = comparison_dominates(ForwardField.constant(grid, 5.0), b)
    assert not rep.dominates
    assert rep.smallest_verified_delta > grid.step
    assert rep.deltas[0] == pytest.approx(grid.step)


def test_hypothesis_is_reported_not_raised():
    grid = GridSpec(1.0, 20)
    b = comparison_bundle(1.0, 1.0, 0.5, 2.0, grid)
    f = ForwardField.constant(grid, np.inf)
    low = ForwardField.constant(grid, 1e-3)
    rep = comparison_dominates(f, b, a=low, beta=-2.0)
    assert rep.hypothesis_checked and rep.hypothesis_failed
    assert rep.dominates and not rep.certified
    rep = comparison_dominates(f, b, a=ForwardField.constant(grid, 1e6), beta=-2.0)
    assert rep.certified
    assert delta_ladder(b) == (1, 2, 4, 8, 16)


def test_power_mean_examples():
    assert power_mean_check([0.0, 1.0], [3.0, 3.0], 0.3)
    xs = np.linspace(0, 1, 10001)
    assert np.trapezoid(np.sqrt(xs), xs) == pytest.approx(2 / 3, abs=1e-5)
    assert power_mean_check([0.0, 1.0], [0.0, 1.0], 0.5)
    with pytest.raises(ValueError):
        power_mean_check([0.0, 1.0], [-1.0, 1.0], 0.5)


@st.composite
def piecewise_linear(draw):
    k = draw(st.integers(2, 8))
    a = draw(st.floats(-5, 5))
    widths = draw(st.lists(st.floats(0.01, 3), min_size=k - 1, max_size=k - 1))
    knots = np.concatenate([[a], a + np.cumsum(widths)])
    values = draw(st.lists(st.floats(0, 100), min_size=k, max_size=k))
    return knots, np.array(values)


@settings(max_examples=200, deadline=None)
@given(fn=piecewise_linear(), gamma=st.floats(0.01, 0.99))
def test_power_mean_property(fn, gamma):
    assert power_mean_check(*fn, gamma, n=2000)
