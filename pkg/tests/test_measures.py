from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from hjmlevy.errors import IntegrabilityViolation, MeasureError, RhoBoundaryError, SupportViolation
from hjmlevy.measures import (
    LevyMeasureSpec as L,
    MeasureKind,
    VolatilitySpec as V,
    mass_moments,
    tabulated_moment,
    validate,
)


@pytest.mark.parametrize("rho", [2.0, 2.5])
def test_rho_at_or_above_two_is_not_square_integrable(rho):
    with pytest.raises(IntegrabilityViolation):
        validate(L.truncated_stable_symmetric(rho), V())


@pytest.mark.parametrize("rho", [0.5, 1.0])
def test_full_stable_needs_rho_above_one(rho):
    with pytest.raises(IntegrabilityViolation):
        validate(L.full_stable_positive(rho), V())


def test_rho_boundaries():
    with pytest.raises(RhoBoundaryError):
        validate(L.truncated_stable_negative(0.0), V())
    with pytest.raises(RhoBoundaryError):
        validate(L.truncated_stable_negative(1.0), V())
    with pytest.raises(MeasureError):
        validate(L.truncated_stable_positive(-0.5), V())
    assert validate(L.truncated_stable_positive(1.0), V()).rho == 1.0


def test_support_floor_depends_on_volatility():
    # jumps down to -1 are fine for lambda_high = 1 (open end) but not for 2
    validate(L.truncated_stable_negative(1.5), V.constant(1.0))
    with pytest.raises(SupportViolation):
        validate(L.truncated_stable_negative(1.5), V.constant(2.0, 2.0, 2.0))
    with pytest.raises(SupportViolation):
        validate(L.tabulated([-1.5, 0.0], [1.0, 1.0]), V())


def test_validate_is_idempotent():
    m = validate(L.exponential(), V())
    assert validate(m, V()) == m


def test_stable_moments():
    m2, m1, total = mass_moments(validate(L.full_stable_two_sided(1.5), V()))
    assert m2 == pytest.approx(4.0)  # 2 / (2 - rho)
    assert m1 == pytest.approx(2.0)  # 1 / (rho - 1)
    assert total == math.inf
    assert mass_moments(validate(L.truncated_stable_positive(0.5), V()))[1] == 0.0


def test_exponential_moments_match_quadrature():
    c, theta = 1.3, 0.7
    m = validate(L.exponential(c, theta), V())
    dens = lambda y: c * math.exp(-theta * y)
    assert m.m2_small == pytest.approx(integrate.quad(lambda y: y * y * dens(y), 0, 1)[0], rel=1e-12)
    assert m.m1_tail == pytest.approx(integrate.quad(lambda y: y * dens(y), 1, np.inf)[0], rel=1e-10)
    assert m.total_mass == pytest.approx(c / theta)
    assert m.positive_small_first_moment == pytest.approx(
        integrate.quad(lambda y: y * dens(y), 0, 1)[0], rel=1e-12)


def test_tabulated_moment_is_exact():
    knots, vals = [-0.5, 0.0, 0.8, 2.0], [1.0, 3.0, 0.5, 0.0]
    p = lambda y: np.interp(y, knots, vals)
    for k in range(3):
        for lo, hi in [(-math.inf, math.inf), (0.2, 1.0), (-0.3, 0.1)]:
            a, b = max(lo, knots[0]), min(hi, knots[-1])
            ref = integrate.quad(lambda y: y**k * p(y), a, b, points=[0.0, 0.8], epsabs=1e-14)[0]
            assert tabulated_moment(knots, vals, k, lo, hi) == pytest.approx(ref, abs=1e-12)


def test_tabulated_validation():
    with pytest.raises(MeasureError):
        validate(L.tabulated([0.0, 1.0], [-1.0, 1.0]), V())
    with pytest.raises(MeasureError):
        validate(L.tabulated([1.0, 0.0], [1.0, 1.0]), V())
    with pytest.raises(MeasureError):
        validate(L.tabulated([0.0, 1.0], [0.0, 0.0]), V())


def test_mapping_round_trip():
    for spec in [L.truncated_stable_negative(1.5), L.exponential(2.0, 3.0),
                 L.tabulated([0.0, 0.5, 1.5], [1.0, 2.0, 0.0])]:
        assert L.from_mapping(spec.to_mapping()) == spec
    with pytest.raises(MeasureError):
        L.from_mapping({"kind": "no_such_kind"})


def test_support_and_flags():
    s = L.full_stable_two_sided(1.5)
    assert s.support == (-1.0, math.inf)
    assert s.kind is MeasureKind.FULL_STABLE_TWO_SIDED
    m = validate(L.truncated_stable_negative(1.5), V())
    assert m.has_negative_jumps and not m.has_positive_jumps
    assert validate(L.exponential(), V()).is_finite_activity


def test_volatility():
    with pytest.raises(MeasureError):
        V.constant(0.5, 0.5, 0.9)  # lambda_high below one
    with pytest.raises(MeasureError):
        V(form="quadratic")
    lin = V.separable_linear(1.0, 2.0, 1.0, 2.0)
    t = np.linspace(0, 1, 2001)
    assert lin.at(np.array([0.0, 0.25, 1.0])).tolist() == [1.0, 1.5, 2.0]
    # integral of the clamped line against the trapezoid rule
    assert float(lin.integral(1.0)) == pytest.approx(np.trapezoid(lin.at(t), t), abs=1e-6)
    assert V().is_unit and not lin.is_unit
