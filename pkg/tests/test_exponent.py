from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from hjmlevy.errors import NumericOverflow
from hjmlevy.exponent import ExponentEvaluator, Strategy, positive_part_j_prime
from hjmlevy.measures import LevyMeasureSpec as L, MeasureKind, VolatilitySpec as V, validate

# (kind, rho, z, J, J', J'') from 30-digit mpmath quadrature of the defining integrals
STABLE_ORACLE = [
    ("truncated_stable_positive", 0.5, 0.3, 0.028292106197263623, 0.18321424593449892, 0.5585821878367756),
    ("truncated_stable_positive", 0.5, 1.0, 0.27694458640740727, 0.5063517343751459, 0.3789446916409847),
    ("truncated_stable_positive", 0.5, 5.0, 4.072277913791559, 1.208575380778973, 0.07779487252228562),
    ("truncated_stable_positive", 0.5, 25.0, 34.275461490944316, 1.6455092298194418, 0.007089815403055646),
    ("truncated_stable_positive", 1.0, 0.3, 0.04285763299371521, 0.27891951225144357, 0.8639392643942738),
    ("truncated_stable_positive", 1.0, 1.0, 0.4287201581256108, 0.7965995992970532, 0.6321205588285577),
    ("truncated_stable_positive", 1.0, 5.0, 6.932271417635457, 2.1878018729269084, 0.1986524106001829),
    ("truncated_stable_positive", 1.0, 25.0, 70.90228724424283, 3.7960914897702684, 0.03999999999944448),
    ("truncated_stable_positive", 1.5, 0.3, 0.08712943163940202, 0.5717078938027363, 1.816785754065501),
    ("truncated_stable_positive", 1.5, 1.0, 0.9034506482807669, 1.7230554135925926, 1.493648265624854),
    ("truncated_stable_positive", 1.5, 5.0, 17.087914989362083, 5.927722086208441, 0.7914246192210271),
    ("truncated_stable_positive", 1.5, 25.0, 246.0756418175855, 15.724538509055686, 0.3544907701805582),
    ("truncated_stable_negative", 1.5, 0.3, 0.09314101886166787, 0.631901119561683, 2.2193645578561485),
    ("truncated_stable_negative", 1.5, 1.0, 1.1305076655010604, 2.414043326710636, 2.925303491814363),
    ("truncated_stable_negative", 1.5, 5.0, 67.11401817053756, 48.61683727167659, 34.34431554768298),
    ("truncated_stable_negative", 1.5, 25.0, 3218005191.9238334, 3073276283.970865, 2941661499.1348524),
    ("truncated_stable_symmetric", 1.5, 0.3, 0.18027045050106988, 1.2036090133644193, 4.0361503119216495),
    ("truncated_stable_symmetric", 1.5, 1.0, 2.0339583137818273, 4.137098740303228, 4.418951757439217),
    ("truncated_stable_symmetric", 1.5, 5.0, 84.20193315989965, 54.544559357885035, 35.13574016690401),
    ("truncated_stable_symmetric", 1.5, 25.0, 3218005437.9994755, 3073276299.6954036, 2941661499.489343),
    ("full_stable_positive", 1.5, 0.3, -0.21167481748886016, -0.05837408744430079, 3.236043187592832),
    ("full_stable_positive", 1.5, 1.0, 0.3632718012073547, 1.544907701811032, 1.772453850905516),
    ("full_stable_positive", 1.5, 5.0, 16.422181984040073, 5.926654595212022, 0.7926654595212022),
    ("full_stable_positive", 1.5, 25.0, 245.40897515091933, 15.72453850905516, 0.3544907701811032),
    ("full_stable_two_sided", 1.3, 0.3, -0.2371336381613969, 0.1386169265539572, 4.6381462851406345),
    ("full_stable_two_sided", 1.3, 1.0, 0.8253573660487962, 2.79124640432248, 3.555655749755789),
    ("full_stable_two_sided", 1.3, 5.0, 67.08876186803099, 46.92570990620337, 32.49817441488752),
    ("full_stable_two_sided", 1.3, 25.0, 3187910222.186489, 3045967305.0091324, 2916747581.1555443),
]

# exponential jumps (c = theta = 1) and the tabulated density 0 -> 1, 0.5 -> 2, 1.5 -> 0
BOUNDED_ORACLE = [
    ("exp", 0.5, -0.20121277450477565, -0.1802033267873291, 0.5925925925925926),
    ("exp", 2.0, -0.13818443135243597, 0.15313000654600425, 0.07407407407407407),
    ("exp", 10.0, 1.7333202674802444, 0.255976654847198, 0.0015026296018031556),
    ("tab", 0.5, -0.05688010721436024, 0.0395280605365034, 0.5262111904754999),
    ("tab", 2.0, 0.40701409301248964, 0.48958532629733353, 0.15636289252007443),
    ("tab", 10.0, 5.869730488238083, 0.7361886521152955, 0.0030625636847337098),
]


def _measure(kind, rho=None):
    if kind == "exp":
        return validate(L.exponential(1.0, 1.0), V())
    if kind == "tab":
        return validate(L.tabulated([0.0, 0.5, 1.5], [1.0, 2.0, 0.0]), V())
    return validate(L(MeasureKind(kind), rho=rho), V())


@pytest.mark.parametrize("strategy", list(Strategy))
@pytest.mark.parametrize("row", STABLE_ORACLE, ids=lambda r: f"{r[0]}-{r[1]}-{r[2]}" if isinstance(r, tuple) else None)
def test_stable_against_frozen_oracle(row, strategy):
    kind, rho, z, j, jp, js = row
    ev = ExponentEvaluator(_measure(kind, rho), strategy)
    for got, want in ((ev.j(z), j), (ev.j_prime(z), jp), (ev.j_second(z), js)):
        assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("strategy", list(Strategy))
@pytest.mark.parametrize("row", BOUNDED_ORACLE, ids=lambda r: f"{r[0]}-{r[1]}" if isinstance(r, tuple) else None)
def test_bounded_against_frozen_oracle(row, strategy):
    kind, z, j, jp, js = row
    ev = ExponentEvaluator(_measure(kind), strategy)
    for got, want in ((ev.j(z), j), (ev.j_prime(z), jp), (ev.j_second(z), js)):
        assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_j_prime_at_zero_is_minus_tail_mean():
    for spec, want in [(L.full_stable_positive(1.5), -2.0), (L.full_stable_two_sided(1.25), -4.0),
                       (L.truncated_stable_symmetric(1.5), 0.0), (L.exponential(1.0, 1.0), -2 / math.e)]:
        ev = ExponentEvaluator(validate(spec, V()))
        assert ev.j_prime(0.0) == pytest.approx(want, abs=1e-12)
        assert ev.j(0.0) == 0.0


def test_finite_variation_limit():
    ev = ExponentEvaluator(_measure("truncated_stable_positive", 0.5))
    assert abs(ev.j_prime(1e6) - 2.0) < 1e-2
    assert ev.j_prime_limit == 2.0
    # J'(z) = 2 - z**-0.5 * lower_gamma(1/2, z), so the gap closes like sqrt(pi / z)
    assert ev.j_prime(1e6) == pytest.approx(2.0 - math.sqrt(math.pi / 1e6), rel=1e-12)


@pytest.mark.parametrize("kind", ["exp", "tab"])
def test_bounded_j_prime_below_small_first_moment(kind):
    ev = ExponentEvaluator(_measure(kind))
    z = np.logspace(-3, 9, 200)
    assert np.all(ev.j_prime(z) <= ev.measure.positive_small_first_moment + 1e-12)


@pytest.mark.parametrize("spec", [L.truncated_stable_positive(0.5), L.truncated_stable_positive(1.5),
                                  L.truncated_stable_negative(1.5), L.full_stable_two_sided(1.5),
                                  L.exponential(), L.tabulated([0.0, 0.5, 1.5], [1.0, 2.0, 0.0])])
def test_series_and_quadrature_agree_and_j_prime_is_monotone(spec):
    m = validate(spec, V())
    default, quad = ExponentEvaluator(m), ExponentEvaluator(m, Strategy.QUADRATURE_GENERAL)
    z = np.linspace(0.0, 30.0, 61)
    assert np.allclose(default.j_prime(z), quad.j_prime(z), rtol=1e-8, atol=1e-10)
    grid = np.logspace(-6, min(12.0, math.log10(0.99 * default.overflow_threshold)), 200)
    jp = default.j_prime(grid)
    # saturated bounded J' may wobble by an ulp around its limit
    assert np.all(np.diff(jp) >= -4 * np.spacing(np.abs(jp[1:])))


def test_table_tracks_exact_values():
    for spec in [L.full_stable_positive(1.5), L.truncated_stable_negative(1.5), L.truncated_stable_positive(0.5)]:
        ev = ExponentEvaluator(validate(spec, V()))
        z = np.geomspace(1e-8, min(1e8, 0.99 * ev.overflow_threshold), 301)
        exact, fast = ev.j_prime(z), ev.j_prime_fast(z)
        # the table stops at J' = 1e250 and reports inf above it
        assert np.all(np.isinf(fast[exact > 1e251]))
        keep = exact < 1e240
        z, exact, fast = z[keep], exact[keep], fast[keep]
        assert np.max(np.abs(fast - exact) / (1.0 + np.abs(exact))) < 1e-6
        assert np.all(np.diff(fast) >= -1e-12 * np.abs(fast[1:]))


def test_positive_part_closed_form():
    # alpha of the power certificate: int_0^1 (1 - e^-v) v^-rho dv
    ref = integrate.quad(lambda v: -math.expm1(-v) * v**-1.5, 0, 1, epsabs=1e-14)[0]
    assert positive_part_j_prime(1.0, 1.5) == pytest.approx(ref, rel=1e-12)


def test_domain_errors():
    ev = ExponentEvaluator(_measure("truncated_stable_negative", 1.5))
    with pytest.raises(ValueError):
        ev.j_prime(-1.0)
    with pytest.raises(ValueError):
        ev.j(math.nan)
    with pytest.raises(NumericOverflow):
        ev.j_prime(800.0)
    assert ev.overflow_threshold == pytest.approx(709.78)


def test_array_input_keeps_shape():
    ev = ExponentEvaluator(_measure("exp"))
    z = np.array([[0.1, 1.0], [2.0, 3.0]])
    assert ev.j_prime(z).shape == (2, 2)
    assert isinstance(ev.j_prime(1.0), float)
