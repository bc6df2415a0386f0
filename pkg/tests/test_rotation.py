from fractions import Fraction

import pytest
from gmpy2 import mpfr

from circlelab.cfarith import cf_expand, from_quotients
from circlelab.errors import (BracketError, MonotonicityViolation, PeriodicOrbitDetected,
                              PreconditionError, ResourceCapExceeded)
from circlelab.maps import family, make_arnold, make_rotation
from circlelab.numerics import CirclePoint, hr, mod1, to_fraction
from circlelab.rotation import (RationalHit, affordable_depth, cf_order, compare_to_target,
                                dynamical_levels, partial_quotients_dynamical,
                                rotation_number_birkhoff, rotation_number_dynamical,
                                target_fraction, tune_parameter)

from conftest import T_STAR


def test_birkhoff_rotation_is_exact(golden):
    for N in (100, 1000, 12345):
        est = rotation_number_birkhoff(make_rotation(golden.value), N)
        assert abs(est.value - golden.value) < mpfr("1e-48")
        assert est.residual == mpfr(1) / N


def test_birkhoff_fixed_point():
    assert rotation_number_birkhoff(make_arnold(0, "0.5"), 1000).value == 0


def test_birkhoff_errors():
    T = make_arnold("0.2", "0.5")
    with pytest.raises(PreconditionError):
        rotation_number_birkhoff(T, 99)
    with pytest.raises(ResourceCapExceeded):
        rotation_number_birkhoff(T, 1000, cap=500)


def test_birkhoff_agrees_with_dynamical_estimate():
    T = make_arnold("0.25", "0.5")
    b = rotation_number_birkhoff(T, 10**5)
    d = rotation_number_dynamical(T, 9)
    assert abs(b.value - d.value) < mpfr("1e-5")
    assert d.residual < mpfr("1e-5")


def test_birkhoff_residual_shrinks():
    T = make_arnold("0.25", "0.5")
    rs = [rotation_number_birkhoff(T, N).residual for N in (100, 1000, 10000)]
    assert rs[0] > rs[1] > rs[2] > 0


@pytest.mark.parametrize("kind, levels", [("golden", 20), ("silver", 12)])
def test_dynamical_quotients_of_rotations(kind, levels):
    cf = target_fraction(kind)
    got = partial_quotients_dynamical(make_rotation(cf.value), levels)
    assert got.quotients == cf.quotients[:levels]
    for n in range(-1, levels + 1):
        assert got.q(n) == cf.q(n) and got.p(n) == cf.p(n)


def test_dynamical_quotients_of_generic_rotation():
    import gmpy2
    rho = gmpy2.sqrt(mpfr(7)) - 2
    cf = cf_expand(rho, 6)
    got = partial_quotients_dynamical(make_rotation(rho), 6)
    assert got.quotients == cf.quotients


def test_rational_rotation_detected():
    with pytest.raises(PeriodicOrbitDetected):
        partial_quotients_dynamical(make_rotation(hr(Fraction(2, 7))), 10)
    events = list(dynamical_levels(make_rotation(hr(Fraction(2, 7)))))
    assert events[-1] == RationalHit(2, 7)


def test_tongue_does_not_certify_quotients():
    with pytest.raises((PeriodicOrbitDetected, ResourceCapExceeded)):
        partial_quotients_dynamical(make_arnold("0.5", "0.9"), 10, cap=10**5)


def test_cf_order():
    assert cf_order((1, 1), (1, 1)) == 0
    assert cf_order((2,), (1,)) == -1          # 1/2 < 1/1
    assert cf_order((1, 2), (1, 1)) == 1       # 2/3 > 1/2
    a, b = (2, 3, 1), (2, 4, 7)
    assert cf_order(a, b) == (1 if Fraction(1, 2 + Fraction(1, 3 + 1)) >
                              Fraction(1, 2 + Fraction(1, 4 + Fraction(1, 7))) else -1)


def test_compare_orders_rotations(golden):
    lo = compare_to_target(make_rotation("0.6"), golden, 20)
    hi = compare_to_target(make_rotation("0.62"), golden, 20)
    same = compare_to_target(make_rotation(golden.value), golden, 20)
    assert (lo.sign, hi.sign, same.sign) == (-1, 1, 0)
    assert same.levels == 20


def test_affordable_depth(golden, silver):
    assert affordable_depth(golden) == 25
    assert affordable_depth(silver) == 14


def test_tune_rotation_family_is_exact(golden):
    res = tune_parameter(family("rotation"), golden, 15)
    assert res.t == golden.value
    assert res.quotients[:15] == (1,) * 15


def test_tune_arnold_golden(arnold_golden, golden):
    assert arnold_golden.quotients[:15] == (1,) * 15
    assert 0 < arnold_golden.t < 1
    assert arnold_golden.t == hr(T_STAR[("arnold", "golden")])
    again = partial_quotients_dynamical(arnold_golden.map, 15)
    assert again.quotients == (1,) * 15
    assert abs(arnold_golden.estimate.value - golden.value) <= arnold_golden.estimate.residual
    assert arnold_golden.estimate.residual < mpfr("1e-10")


def test_tune_two_harmonic_golden(two_harmonic_golden):
    assert two_harmonic_golden.t == hr(T_STAR[("two_harmonic", "golden")])
    assert two_harmonic_golden.quotients == (1,) * 25


def test_tune_arnold_strong_silver_cross_check(silver):
    res = tune_parameter(family("arnold", "0.9"), silver, 10)
    assert res.quotients[:10] == (2,) * 10
    # (L^q(x) - x)/q at a convergent denominator is within ~1/q^2 of rho
    N = silver.q(12)
    b = rotation_number_birkhoff(res.map, N)
    assert abs(b.value - silver.value) < mpfr("1e-8")
    assert abs(b.value - res.estimate.value) < mpfr("1e-8")


def test_tuned_order_matches_rotation(arnold_silver, silver):
    from circlelab.maps import orbit
    orb = orbit(arnold_silver.map, CirclePoint(mpfr(0)), 200)
    rho = silver.value
    assert sorted(range(201), key=orb.fracs.__getitem__) == \
        sorted(range(201), key=lambda i: mod1(i * rho).position)


def test_tune_depth_beyond_budget(golden):
    with pytest.raises(ResourceCapExceeded) as e:
        tune_parameter(family("arnold", "0.5"), golden, 30)
    assert e.value.level_reached == 25


def test_tune_target_too_short():
    with pytest.raises(PreconditionError):
        tune_parameter(family("arnold", "0.5"), from_quotients([1, 1, 1]), 5)


def test_tune_bracket_error(golden):
    squeezed = lambda t: make_arnold(t / 4, "0.5")
    with pytest.raises(BracketError):
        tune_parameter(squeezed, golden, 5)


def test_tune_detects_non_monotone_family(golden):
    # rho(0.25) ~ 0.9 = [1, 9, ..] lies above rho(0.5) ~ 0.65 = [1, 1, 1, 5, ..]
    knots = [(0, 0), ("0.25", "0.9"), ("0.5", "0.65"), (1, 1)]

    def g(t):
        for (a, fa), (b, fb) in zip(knots, knots[1:]):
            a, fa, b, fb = map(mpfr, (a, fa, b, fb))
            if t <= b:
                return fa + (t - a) * (fb - fa) / (b - a)

    with pytest.raises(MonotonicityViolation):
        tune_parameter(lambda t: make_arnold(g(mpfr(t)), "0.1"), golden, 5)


def test_target_fraction_caps_at_precision():
    cf = target_fraction("golden", levels=500)
    assert 90 < cf.depth < 200
    assert to_fraction(cf.value) == to_fraction(target_fraction("golden").value)
