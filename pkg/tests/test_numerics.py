import random
from fractions import Fraction

import gmpy2
import pytest
from gmpy2 import mpfr
from hypothesis import given, settings
from hypothesis import strategies as st

from circlelab.errors import PrecisionMismatch, PreconditionError
from circlelab.maps import family, orbit
from circlelab.numerics import (Arc, CirclePoint, NeumaierAccumulator, Precision, check_precision,
                                circle_distance, compensated_sum, geometric_rate,
                                golden_section_max, hr, loglog_slope, maximize_on_circle, mod1,
                                prefix_sums, to_decimal, to_fraction)


def ulp(x):
    x = abs(mpfr(x))
    return gmpy2.next_above(x) - x


def test_precision_bits_and_floor():
    p = Precision(50)
    assert p.bits == 171
    assert p.floor == hr("1e-40", p)
    with pytest.raises(PreconditionError):
        Precision(16)


def test_context_sets_mpfr_precision():
    with Precision(30).context():
        assert mpfr(1).precision == Precision(30).bits
    assert mpfr(1).precision == 171


def test_mixing_precisions_is_an_error():
    with Precision(30).context():
        x = mpfr(1)
    with pytest.raises(PrecisionMismatch):
        check_precision(Precision(50), x)


@pytest.mark.parametrize("x, want", [("1.25", "0.25"), ("-0.25", "0.75"), ("0", "0")])
def test_mod1_examples(x, want):
    assert mod1(mpfr(x)).position == mpfr(want)


def test_mod1_rejects_nonfinite():
    with pytest.raises(PreconditionError):
        mod1(mpfr("inf"))


def test_mod1_tiny_negative_stays_below_one():
    assert 0 <= mod1(-mpfr("1e-60")).position < 1


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=-1000, max_value=1000))
def test_mod1_idempotent(q):
    x = hr(q)
    once = mod1(x)
    assert mod1(once.position) == once
    assert 0 <= once.position < 1


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True),
       st.floats(0, 1, exclude_max=True))
def test_arc_invariants(a, b, c):
    arc = Arc(CirclePoint(mpfr(a)), CirclePoint(mpfr(b)))
    assert 0 <= arc.length < 1
    assert arc.contains(arc.start) and arc.contains(arc.end)
    p = CirclePoint(mpfr(c))
    assert arc.contains(p) == (mod1(mpfr(c) - mpfr(a)).position <= arc.length)


def test_circle_distance_is_symmetric_and_short():
    assert circle_distance(mpfr("0.1"), mpfr("0.9")) == circle_distance(mpfr("0.9"), mpfr("0.1"))
    assert abs(circle_distance(mpfr("0.1"), mpfr("0.9")) - mpfr("0.2")) < mpfr("1e-49")


def test_compensated_sum_cancellation():
    assert compensated_sum([mpfr(1), mpfr("1e-30"), mpfr(-1)]) == mpfr("1e-30")
    assert compensated_sum([]) == 0


def test_compensated_sum_million_tenths():
    x = mpfr("0.1")
    s = compensated_sum([x] * 10**6)
    exact = to_fraction(x) * 10**6
    assert abs(to_fraction(s) - exact) <= 2 * to_fraction(ulp(s))
    assert abs(s - 10**5) < mpfr("1e-40")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=200),
       st.randoms(use_true_random=False))
def test_compensated_sum_permutation_invariant(xs, rnd):
    vals = [mpfr(x) for x in xs]
    a = compensated_sum(vals)
    rnd.shuffle(vals)
    b = compensated_sum(vals)
    exact = sum(Fraction(x) for x in xs)
    assert abs(to_fraction(a) - exact) <= 2 * to_fraction(ulp(a)) or a == 0
    assert abs(a - b) <= 4 * ulp(max(abs(a), abs(b)))


def test_neumaier_prefix_sums_track_exact_value():
    rng = random.Random(3)
    xs = [mpfr(rng.uniform(-1, 1)) * mpfr(10) ** rng.randint(-30, 30) for _ in range(2000)]
    pre = prefix_sums(xs)
    exact = Fraction(0)
    for x, s in zip(xs, pre[1:]):
        exact += to_fraction(x)
        assert abs(to_fraction(s) - exact) <= 4 * to_fraction(ulp(s)) + Fraction(1, 10**140)
    acc = NeumaierAccumulator()
    for x in xs:
        acc.add(x)
    assert acc.value == pre[-1]


def test_maximize_sine():
    two_pi = 2 * gmpy2.const_pi()
    _, v = maximize_on_circle(lambda p: gmpy2.sin(two_pi * p.position), 64, 40)
    assert abs(v - 1) < mpfr("1e-12")


def test_maximize_constant():
    c = mpfr("0.375")
    _, v = maximize_on_circle(lambda p: c, 16, 10)
    assert v == c


def test_maximize_never_below_grid():
    f = lambda p: gmpy2.cos(6 * gmpy2.const_pi() * p.position) + p.position
    _, v = maximize_on_circle(f, 32, 0)
    assert v >= max(f(CirclePoint(mpfr(i) / 32)) for i in range(32))


def test_maximize_rejects_small_grid():
    with pytest.raises(PreconditionError):
        maximize_on_circle(lambda p: p.position, 4, 10)


def test_maximize_displacement_matches_dense_orbit(prec, golden):
    """Oracle: the level-3 displacement maximised over a dense orbit by brute force."""
    from conftest import T_STAR
    T = family("arnold", "0.5", precision=prec)(hr(T_STAR[("arnold", "golden")]))
    q, p = golden.q(3), golden.p(3)
    _, v = maximize_on_circle(lambda c: abs(T.iterate(c.position, q) - c.position - p), 64, 40)
    orb = orbit(T, CirclePoint(mpfr(0)), 100_000)
    brute = max(abs(orb.displacement(i, i + q, p)) for i in range(orb.length - q))
    assert abs(v - brute) < mpfr("1e-10")


def test_golden_section_finds_parabola_peak():
    x, v = golden_section_max(lambda x: -(x - mpfr("0.3")) ** 2, mpfr(0), mpfr(1), 120)
    assert abs(x - mpfr("0.3")) < mpfr("1e-20")


@pytest.mark.parametrize("pts, want", [
    ([(1, 1), (2, 4), (4, 16)], 2),
    ([(1, 5), (2, 5), (4, 5)], 0),
])
def test_loglog_slope_examples(pts, want):
    s = loglog_slope([(mpfr(x), mpfr(y)) for x, y in pts])
    assert abs(s - want) < mpfr("1e-40")


def test_loglog_slope_power_law():
    pts = [(mpfr(2) ** -j, 3 * mpfr(2) ** (-mpfr("0.7") * j)) for j in range(1, 11)]
    assert abs(loglog_slope(pts) - mpfr("0.7")) < mpfr("1e-12")


def test_loglog_slope_errors():
    with pytest.raises(PreconditionError):
        loglog_slope([(mpfr(1), mpfr(1)), (mpfr(2), mpfr(2))])
    with pytest.raises(PreconditionError):
        loglog_slope([(mpfr(1), mpfr(1)), (mpfr(2), mpfr(0)), (mpfr(3), mpfr(1))])


def test_geometric_rate_exact():
    r = mpfr("0.6")
    assert abs(geometric_rate([7 * r ** n for n in range(8)]) - r) < mpfr("1e-45")


def test_to_decimal_round_trips():
    rng = random.Random(0)
    for _ in range(200):
        x = mpfr(rng.random()) / 7 * mpfr(10) ** rng.randint(-20, 20)
        assert mpfr(to_decimal(x)) == x
    assert to_decimal(mpfr(0)) == "0"
