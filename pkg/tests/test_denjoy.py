import gmpy2
import pytest
from gmpy2 import mpfr

from circlelab.cfarith import from_quotients
from circlelab.denjoy import (REPORT_COLUMNS, denjoy_check, denjoy_report, epsilon, mk_profile,
                              verify_exact_relations, verify_kneps_decay)
from circlelab.errors import PreconditionError
from circlelab.maps import make_rotation
from circlelab.partitions import LengthScales, length_scales

# first verified runs at P = 50, n = 1..12 (regression fixtures)
SPREAD = {"golden": mpfr("4.1045"), "silver": mpfr("5.4431")}
S_RATE = {"golden": mpfr("0.6437"), "silver": mpfr("0.4204")}
KNEPS_RATE = {"golden": mpfr("0.7345"), "silver": mpfr("0.4900")}
REFINED_SPREAD = {"golden": mpfr("6.7545"), "silver": mpfr("5.4570")}
SLACK = mpfr("1.05")


@pytest.fixture(scope="module")
def reports(arnold_golden, arnold_silver, golden, silver, prec):
    with prec.context():
        return {"golden": denjoy_report(arnold_golden.map, golden, 12),
                "silver": denjoy_report(arnold_silver.map, silver, 12)}


@pytest.fixture(scope="module")
def rotation_scales(golden, prec):
    with prec.context():
        return length_scales(make_rotation(golden.value, prec), golden, 12)


def test_epsilon_rotation_closed_form(golden_rotation, golden, rotation_scales):
    g = golden.value
    for n in range(0, 13):
        assert abs(epsilon(golden_rotation, golden, n, rotation_scales) - (n + 1) * g ** n) < mpfr("1e-40")


def test_epsilon_level_zero(arnold_golden, golden):
    # the sum has the single term (l_0 / l_0) l_{-1}^alpha
    sc = length_scales(arnold_golden.map, golden, 3)
    assert epsilon(arnold_golden.map, golden, 0, sc) == 1


def test_epsilon_dominates_first_term(arnold_golden, golden):
    T = arnold_golden.map
    sc = length_scales(T, golden, 10)
    for n in range(1, 11):
        assert epsilon(T, golden, n, sc) >= sc.l[n - 1] ** T.alpha


def test_epsilon_missing_scales(arnold_golden, golden):
    sc = length_scales(arnold_golden.map, golden, 3)
    partial = LengthScales({k: v for k, v in sc.l.items() if k != 2}, sc.delta, sc.ratio, sc.lambda_hat)
    with pytest.raises(PreconditionError):
        epsilon(arnold_golden.map, golden, 3, partial)


def test_rotation_derivatives_are_one(golden_rotation, golden, rotation_scales):
    for n in range(1, 10):
        assert denjoy_check(golden_rotation, golden, n, rotation_scales).S == 0
        prof = mk_profile(golden_rotation, golden, n)
        assert all(abs(v - 1) < mpfr("1e-40") for v in prof.M + prof.K)


def test_rotation_relations_vanish(golden_rotation, golden):
    for n in range(1, 10):
        assert verify_exact_relations(golden_rotation, golden, n).max < mpfr("1e-45")


@pytest.mark.parametrize("which,kind", [("arnold_golden", "golden"),
                                        ("two_harmonic_golden", "golden"),
                                        ("arnold_silver", "silver")])
def test_exact_relations(request, which, kind):
    tuned = request.getfixturevalue(which)
    cf = request.getfixturevalue(kind)
    for n in range(1, 11):
        assert verify_exact_relations(tuned.map, cf, n).max < mpfr("1e-38")


def test_perturbed_control_breaks_relations(arnold_golden, golden):
    for n in (3, 7):
        rr = verify_exact_relations(arnold_golden.map, golden, n, perturb=golden.delta(n) / 10)
        assert rr.max > mpfr("1e-10")


def test_relations_hold_from_other_marked_points(arnold_golden, golden):
    from circlelab.numerics import CirclePoint
    for x in ("0.1", "0.73"):
        rr = verify_exact_relations(arnold_golden.map, golden, 6, xi0=CirclePoint(mpfr(x)))
        assert rr.max < mpfr("1e-38")


def test_relation_level_bounds(arnold_golden):
    cf = from_quotients([1] * 6)
    with pytest.raises(PreconditionError):
        verify_exact_relations(arnold_golden.map, cf, 6)
    with pytest.raises(PreconditionError):
        verify_exact_relations(arnold_golden.map, cf, 0)


@pytest.mark.parametrize("kind", ["golden", "silver"])
def test_denjoy_ratio_bounded(reports, kind):
    rep = reports[kind]
    ratios = [r["S_n/eps_n"] for r in rep.rows]
    assert all(r > 0 for r in ratios)
    assert max(ratios) / min(ratios) <= SPREAD[kind] * SLACK
    assert rep.summary["S_rate"] < 1
    assert abs(rep.summary["S_rate"] - S_RATE[kind]) < mpfr("1e-3")


@pytest.mark.parametrize("kind", ["golden", "silver"])
def test_kneps_decay(reports, kind):
    s = reports[kind].summary
    assert s["kneps_rate"] < 1
    assert abs(s["kneps_rate"] - KNEPS_RATE[kind]) < mpfr("1e-3")
    assert s["kneps_refined_spread"] <= REFINED_SPREAD[kind] * SLACK


def test_kneps_rotation_rate(golden_rotation, golden, rotation_scales):
    kd = verify_kneps_decay(golden_rotation, golden, 12, rotation_scales)
    g = golden.value
    for n, v in kd.values.items():
        assert abs(v - (n + 1) * g ** n) < mpfr("1e-40")
    # (n+1) g^n fitted over n = 1..12 sits slightly above g
    assert g < kd.rate < g * mpfr("1.2")


def test_kneps_needs_four_levels(golden_rotation, golden, rotation_scales):
    with pytest.raises(PreconditionError):
        verify_kneps_decay(golden_rotation, golden, 3, rotation_scales)


def test_eps_against_diophantine_bound(arnold_golden, golden, rotation_scales):
    sc = length_scales(arnold_golden.map, golden, 12)
    kd = verify_kneps_decay(arnold_golden.map, golden, 12, sc)
    vals = list(kd.eps_over_delta.values())
    assert max(vals) / min(vals) < 10


def test_mk_profile_oscillation_shrinks(arnold_golden, golden):
    T = arnold_golden.map
    sc = length_scales(T, golden, 10)
    normed = []
    for n in (4, 6, 8, 10):
        prof = mk_profile(T, golden, n)
        assert all(v > 0 for v in prof.M + prof.K)
        assert len(prof.M) == len(prof.K) == 17
        normed.append(prof.osc_M / sc.l[n - 1] ** T.alpha)
        normed.append(prof.dist_sup / sc.l[n - 1] ** T.alpha)
    assert max(normed) < 5
    assert abs(mk_profile(T, golden, 10).m_n - 1) < abs(mk_profile(T, golden, 4).m_n - 1)


def test_mk_profile_endpoints(arnold_golden, golden):
    prof = mk_profile(arnold_golden.map, golden, 5, samples=9)
    assert prof.xs_M[0] == 0 and len(prof.xs_M) == 9
    assert abs(prof.m_n - gmpy2.sqrt(prof.M[0] * prof.M[-1])) < mpfr("1e-48")


def test_report_layout(reports):
    rep = reports["golden"]
    assert [r["n"] for r in rep.rows] == list(range(1, 13))
    header = rep.to_csv().split("\n")[0].split(",")
    assert header == REPORT_COLUMNS
    assert rep.summary["max_identity_residual"] < mpfr("1e-38")


def test_report_json_roundtrip(reports):
    import json
    data = json.loads(reports["golden"].to_json())
    assert len(data["rows"]) == 12
    assert mpfr(data["rows"][0]["l_n"]) > 0


def test_report_rotation_has_no_rates(golden_rotation, golden):
    rep = denjoy_report(golden_rotation, golden, 6)
    assert "S_rate" not in rep.summary
    assert all(r["S_n"] == 0 for r in rep.rows)
