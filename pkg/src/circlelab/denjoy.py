"""Denjoy-type estimates along dynamical convergents.

Points near the marked point are handled as offsets ``u = x - x_0`` from its
lift, and ``T^m`` as the lift function ``F(u) = L^m(x_0 + u) - x_0 - p``.  For
orbit points these values come straight from the stored orbit, which keeps the
exact relations between ``M_n`` and ``K_n`` exact up to rounding.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from .cfarith import ContinuedFraction, estimate_diophantine_class
from .crossratio import FourPoints, cross_ratio_distortion, ratio_distortion
from .errors import PreconditionError
from .maps import CircleMap, Orbit, orbit
from .numerics import CirclePoint, geometric_rate, to_decimal
from .partitions import LengthScales, length_scales

DEFAULT_SAMPLES = 17


# -- ε_n ---------------------------------------------------------------------


def epsilon(T: CircleMap, cf: ContinuedFraction, n: int, scales: LengthScales) -> mpfr:
    """``sum_{j=-1}^{n-1} (l_n / l_{j+1}) l_j^alpha`` with ``l_{-1} = 1``."""
    ls = scales.l
    missing = [j for j in range(-1, n + 1) if j not in ls]
    if missing:
        raise PreconditionError(f"missing scales l_j for j in {missing}")
    a = T.alpha
    with T.precision.context():
        return gmpy2.fsum([ls[n] / ls[j + 1] * ls[j] ** a for j in range(-1, n)])


# -- iterates near the marked point ---------------------------------------------


class _Iterate:
    """``F(u) = L^m(x_0 + u) - x_0 - p_shift`` with orbit-exact values where known."""

    def __init__(self, T: CircleMap, orb: Orbit, m: int, p_shift: int):
        self.T, self.orb, self.m, self.p = T, orb, m, p_shift
        self.cache = {}

    def add_orbit_point(self, i: int, p: int) -> mpfr:
        """Register ``x_i - p`` and return its offset."""
        o = self.orb
        u = o.displacement(0, i, p)
        F = o.displacement(0, i + self.m, p + self.p)
        dF = gmpy2.exp(o.log_d1_prefix[i + self.m] - o.log_d1_prefix[i])
        self.cache[u] = (F, dF)
        return u

    def _eval(self, u):
        v = self.cache.get(u)
        if v is None:
            f0 = self.orb.fracs[0]
            y, s = self.T.iterate_with_log_derivative(f0 + u, self.m)
            v = (y - f0 - self.p, gmpy2.exp(s))
            self.cache[u] = v
        return v

    def f(self, u):
        return self._eval(u)[0]

    def df(self, u):
        return self._eval(u)[1]


def _lobatto(a, b, count):
    """``count`` Chebyshev-Lobatto points from ``a`` to ``b`` with exact endpoints."""
    if count < 2:
        raise PreconditionError("need at least 2 sample points")
    pi = gmpy2.const_pi()
    pts = [a + (b - a) * (1 - gmpy2.cos(pi * j / (count - 1))) / 2 for j in range(count)]
    pts[0], pts[-1] = a, b
    return pts


@dataclass(frozen=True)
class MKProfile:
    n: int
    xs_M: list           # offsets of the sample points in Delta^(n-1)_0
    M: list
    xs_K: list           # offsets in Delta^(n-2)_0
    K: list
    m_n: mpfr            # positive root of M_n(xi_0) M_n(xi_{q_{n-1}})
    osc_M: mpfr          # max M / min M - 1
    osc_K: mpfr
    dist_sup: mpfr       # sup |log Dist(xi_0, xi, xi_{q_{n-1}}, eta; T^{q_n})|


def _check_level(cf, n, lo=1):
    if n < lo or n + 1 > cf.depth:
        raise PreconditionError(f"level {n} outside {lo}..{cf.depth - 1}")


def _orbit_for(T, cf, n, xi0, orb):
    N = cf.q(n + 1) + cf.q(n)
    if orb is None or orb.length < N:
        orb = orbit(T, xi0 or CirclePoint(mpfr(0)), N)
    return orb


def mk_profile(T: CircleMap, cf: ContinuedFraction, n: int, xi0: CirclePoint | None = None,
               samples: int = DEFAULT_SAMPLES, orb: Orbit | None = None) -> MKProfile:
    """Sample ``M_n`` on ``Delta^(n-1)_0`` and ``K_n`` on ``Delta^(n-2)_0``."""
    _check_level(cf, n)
    with T.precision.context():
        orb = _orbit_for(T, cf, n, xi0, orb)
        floor = T.precision.floor
        Fq = _Iterate(T, orb, cf.q(n), cf.p(n))
        a = Fq.add_orbit_point(0, 0)
        b = Fq.add_orbit_point(cf.q(n - 1), cf.p(n - 1))
        if abs(b - a) < floor:
            raise PreconditionError(f"segment Delta^({n - 1})_0 below the precision floor")
        xs_M = _lobatto(a, b, samples)
        M = [ratio_distortion(a, x, b, Fq) for x in xs_M]

        Gq = _Iterate(T, orb, cf.q(n - 1), cf.p(n - 1))
        a2 = Gq.add_orbit_point(0, 0)
        c2 = Gq.add_orbit_point(cf.q(n), cf.p(n))
        end = orb.displacement(0, cf.q(n - 2), cf.p(n - 2))
        xs_K = _lobatto(a2, end, samples)
        K = [ratio_distortion(a2, x, c2, Gq) for x in xs_K]

        m_n = gmpy2.sqrt(M[0] * M[-1])
        dist_sup = mpfr(0)
        for x in xs_M[1:-1]:
            for y in xs_M[1:-1]:
                if x != y:
                    d = cross_ratio_distortion(FourPoints(a, x, b, y), Fq)
                    dist_sup = max(dist_sup, abs(gmpy2.log(d)))
        return MKProfile(n, xs_M, M, xs_K, K, m_n, max(M) / min(M) - 1, max(K) / min(K) - 1,
                         dist_sup)


# -- exact relations -------------------------------------------------------------


@dataclass(frozen=True)
class RelationResiduals:
    n: int
    r_mk: mpfr
    r_k: mpfr
    r_m: mpfr

    @property
    def max(self) -> mpfr:
        return max(abs(self.r_mk), abs(self.r_k), abs(self.r_m))


def verify_exact_relations(T: CircleMap, cf: ContinuedFraction, n: int,
                           xi0: CirclePoint | None = None, orb: Orbit | None = None,
                           perturb: mpfr | None = None) -> RelationResiduals:
    """Residuals of the three exact relations between ``M_n``, ``K_n`` at level ``n``.

    ``perturb`` shifts the point ``xi_{q_n}`` and evaluates the maps there
    afresh; this is a negative control and must break the relations.
    """
    _check_level(cf, n)
    qm, q, qp = cf.q(n - 1), cf.q(n), cf.q(n + 1)
    pm, p, pp = cf.p(n - 1), cf.p(n), cf.p(n + 1)
    with T.precision.context():
        orb = _orbit_for(T, cf, n, xi0, orb)
        Tq = _Iterate(T, orb, q, p)
        Tqm = _Iterate(T, orb, qm, pm)
        Tqp = _Iterate(T, orb, qp, pp)
        for F in (Tq, Tqm, Tqp):
            F.add_orbit_point(0, 0)
        x0 = mpfr(0)
        x_qm = Tq.add_orbit_point(qm, pm)
        x_qp = Tq.add_orbit_point(qp, pp)
        x_q = Tqm.add_orbit_point(q, p)
        Tqp.add_orbit_point(q, p)
        if perturb is not None:
            x_q = x_q + perturb

        def M(Fn, xm, x):      # D(xi0, x, xi_{q_{n-1}}; F)
            return ratio_distortion(x0, x, xm, Fn)

        def K(Fn, xe, x):      # D(xi0, x, xi_end; F)
            return ratio_distortion(x0, x, xe, Fn)

        r_mk = M(Tq, x_qm, x0) * M(Tq, x_qm, x_qm) - K(Tqm, x_q, x0) * K(Tqm, x_q, x_q)
        # K_{n+1}(xi) = D(xi0, xi, xi_{q_{n+1}}; T^{q_n})
        r_k = (K(Tq, x_qp, x_qm) - 1
               - abs(x_qp) / abs(x_qm) * (M(Tq, x_qm, x_qp) - 1))
        # M_{n+1}(xi0) = D(xi0, xi0, xi_{q_n}; T^{q_{n+1}})
        lhs = Tqp.df(x0) / ratio_distortion(x0, x0, x_q, Tqp) - 1
        rhs = abs(x_qp) / abs(x_q) * (1 - Tq.df(x0) / ratio_distortion(x0, x0, x_qp, Tq))
        return RelationResiduals(n, r_mk, r_k, lhs - rhs)


# -- Denjoy inequality ---------------------------------------------------------------


@dataclass(frozen=True)
class DenjoyLevel:
    n: int
    q: int
    S: mpfr            # sup_i |log (T^{q_n})'(xi_i)| over the sampled orbit points
    eps: mpfr
    ratio: mpfr        # S / eps
    ratio_prev: mpfr   # S / l_{n-1}^alpha


def denjoy_check(T: CircleMap, cf: ContinuedFraction, n: int, scales: LengthScales,
                 sample_count: int | None = None, orb: Orbit | None = None) -> DenjoyLevel:
    """Sup of ``|log (T^{q_n})'|`` over ``sample_count`` orbit points (default ``q_{n+1}``)."""
    _check_level(cf, n, 0)
    q = cf.q(n)
    count = cf.q(n + 1) if sample_count is None else sample_count
    with T.precision.context():
        N = count + q
        if orb is None or orb.length < N:
            orb = orbit(T, CirclePoint(mpfr(0)), N)
        pre = orb.log_d1_prefix
        S = max(abs(pre[i + q] - pre[i]) for i in range(count))
        eps = epsilon(T, cf, n, scales)
        prev = scales.l[n - 1] ** T.alpha
        return DenjoyLevel(n, q, S, eps, S / eps, S / prev)


# -- decay of k_{n+1} ε_n -------------------------------------------------------------


@dataclass(frozen=True)
class KEpsDecay:
    values: dict        # n -> k_{n+1} eps_n
    rate: mpfr          # fitted geometric rate
    delta_hat: mpfr
    refined: dict       # n -> k_{n+1} eps_n / Delta_{n-1}^{alpha - delta_hat}
    refined_spread: mpfr  # max / min of the refined ratio
    eps_over_delta: dict  # n -> eps_n / Delta_n^{alpha/(1+delta_hat)}


def delta_hat_for(target: ContinuedFraction) -> mpfr:
    """Class exponent from the deeper half of the target's levels."""
    lo = max(2, target.depth // 2)
    return estimate_diophantine_class(target, (lo, target.depth)).delta_hat


def verify_kneps_decay(T: CircleMap, cf: ContinuedFraction, n_max: int, scales: LengthScales,
                       n_min: int = 1, delta_hat: mpfr | None = None) -> KEpsDecay:
    if n_max - n_min + 1 < 4:
        raise PreconditionError("need at least 4 levels for a decay fit")
    if n_max + 1 > cf.depth:
        raise PreconditionError(f"k_{n_max + 1} not available")
    with T.precision.context():
        dh = delta_hat_for(cf) if delta_hat is None else delta_hat
        a = T.alpha
        vals, refined, l9 = {}, {}, {}
        for n in range(n_min, n_max + 1):
            e = epsilon(T, cf, n, scales)
            vals[n] = cf.k(n + 1) * e
            refined[n] = vals[n] / cf.delta(n - 1) ** (a - dh)
            l9[n] = e / cf.delta(n) ** (a / (1 + dh))
        rate = geometric_rate([vals[n] for n in range(n_min, n_max + 1)])
        spread = max(refined.values()) / min(refined.values())
        return KEpsDecay(vals, rate, dh, refined, spread, l9)


# -- per-level report -------------------------------------------------------------------


REPORT_COLUMNS = ["n", "q_n", "Delta_n", "l_n", "eps_n", "S_n", "S_n/eps_n",
                  "k_n+1*eps_n", "residual_MK", "residual_K", "residual_M"]


@dataclass
class DenjoyReport:
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in REPORT_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [{c: _fmt(r[c]) for c in REPORT_COLUMNS} for r in self.rows]
        return json.dumps({"rows": rows, "summary": {k: _fmt(v) for k, v in self.summary.items()}},
                          indent=2, sort_keys=True)


def _fmt(v):
    if isinstance(v, type(mpfr(0))):
        return to_decimal(v)
    return v


def denjoy_report(T: CircleMap, cf: ContinuedFraction, n_max: int,
                  sample_count: int | None = None) -> DenjoyReport:
    """Rows for ``n = 1..n_max`` with scales, ``eps_n``, ``S_n`` and the identity residuals."""
    if n_max + 1 > cf.depth:
        raise PreconditionError(f"continued fraction too short for n_max = {n_max}")
    with T.precision.context():
        orb = orbit(T, CirclePoint(mpfr(0)), cf.q(n_max + 1) + cf.q(n_max))
        scales = length_scales(T, cf, n_max, orb)
        rep = DenjoyReport()
        res_max = mpfr(0)
        for n in range(1, n_max + 1):
            d = denjoy_check(T, cf, n, scales, sample_count, orb=orb)
            rr = verify_exact_relations(T, cf, n, orb=orb)
            res_max = max(res_max, rr.max)
            rep.rows.append({
                "n": n, "q_n": cf.q(n), "Delta_n": cf.delta(n), "l_n": scales.l[n],
                "eps_n": d.eps, "S_n": d.S, "S_n/eps_n": d.ratio,
                "k_n+1*eps_n": cf.k(n + 1) * d.eps,
                "residual_MK": rr.r_mk, "residual_K": rr.r_k, "residual_M": rr.r_m})
        S = [r["S_n"] for r in rep.rows]
        ratios = [r["S_n/eps_n"] for r in rep.rows]
        rep.summary["max_identity_residual"] = res_max
        if not T.is_rotation and n_max >= 3:
            rep.summary["S_rate"] = geometric_rate(S)
            rep.summary["S_over_eps_spread"] = max(ratios) / min(ratios)
        if n_max >= 4:
            kd = verify_kneps_decay(T, cf, n_max, scales)
            rep.summary["kneps_rate"] = kd.rate
            rep.summary["kneps_refined_spread"] = kd.refined_spread
            rep.summary["delta_hat"] = kd.delta_hat
        rep.summary["lambda_hat"] = scales.lambda_hat
    return rep
