"""Dynamical partitions, the scales ``l_n`` and the segment-counting numbers ``r(n+m, n)``.

The level-``n`` partition of a marked orbit consists of the arcs
``Delta^(n)_i`` between ``xi_i`` and ``xi_{i+q_n}`` for ``0 <= i < q_{n+1}`` together
with ``Delta^(n+1)_i`` for ``0 <= i < q_n``; they tile the circle because
``q_{n+1} Delta_n + q_n Delta_{n+1} = 1`` for the rotation.  For even ``n`` the arc runs from
``xi_i`` to ``xi_{i+q_n}``, for odd ``n`` the other way round.  Lengths are read
off the lift as ``|x_{i+q_n} - x_i - p_n|``, which never loses the sign.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpfr

from .cfarith import ContinuedFraction
from .errors import NumericalInvariantViolation, PreconditionError
from .maps import DEFAULT_ORBIT_CAP, CircleMap, Orbit, orbit
from .numerics import (CirclePoint, compensated_sum, geometric_rate, golden_section_max,
                       linear_fit, mod1, to_decimal)


@dataclass(frozen=True)
class Segment:
    level: int
    index: int
    start: mpfr      # circle coordinate of the counterclockwise-first endpoint
    length: mpfr

    @property
    def end(self) -> mpfr:
        return mod1(self.start + self.length).position


def segment(orb: Orbit, cf: ContinuedFraction, level: int, i: int) -> Segment:
    """``Delta^(level)_i`` read from the orbit (``level >= -1``)."""
    q, p = cf.q(level), cf.p(level)
    d = orb.displacement(i, i + q, p)
    if level % 2 == 0:
        start = orb.fracs[i]
    else:
        start = orb.fracs[i + q]
    return Segment(level, i, start, abs(d))


def segment_length(orb: Orbit, cf: ContinuedFraction, level: int, i: int) -> mpfr:
    return abs(orb.displacement(i, i + cf.q(level), cf.p(level)))


@dataclass(frozen=True)
class DynamicalPartition:
    level: int
    map: CircleMap
    cf: ContinuedFraction
    marked_orbit: Orbit
    segments: tuple

    def of_level(self, level: int) -> list:
        return [s for s in self.segments if s.level == level]

    @property
    def total_length(self) -> mpfr:
        with self.map.precision.context():
            return compensated_sum(s.length for s in self.segments)


def _need(cf, n):
    if n < 0 or n + 1 > cf.depth:
        raise PreconditionError(f"level {n} needs q_{n + 1}; continued fraction has depth {cf.depth}")


def build_partition(T: CircleMap, cf: ContinuedFraction, n: int, xi0: CirclePoint | None = None,
                    orb: Orbit | None = None, cap: int = DEFAULT_ORBIT_CAP) -> DynamicalPartition:
    """Level-``n`` dynamical partition of the orbit of ``xi0``.

    ``cf`` supplies the quotients of ``rho(T)``; an existing orbit of sufficient
    length may be passed to avoid recomputation.
    """
    _need(cf, n)
    N = cf.q(n + 1) + cf.q(n)
    with T.precision.context():
        if orb is None or orb.length < N:
            orb = orbit(T, xi0 or CirclePoint(mpfr(0)), N, cap)
        segs = [segment(orb, cf, n, i) for i in range(cf.q(n + 1))]
        segs += [segment(orb, cf, n + 1, i) for i in range(cf.q(n))]
    return DynamicalPartition(n, T, cf, orb, tuple(segs))


@dataclass(frozen=True)
class DisjointnessReport:
    min_gap: mpfr          # most negative gap between consecutive arcs (overlap if < 0)
    overlaps: int          # gaps below -tolerance
    tiling_defect: mpfr    # max |gap| over the whole partition in circular order


def _gaps(segs):
    segs = sorted(segs, key=lambda s: s.start)
    gaps = []
    for a, b in zip(segs, segs[1:] + segs[:1]):
        gaps.append(mod1(b.start - a.start).position - a.length if len(segs) > 1
                    else 1 - a.length)
    return gaps


def verify_disjointness(p: DynamicalPartition, tol: mpfr | None = None,
                        strict: bool = True) -> DisjointnessReport:
    """Sort-and-scan check that arcs of one level meet only at endpoints.

    With ``strict`` an overlap beyond ``tol`` (default ``10**-(P-8)``) raises.
    """
    with p.map.precision.context():
        tol = p.map.precision.tolerance(8) if tol is None else tol
        min_gap, overlaps = None, 0
        for level in {s.level for s in p.segments}:
            segs = p.of_level(level)
            if len(segs) < 2:
                continue
            for g in _gaps(segs):
                # consecutive gaps in circular order; a duplicated arc gives -length
                if min_gap is None or g < min_gap:
                    min_gap = g
                if g < -tol:
                    overlaps += 1
        whole = _gaps(list(p.segments))
        defect = max(abs(g) for g in whole)
        if min_gap is None:
            min_gap = mpfr(0)
        rep = DisjointnessReport(min_gap, overlaps, defect)
    if strict and overlaps:
        raise NumericalInvariantViolation(
            f"{overlaps} overlapping arcs at level {p.level} (min gap {min_gap})")
    return rep


_GRID_BUDGET = 20_000    # map evaluations spent on the seeding grid
_REFINE_SEEDS = 3


def _refine_max(T, cf, n, x_center, h, steps=40):
    q, pn = cf.q(n), cf.p(n)

    def g(x):
        return abs(T.iterate(x, q) - x - pn)

    return golden_section_max(g, x_center - h, x_center + h, steps)


def l_n(T: CircleMap, cf: ContinuedFraction, n: int, orb: Orbit | None = None,
        refine_steps: int = 40) -> mpfr:
    """``max |T^{q_n}(xi) - xi|``.

    Seeds are the partition base points and a uniform grid; the best few are
    refined by golden-section search.  Never below the longest partition arc.
    """
    if n == -1:
        return mpfr(1, T.precision.bits)
    part = build_partition(T, cf, n, orb=orb)
    with T.precision.context():
        segs = part.of_level(n)
        best = max(segs, key=lambda s: s.length)
        if T.is_rotation or refine_steps == 0:
            return best.length
        q, pn = cf.q(n), cf.p(n)
        # seeds: partition base points, plus a uniform grid while it stays cheap
        N = cf.q(n + 1) + cf.q(n)
        pts = sorted(part.marked_orbit.fracs[: N + 1])
        lengths = {part.marked_orbit.fracs[s.index]: s.length for s in segs}
        seeds = [(lengths.get(x, mpfr(0)), x) for x in pts]
        grid = _GRID_BUDGET // q
        if grid >= 8:
            step = mpfr(1) / grid
            seeds += [(abs(T.iterate(i * step, q) - i * step - pn), i * step) for i in range(grid)]
        seeds.sort(key=lambda t: t[0], reverse=True)
        width = max(mpfr(1) / grid if grid >= 8 else mpfr(0),
                    max(b - a for a, b in zip(pts, pts[1:] + [pts[0] + 1])))
        v = best.length
        for _, x in seeds[:_REFINE_SEEDS]:
            v = max(v, _refine_max(T, cf, n, x, width, refine_steps)[1])
        return v


def count_r(part: DynamicalPartition, m: int) -> int:
    """Number of ``0 <= i < q_{n+m+1}`` with ``Delta^(n+m)_i`` inside ``Delta^(n)_0``."""
    n = part.level
    if m < 0:
        raise PreconditionError("m must be >= 0")
    fine = build_partition(part.map, part.cf, n + m, orb=part.marked_orbit)
    with part.map.precision.context():
        arc = segment(fine.marked_orbit, part.cf, n, 0)
        count = 0
        for s in fine.of_level(n + m):
            # arcs never straddle coarser endpoints, so testing the midpoint is exact
            mid = mod1(s.start - arc.start).position + s.length / 2
            if mid < arc.length:
                count += 1
    return count


def count_r_recurrence(cf: ContinuedFraction, n: int, m: int) -> int:
    """``r(n,n) = 1``, ``r(n+1,n) = k_{n+2}``, ``r(n+m,n) = r(n+m-1,n) k_{n+m+1} + r(n+m-2,n)``."""
    r = [1, cf.k(n + 2)] if m >= 1 else [1]
    for j in range(2, m + 1):
        r.append(r[-1] * cf.k(n + j + 1) + r[-2])
    return r[m]


@dataclass(frozen=True)
class LengthScales:
    l: dict           # n -> l_n (including l_{-1} = 1)
    delta: dict       # n -> Delta_n
    ratio: dict       # n -> l_n / Delta_n
    lambda_hat: mpfr  # fitted geometric decay of l_n


def length_scales(T: CircleMap, cf: ContinuedFraction, n_max: int, orb: Orbit | None = None,
                  refine_steps: int = 40) -> LengthScales:
    _need(cf, n_max)
    N = cf.q(n_max + 1) + cf.q(n_max)
    with T.precision.context():
        if orb is None or orb.length < N:
            orb = orbit(T, CirclePoint(mpfr(0)), N)
        ls = {-1: mpfr(1)}
        for n in range(0, n_max + 1):
            ls[n] = l_n(T, cf, n, orb, refine_steps)
        ds = {n: cf.delta(n) for n in range(-1, n_max + 1)}
        ratio = {n: ls[n] / ds[n] for n in ls}
        lam = geometric_rate([ls[n] for n in range(0, n_max + 1)])
    return LengthScales(ls, ds, ratio, lam)


@dataclass(frozen=True)
class GeometryReport:
    a_sup: mpfr              # sup_n sup_i |log (T^{q_n})'(xi_i)|
    a_per_level: dict
    lambda_hat: mpfr         # fitted rate of the envelope of |D^(n+m)_0| / |D^(n)_0| in m
    envelope: dict           # m -> sup_n ratio
    nested_ratio_constant: mpfr      # max of (|D^(n+m)_0|/|D^(n)_0|) / (l_{n+m}/l_n)
    bounded_geometry_constant: mpfr  # max over levels of max R_i / min R_i, R_i = |D^(n+m)_i|/|D^(n)_i|
    scale_decay_constant: mpfr       # max of (l_{n+m}/l_n) / lambda^m


def verify_bounded_geometry(T: CircleMap, cf: ContinuedFraction, n_max: int,
                            scales: LengthScales | None = None, orb: Orbit | None = None
                            ) -> GeometryReport:
    """Boundedness of ``log (T^{q_n})'`` and geometric decay of nested arcs."""
    _need(cf, n_max)
    N = cf.q(n_max + 1) + cf.q(n_max)
    with T.precision.context():
        if orb is None or orb.length < N:
            orb = orbit(T, CirclePoint(mpfr(0)), N)
        pre = orb.log_d1_prefix
        a = {}
        for n in range(0, n_max + 1):
            q = cf.q(n)
            a[n] = max(abs(pre[i + q] - pre[i]) for i in range(cf.q(n + 1)))
        a_sup = max(a.values())

        d0 = {n: segment_length(orb, cf, n, 0) for n in range(0, n_max + 1)}
        env = {}
        for m in range(1, n_max + 1):
            env[m] = max(d0[n + m] / d0[n] for n in range(0, n_max + 1 - m))
        ms = sorted(env)
        if all(gmpy2.is_zero(env[m] - 1) for m in ms):
            lam = mpfr(1)
        else:
            slope, _ = linear_fit([mpfr(m) for m in ms], [gmpy2.log(env[m]) for m in ms])
            lam = gmpy2.exp(slope)

        scales = scales or length_scales(T, cf, n_max, orb)
        ls = scales.l
        c5 = max((d0[n + m] / d0[n]) / (ls[n + m] / ls[n])
                 for n in range(0, n_max) for m in range(1, n_max + 1 - n))
        c4 = mpfr(1)
        for n in range(0, n_max):
            for m in range(1, n_max + 1 - n):
                R = [segment_length(orb, cf, n + m, i) / segment_length(orb, cf, n, i)
                     for i in range(cf.q(n + 1))]
                c4 = max(c4, max(R) / min(R))
        c7 = max((ls[n + m] / ls[n]) / scales.lambda_hat ** m
                 for n in range(0, n_max) for m in range(1, n_max + 1 - n))
    return GeometryReport(a_sup, a, lam, env, c5, c4, c7)


def partition_csv(p: DynamicalPartition) -> str:
    """CSV with columns ``level,index,start,end,length`` at full precision."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "index", "start", "end", "length"])
    for s in sorted(p.segments, key=lambda s: (-s.level, s.index)):
        w.writerow([s.level, s.index, to_decimal(s.start), to_decimal(s.end), to_decimal(s.length)])
    return buf.getvalue()
