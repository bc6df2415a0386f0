"""Rotation numbers: Birkhoff averages, dynamical partial quotients, parameter tuning.

The dynamical expansion follows the signed displacements

    e(i, p) = x_i - x_0 - p

of the marked orbit.  With ``d_{-1} = -1`` and ``d_0 = x_1 - x_0``, the
quotient ``k_{n+1}`` is the number of ``k >= 1`` for which
``e(q_{n-1} + k q_n, p_{n-1} + k p_n)`` keeps the sign of ``d_{n-1}``; the last
such displacement is ``d_{n+1}``.  For a rigid rotation this is the Euclidean
algorithm run on ``rho`` and ``-1``.  All visited indices increase, so the orbit
is streamed through the kernel and never stored.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

import gmpy2
from gmpy2 import mpfr

from . import kernel
from .cfarith import ContinuedFraction, cf_expand, from_quotients
from .errors import (BracketError, MonotonicityViolation, PeriodicOrbitDetected,
                     PrecisionExhausted, PreconditionError, ResourceCapExceeded,
                     StagnationError)
from .maps import DEFAULT_ORBIT_CAP, CircleMap
from .numerics import CirclePoint, hr, to_fraction

COMPARISON_BUDGET = 300_000


@dataclass(frozen=True)
class RotationEstimate:
    value: mpfr
    method: str            # "birkhoff" or "dynamical_cf"
    levels: int            # partial quotients certified
    residual: mpfr         # error bound on value


def rotation_number_birkhoff(T: CircleMap, N: int, x: mpfr | None = None,
                             cap: int = DEFAULT_ORBIT_CAP) -> RotationEstimate:
    """``(L^N(x) - x) / N``; accurate to ``1/N``."""
    if N < 100:
        raise PreconditionError(f"N must be >= 100, got {N}")
    if N > cap:
        raise ResourceCapExceeded(f"orbit length {N} exceeds cap {cap}")
    with T.precision.context():
        x = mpfr(0) if x is None else x
        v = (T.iterate(x, N) - x) / N
        return RotationEstimate(v, "birkhoff", 0, mpfr(1) / N)


# -- dynamical expansion ------------------------------------------------------


@dataclass(frozen=True)
class Level:
    """One step of the dynamical expansion: ``k_n`` and the new convergent."""

    n: int
    k: int
    p: int
    q: int
    d: mpfr | None     # x_{q_n} - x_0 - p_n; None when the count was capped
    capped: bool = False


@dataclass(frozen=True)
class RationalHit:
    """The marked point is periodic to working precision: ``rho = p/q``."""

    p: int
    q: int


@dataclass(frozen=True)
class OutOfRange:
    """``x_1 - x_0`` is outside ``(0, 1)``: ``rho <= 0`` or ``rho >= 1``."""

    below: bool


def dynamical_levels(T: CircleMap, xi0: CirclePoint | None = None,
                     max_level: int | None = None, caps: dict | None = None,
                     max_index: int = DEFAULT_ORBIT_CAP) -> Iterator:
    """Stream the dynamical expansion of ``T`` at ``xi0``.

    Yields :class:`Level` records for ``n = 1, 2, ...``; may end with a
    :class:`RationalHit` or :class:`OutOfRange`.  ``caps[n]`` stops the count
    for ``k_n`` once it reaches that value (the level is yielded as capped and
    the stream ends).  Raises :class:`ResourceCapExceeded` when the next index
    would pass ``max_index``.
    """
    spec = T.spec
    caps = caps or {}
    with T.precision.context():
        floor = T.precision.floor
        f0 = mpfr(0) if xi0 is None else mpfr(xi0.position)
        w, f = kernel.advance(spec, 0, f0, 1)
        i = 1
        d0 = w + (f - f0)
        if d0 <= 0 or d0 >= 1:
            yield OutOfRange(below=d0 <= 0)
            return
        if d0 < floor:
            yield RationalHit(0, 1)
            return
        qm, pm, dm = 0, 1, mpfr(-1)
        qn, pn, dn = 1, 0, d0
        n = 0
        while max_level is None or n < max_level:
            cap = caps.get(n + 1)
            k, last = 0, None
            while True:
                e = (w - (pm + (k + 1) * pn)) + (f - f0)
                if abs(e) < floor:
                    yield RationalHit(pm + (k + 1) * pn, qm + (k + 1) * qn)
                    return
                if (e < 0) != (dm < 0):
                    break
                k, last = k + 1, e
                if cap is not None and k >= cap:
                    yield Level(n + 1, k, pm + k * pn, qm + k * qn, None, capped=True)
                    return
                if i + qn > max_index:
                    raise ResourceCapExceeded(
                        f"level {n + 1} needs orbit index beyond {max_index}", level_reached=n)
                w, f = kernel.advance(spec, w, f, qn)
                i += qn
            if k == 0:
                raise PeriodicOrbitDetected(
                    f"k_{n + 1} = 0: orbit is numerically periodic at level {n + 1}")
            qm, pm, dm, qn, pn, dn = qn, pn, dn, qm + k * qn, pm + k * pn, last
            n += 1
            yield Level(n, k, pn, qn, dn)


def partial_quotients_dynamical(T: CircleMap, max_level: int, xi0: CirclePoint | None = None,
                                cap: int = DEFAULT_ORBIT_CAP) -> ContinuedFraction:
    """Quotients ``k_1..k_{max_level}`` read off the orbit of ``xi0``."""
    ks = []
    for ev in dynamical_levels(T, xi0, max_level, max_index=cap):
        if isinstance(ev, RationalHit):
            raise PeriodicOrbitDetected(f"marked point is periodic: rho = {ev.p}/{ev.q}")
        if isinstance(ev, OutOfRange):
            raise PreconditionError("rotation number outside (0, 1)")
        ks.append(ev.k)
    return from_quotients(ks, T.precision)


def rotation_number_dynamical(T: CircleMap, max_level: int, xi0: CirclePoint | None = None,
                              cap: int = DEFAULT_ORBIT_CAP) -> RotationEstimate:
    """``p_N / q_N`` with the width of the depth-``N`` cylinder as error bound."""
    cf = partial_quotients_dynamical(T, max_level, xi0, cap)
    return _cylinder_estimate(cf.quotients, T)


def _cylinder_estimate(ks, T) -> RotationEstimate:
    p, q = [1, 0], [0, 1]
    for k in ks:
        p.append(k * p[-1] + p[-2])
        q.append(k * q[-1] + q[-2])
    with T.precision.context():
        value = hr(Fraction(p[-1], q[-1]), T.precision)
        width = hr(Fraction(1, q[-1] * (q[-1] + q[-2])), T.precision)
    return RotationEstimate(value, "dynamical_cf", len(ks), width)


# -- ordering and tuning ------------------------------------------------------


def cf_order(a: tuple, b: tuple) -> int:
    """Order of two numbers given by quotient prefixes: -1, 0 (undecided) or 1.

    A larger quotient at an odd level means a smaller number.
    """
    for j, (x, y) in enumerate(zip(a, b), start=1):
        if x != y:
            s = -1 if x > y else 1
            return s if j % 2 == 1 else -s
    return 0


@dataclass(frozen=True)
class Comparison:
    sign: int          # sign of rho(T) - target, or 0 if equal to the depth examined
    prefix: tuple      # quotients observed (last one possibly capped)
    levels: int        # levels agreeing with the target


def compare_to_target(T: CircleMap, target: ContinuedFraction, max_level: int,
                      budget: int = COMPARISON_BUDGET) -> Comparison:
    """Order ``rho(T)`` against an irrational target using at most ``max_level`` levels."""
    caps = {j: target.k(j) + 1 for j in range(1, max_level + 1)}
    prefix = []
    for ev in dynamical_levels(T, None, max_level, caps, max_index=budget):
        if isinstance(ev, OutOfRange):
            return Comparison(-1 if ev.below else 1, tuple(prefix), 0)
        if isinstance(ev, RationalHit):
            rho = Fraction(ev.p, ev.q)
            sign = 1 if rho > to_fraction(target.value) else -1
            return Comparison(sign, tuple(prefix), len(prefix))
        prefix.append(ev.k)
        if ev.k != target.k(ev.n):
            s = -1 if ev.k > target.k(ev.n) else 1
            return Comparison(s if ev.n % 2 == 1 else -s, tuple(prefix), ev.n - 1)
    return Comparison(0, tuple(prefix), len(prefix))


def affordable_depth(target: ContinuedFraction, budget: int = COMPARISON_BUDGET) -> int:
    """Deepest level whose expansion stays within ``budget`` orbit points."""
    n = 0
    while n + 1 <= target.depth and target.q(n + 1) + target.q(n) <= budget:
        n += 1
    return n


@dataclass(frozen=True)
class TuneResult:
    t: mpfr
    map: CircleMap
    quotients: tuple
    estimate: RotationEstimate
    bracket: tuple          # final (lo, hi) in t
    iterations: int

    def descriptor(self) -> str:
        return self.map.descriptor()


def tune_parameter(family: Callable[[mpfr], CircleMap], target: ContinuedFraction,
                   depth: int, tol=None, budget: int = COMPARISON_BUDGET) -> TuneResult:
    """Bisection in ``t`` until ``rho(T_t)`` matches ``target`` to ``depth`` quotients.

    Stops when the ``t`` bracket is narrower than ``tol`` or when the deepest
    affordable comparison no longer separates the midpoint from the target.
    """
    probe = family(mpfr(0))
    prec = probe.precision
    with prec.context():
        tol = prec.tolerance(0) if tol is None else hr(tol, prec)
        if depth > target.depth:
            raise PreconditionError(f"target has only {target.depth} quotients, depth {depth} asked")
        L = affordable_depth(target, budget)
        if L < depth:
            raise ResourceCapExceeded(
                f"depth {depth} needs more than {budget} orbit points", level_reached=L)
        if probe.is_rotation:
            T = family(target.value)
            return _finish(T, target, depth, budget, (target.value, target.value), 0)

        lo, hi = mpfr(0), mpfr(1)
        clo = compare_to_target(family(lo), target, L, budget)
        chi = compare_to_target(family(hi), target, L, budget)
        if clo.sign >= 0 or chi.sign <= 0:
            raise BracketError("target rotation number not bracketed by t in [0, 1]")
        it = 0
        while hi - lo > tol:
            mid = (lo + hi) / 2
            if mid == lo or mid == hi:
                raise StagnationError(f"bisection stagnated at precision {prec.digits}")
            c = compare_to_target(family(mid), target, L, budget)
            it += 1
            if cf_order(clo.prefix, c.prefix) > 0 or cf_order(c.prefix, chi.prefix) > 0:
                raise MonotonicityViolation(
                    f"rotation number not monotone in t near {mid}: "
                    f"{clo.prefix} / {c.prefix} / {chi.prefix}")
            if c.sign == 0:
                lo = hi = mid
                break
            if c.sign < 0:
                lo, clo = mid, c
            else:
                hi, chi = mid, c
        t = (lo + hi) / 2
        return _finish(family(t), target, depth, budget, (lo, hi), it)


def _finish(T, target, depth, budget, bracket, it) -> TuneResult:
    L = affordable_depth(target, budget)
    cf = partial_quotients_dynamical(T, L, cap=budget)
    if cf.quotients[:depth] != target.quotients[:depth]:
        raise StagnationError(
            f"tuned map reproduces only {cf.quotients} against target {target.quotients[:depth]}")
    return TuneResult(T.t, T, cf.quotients, _cylinder_estimate(cf.quotients, T), bracket, it)


def target_fraction(kind, levels: int = 60, precision=None) -> ContinuedFraction:
    """Target continued fraction for ``golden``, ``silver`` or a periodic word."""
    from .cfarith import quadratic_irrational
    rho = quadratic_irrational(kind, precision)
    try:
        return cf_expand(rho, levels, precision)
    except PrecisionExhausted as e:
        return cf_expand(rho, e.level_reached, precision)
