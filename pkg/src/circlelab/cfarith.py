"""Continued fractions of rotation numbers.

Indexing follows ``rho = [k_1, k_2, ...] = 1/(k_1 + 1/(k_2 + ...))`` with
``p_{-1} = 1, q_{-1} = 0, p_0 = 0, q_0 = 1`` and ``Delta_n = |q_n rho - p_n|``.
Convergents are exact Python integers; the errors ``Delta_n`` are computed
exactly from the rational value of the mpfr ``rho`` and rounded once.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import gmpy2
from gmpy2 import mpfr

from .errors import PrecisionExhausted, PreconditionError
from .numerics import Precision, current_precision, hr, to_fraction


@dataclass(frozen=True)
class ContinuedFraction:
    quotients: tuple[int, ...]        # k_1..k_N
    _p: tuple[int, ...]               # p_{-1}..p_N
    _q: tuple[int, ...]
    value: mpfr
    _deltas: tuple[mpfr, ...]         # Delta_{-1}..Delta_N

    @property
    def depth(self) -> int:
        return len(self.quotients)

    def k(self, n: int) -> int:
        """Partial quotient ``k_n`` for ``1 <= n <= depth``."""
        if not 1 <= n <= self.depth:
            raise IndexError(f"k_{n} outside 1..{self.depth}")
        return self.quotients[n - 1]

    def p(self, n: int) -> int:
        return self._p[n + 1]

    def q(self, n: int) -> int:
        return self._q[n + 1]

    def delta(self, n: int) -> mpfr:
        return self._deltas[n + 1]

    def to_json(self) -> str:
        return json.dumps(list(self.quotients), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str, precision: Precision | None = None) -> "ContinuedFraction":
        return from_quotients(json.loads(text), precision)


def _convergents(ks: Sequence[int]):
    p, q = [1, 0], [0, 1]
    for k in ks:
        p.append(k * p[-1] + p[-2])
        q.append(k * q[-1] + q[-2])
    return p, q


def _build(ks, rho_exact: Fraction, value: mpfr, prec: Precision) -> ContinuedFraction:
    p, q = _convergents(ks)
    with prec.context():
        ds = tuple(hr(abs(qn * rho_exact - pn), prec) for pn, qn in zip(p, q))
    return ContinuedFraction(tuple(ks), tuple(p), tuple(q), value, ds)


def cf_expand(rho: mpfr, N: int, precision: Precision | None = None) -> ContinuedFraction:
    """First ``N`` partial quotients of ``rho`` in (0, 1).

    Levels stop being meaningful once ``Delta_n`` drops below the precision
    floor; asking for more levels than that raises :class:`PrecisionExhausted`.
    """
    precision = precision or current_precision()
    rho = hr(rho, precision) if not isinstance(rho, type(mpfr(0))) else rho
    if not 0 < rho < 1:
        raise PreconditionError(f"rotation number must lie in (0,1), got {rho}")
    if N < 0:
        raise PreconditionError(f"N must be >= 0, got {N}")
    exact = to_fraction(rho)
    floor = to_fraction(precision.floor)
    ks: list[int] = []
    p, q = [1, 0], [0, 1]
    x = exact
    for n in range(1, N + 1):
        if x == 0:
            raise PrecisionExhausted(f"rho is rational; expansion ends at level {n - 1}",
                                     level_reached=n - 1)
        inv = 1 / x
        k = inv.numerator // inv.denominator
        ks.append(k)
        x = inv - k
        p.append(k * p[-1] + p[-2])
        q.append(k * q[-1] + q[-2])
        if abs(q[-1] * exact - p[-1]) < floor and n < N:
            raise PrecisionExhausted(
                f"Delta_{n} below 1e-{precision.digits - 10}; cannot expand to level {N}",
                level_reached=n)
    return _build(ks, exact, rho, precision)


def value_of(quotients: Sequence[int]) -> Fraction:
    """Exact rational ``[k_1, ..., k_N]``."""
    x = Fraction(0)
    for k in reversed(quotients):
        if k < 1:
            raise PreconditionError(f"partial quotients must be positive, got {k}")
        x = 1 / (k + x)
    return x


def from_quotients(quotients: Sequence[int], precision: Precision | None = None
                   ) -> ContinuedFraction:
    """Continued fraction with prescribed quotients.

    The value is ``[k_1, ..., k_N]`` rounded to the working precision; the
    errors ``Delta_n`` are those of the exact rational ``[k_1, ..., k_N]``.
    """
    precision = precision or current_precision()
    ks = list(quotients)
    if not ks:
        raise PreconditionError("need at least one quotient")
    exact = value_of(ks)
    return _build(ks, exact, hr(exact, precision), precision)


def deltas(cf: ContinuedFraction) -> list[mpfr]:
    """``[Delta_{-1}, Delta_0, ..., Delta_N]``."""
    return list(cf._deltas)


@dataclass(frozen=True)
class DiophantineEstimate:
    delta_hat: mpfr
    per_level: dict          # n -> delta_n
    window: tuple[int, int]  # inclusive level range used for delta_hat


def estimate_diophantine_class(cf: ContinuedFraction, window: tuple[int, int] | None = None
                               ) -> DiophantineEstimate:
    """Per-level exponents ``delta_n = log Delta_n / log Delta_{n-1} - 1`` (clamped at 0).

    ``delta_hat`` is their maximum over ``window``, by default all levels ``n >= 2``.
    """
    if cf.depth < 5:
        raise PreconditionError(f"need at least 5 levels, got {cf.depth}")
    lo, hi = window or (2, cf.depth)
    lo = max(lo, 2)
    if hi > cf.depth or lo > hi:
        raise PreconditionError(f"window ({lo}, {hi}) outside levels 2..{cf.depth}")
    with gmpy2.context(gmpy2.get_context(), precision=cf.value.precision):
        per = {}
        for n in range(1, cf.depth + 1):
            d, dprev = cf.delta(n), cf.delta(n - 1)
            if gmpy2.is_zero(d):
                break
            per[n] = max(mpfr(0), gmpy2.log(d) / gmpy2.log(dprev) - 1)
        levels = [n for n in range(lo, hi + 1) if n in per]
        if not levels:
            raise PreconditionError("no usable levels in window")
        return DiophantineEstimate(max(per[n] for n in levels), per, (lo, levels[-1]))


def quadratic_irrational(kind, precision: Precision | None = None) -> mpfr:
    """Purely periodic continued fraction: ``"golden"``, ``"silver"`` or a word of quotients."""
    precision = precision or current_precision()
    if kind == "golden":
        word = [1]
    elif kind == "silver":
        word = [2]
    elif isinstance(kind, str):
        raise PreconditionError(f"unknown kind {kind!r}")
    else:
        word = list(kind)
        if not word or any((not isinstance(k, int)) or k < 1 for k in word):
            raise PreconditionError(f"invalid periodic word {kind!r}")
    p, q = _convergents(word)
    pm, pm1, qm, qm1 = p[-1], p[-2], q[-1], q[-2]
    # rho = (p_m + rho p_{m-1}) / (q_m + rho q_{m-1})
    b = qm - pm1
    with precision.context():
        return 2 * mpfr(pm) / (b + gmpy2.sqrt(mpfr(b * b + 4 * qm1 * pm)))
