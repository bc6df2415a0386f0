"""Cross-ratios, ratio distortion and cross-ratio distortion.

For an increasing ``f`` the slope ``s(x, y) = (f(x) - f(y)) / (x - y)`` is
replaced by ``f'(x)`` when ``x == y``, so every quantity here has a clean
coincident-point limit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import gmpy2
from gmpy2 import mpfr

from .errors import PreconditionError

Fn = Callable[[mpfr], mpfr]


@dataclass(frozen=True)
class FourPoints:
    x1: mpfr
    x2: mpfr
    x3: mpfr
    x4: mpfr

    @property
    def spread(self) -> mpfr:
        xs = (self.x1, self.x2, self.x3, self.x4)
        return max(xs) - min(xs)

    def __iter__(self):
        return iter((self.x1, self.x2, self.x3, self.x4))


@dataclass(frozen=True)
class SmoothTestFunction:
    """Increasing ``C^{2+alpha}`` function on ``domain`` with its first two derivatives."""

    f: Fn
    df: Fn
    d2f: Fn
    alpha: float = 1.0
    domain: tuple | None = None   # closed interval (A, B); None means unrestricted
    name: str = ""

    def __call__(self, x):
        return self.f(x)

    def check(self, *xs) -> None:
        if self.domain is None:
            return
        a, b = self.domain
        for x in xs:
            if not a <= x <= b:
                raise PreconditionError(f"point {x} outside domain [{a}, {b}] of {self.name or 'f'}")


def compose(f: SmoothTestFunction, g: SmoothTestFunction) -> SmoothTestFunction:
    """``f o g`` with chain-rule derivatives."""
    return SmoothTestFunction(
        f=lambda x: f.f(g.f(x)),
        df=lambda x: f.df(g.f(x)) * g.df(x),
        d2f=lambda x: f.d2f(g.f(x)) * g.df(x) ** 2 + f.df(g.f(x)) * g.d2f(x),
        alpha=min(f.alpha, g.alpha), domain=g.domain, name=f"{f.name}o{g.name}")


# -- test corpus -------------------------------------------------------------


def affine(a=2, b=1) -> SmoothTestFunction:
    a, b = mpfr(a), mpfr(b)
    if not a > 0:
        raise PreconditionError("affine slope must be positive")
    return SmoothTestFunction(lambda x: a * x + b, lambda x: a, lambda x: mpfr(0),
                              1.0, None, "affine")


def mobius() -> SmoothTestFunction:
    """``x -> -1/(x+2)``, increasing on ``[-1, 3]``."""
    return SmoothTestFunction(lambda x: -1 / (x + 2), lambda x: 1 / (x + 2) ** 2,
                              lambda x: -2 / (x + 2) ** 3, 1.0, (mpfr(-1), mpfr(3)), "mobius")


def square() -> SmoothTestFunction:
    return SmoothTestFunction(lambda x: x * x, lambda x: 2 * x, lambda x: mpfr(2),
                              1.0, (mpfr("0.25"), mpfr(8)), "square")


def exponential() -> SmoothTestFunction:
    return SmoothTestFunction(gmpy2.exp, gmpy2.exp, gmpy2.exp, 1.0, (mpfr(-2), mpfr(2)), "exp")


def sine(a="0.5") -> SmoothTestFunction:
    """``x -> x + a sin(2 pi x)/(2 pi)`` with ``|a| <= 0.9``."""
    a = mpfr(a)
    if abs(a) > mpfr("0.9"):
        raise PreconditionError(f"|a| must be <= 0.9, got {a}")

    def f(x):
        tp = 2 * gmpy2.const_pi()
        return x + a * gmpy2.sin(tp * x) / tp

    def df(x):
        return 1 + a * gmpy2.cos(2 * gmpy2.const_pi() * x)

    def d2f(x):
        tp = 2 * gmpy2.const_pi()
        return -tp * a * gmpy2.sin(tp * x)

    return SmoothTestFunction(f, df, d2f, 1.0, (mpfr(-1), mpfr(2)), f"sine({a})")


def corpus() -> list[SmoothTestFunction]:
    return [affine(), mobius(), square(), exponential(), sine("0.5"), sine("-0.9")]


# -- cross-ratio tools -------------------------------------------------------


def _slope(f, x, y):
    if x == y:
        return f.df(x)
    return (f.f(x) - f.f(y)) / (x - y)


def cross_ratio(p: FourPoints) -> mpfr:
    den = (p.x2 - p.x3) * (p.x4 - p.x1)
    if gmpy2.is_zero(den) or gmpy2.is_zero(p.x1 - p.x2) or gmpy2.is_zero(p.x3 - p.x4):
        raise PreconditionError("cross-ratio of non-distinct points")
    return (p.x1 - p.x2) * (p.x3 - p.x4) / den


def ratio_distortion(x1, x2, x3, f) -> mpfr:
    """``D(x1, x2, x3; f) = s(x1, x2) / s(x2, x3)``."""
    if isinstance(f, SmoothTestFunction):
        f.check(x1, x2, x3)
    return _slope(f, x1, x2) / _slope(f, x2, x3)


def cross_ratio_distortion(p: FourPoints, f) -> mpfr:
    """``Cr(f(x1), ..., f(x4)) / Cr(x1, ..., x4) = s12 s34 / (s23 s41)``."""
    if isinstance(f, SmoothTestFunction):
        f.check(*p)
    num = _slope(f, p.x1, p.x2) * _slope(f, p.x3, p.x4)
    den = _slope(f, p.x2, p.x3) * _slope(f, p.x4, p.x1)
    if gmpy2.is_zero(den):
        raise PreconditionError("zero slope in cross-ratio distortion")
    return num / den


def _spread(*xs):
    d = max(xs) - min(xs)
    if gmpy2.is_zero(d):
        raise PreconditionError("all points coincide")
    return d


def dr_expansion_residual(x1, x2, x3, f: SmoothTestFunction, eval_point) -> mpfr:
    """``|D - 1 - (x1-x3) f''(th) / (2 f'(th))| / (|x1-x3| spread^alpha)``."""
    spread = _spread(x1, x2, x3)
    if not min(x1, x2, x3) <= eval_point <= max(x1, x2, x3):
        raise PreconditionError("evaluation point must lie between the three points")
    if x1 == x3:
        raise PreconditionError("x1 == x3: normalization vanishes")
    th = eval_point
    r = ratio_distortion(x1, x2, x3, f) - 1 - (x1 - x3) * f.d2f(th) / (2 * f.df(th))
    return abs(r) / (abs(x1 - x3) * spread ** f.alpha)


def dist_bound_residual(p: FourPoints, f: SmoothTestFunction) -> mpfr:
    """``|log Dist(p; f)| / (|x1-x3| spread^alpha)``."""
    spread = _spread(*p)
    if p.x1 == p.x3:
        raise PreconditionError("x1 == x3: normalization vanishes")
    return abs(gmpy2.log(cross_ratio_distortion(p, f))) / (abs(p.x1 - p.x3) * spread ** f.alpha)
