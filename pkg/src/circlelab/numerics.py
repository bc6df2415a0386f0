"""Extended-precision scalars, circle arithmetic and small numerical helpers.

All real quantities in the package are ``gmpy2.mpfr`` values held at a
precision of ``P`` significant decimal digits.  The precision is carried by a
:class:`Precision` object and activated with :func:`working_precision`, which
sets the thread-local gmpy2 context.
"""
from __future__ import annotations

import contextlib
import contextvars
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

import gmpy2
from gmpy2 import mpfr

from .errors import PrecisionMismatch, PreconditionError

DEFAULT_DIGITS = 50
_GUARD_BITS = 4
_LOG2_10 = math.log2(10)


@dataclass(frozen=True)
class Precision:
    """Working precision of ``digits`` significant decimal digits."""

    digits: int = DEFAULT_DIGITS

    def __post_init__(self):
        if self.digits < 17:
            raise PreconditionError(f"precision must be at least 17 digits, got {self.digits}")

    @property
    def bits(self) -> int:
        return int(math.ceil(self.digits * _LOG2_10)) + _GUARD_BITS

    @property
    def floor(self) -> mpfr:
        """Smallest meaningful length scale, ``10**-(P-10)``."""
        with self.context():
            return mpfr(10) ** (10 - self.digits)

    def tolerance(self, lost_digits: int) -> mpfr:
        """Absolute tolerance ``10**-(P-lost_digits)``."""
        with self.context():
            return mpfr(10) ** (lost_digits - self.digits)

    @contextlib.contextmanager
    def context(self) -> Iterator["Precision"]:
        token = _current.set(self)
        try:
            with gmpy2.context(gmpy2.get_context(), precision=self.bits,
                               round=gmpy2.RoundToNearest):
                yield self
        finally:
            _current.reset(token)


_current: contextvars.ContextVar[Precision] = contextvars.ContextVar(
    "circlelab_precision", default=Precision(DEFAULT_DIGITS))


def current_precision() -> Precision:
    return _current.get()


def working_precision(digits: int = DEFAULT_DIGITS):
    """Context manager activating ``digits`` decimal digits for all mpfr arithmetic."""
    return Precision(digits).context()


def hr(x, prec: Precision | None = None) -> mpfr:
    """Convert ``x`` (int, str, Fraction, float, mpfr) to a HighReal.

    Strings and fractions are rounded once, floats are taken exactly.
    """
    prec = prec or current_precision()
    if isinstance(x, Fraction):
        with prec.context():
            return mpfr(gmpy2.mpq(x.numerator, x.denominator))
    return mpfr(x, prec.bits)


def check_precision(prec: Precision, *values) -> None:
    """Raise :class:`PrecisionMismatch` if any value is not held at ``prec``."""
    for v in values:
        if isinstance(v, type(mpfr(0))) and v.precision != prec.bits:
            raise PrecisionMismatch(
                f"value held at {v.precision} bits used in a {prec.bits}-bit computation")


def to_fraction(x: mpfr) -> Fraction:
    """Exact rational value of a finite mpfr."""
    a, b = x.as_integer_ratio()
    return Fraction(int(a), int(b))


def to_decimal(x: mpfr, digits: int | None = None) -> str:
    """Decimal string with enough digits to round-trip ``x`` at its own precision."""
    if digits is None:
        digits = int(math.ceil(x.precision / _LOG2_10)) + 1
    if gmpy2.is_zero(x):
        return "0"
    mant, exp, _ = x.digits(10, digits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    mant = mant.rstrip("0") or "0"
    return f"{sign}{mant[0]}.{mant[1:] or '0'}e{exp - 1}"


def _require_finite(x) -> None:
    if not gmpy2.is_finite(x):
        raise PreconditionError(f"non-finite value {x}")


# ---------------------------------------------------------------- circle


def mod1(x: mpfr) -> "CirclePoint":
    """Reduce a lift coordinate to its representative in ``[0, 1)``."""
    _require_finite(x)
    r = x - gmpy2.floor(x)
    if r >= 1:  # x = -tiny rounds to 1
        r = r - 1
    return CirclePoint(r)


@dataclass(frozen=True)
class CirclePoint:
    position: mpfr

    def __post_init__(self):
        if not (0 <= self.position < 1):
            raise PreconditionError(f"circle point {self.position} not in [0,1)")

    def distance_to(self, other: "CirclePoint") -> mpfr:
        """Oriented (counterclockwise) arc length from ``self`` to ``other``."""
        return mod1(other.position - self.position).position


@dataclass(frozen=True)
class Arc:
    """Positively oriented arc from ``start`` to ``end``."""

    start: CirclePoint
    end: CirclePoint

    @property
    def length(self) -> mpfr:
        return self.start.distance_to(self.end)

    def contains(self, p: CirclePoint) -> bool:
        return self.start.distance_to(p) <= self.length


def circle_distance(a, b) -> mpfr:
    """Unoriented distance on R/Z."""
    d = mod1(a - b).position
    return min(d, 1 - d)


# ---------------------------------------------------------------- summation


def compensated_sum(xs: Iterable[mpfr]) -> mpfr:
    """Sum at the working precision with a single final rounding."""
    xs = list(xs)
    for x in xs:
        _require_finite(x)
    if not xs:
        return mpfr(0)
    return gmpy2.fsum(xs)


class NeumaierAccumulator:
    """Running compensated sum; ``value`` is the current rounded total."""

    __slots__ = ("s", "c")

    def __init__(self):
        self.s = mpfr(0)
        self.c = mpfr(0)

    def add(self, x: mpfr) -> None:
        t = self.s + x
        if abs(self.s) >= abs(x):
            self.c += (self.s - t) + x
        else:
            self.c += (x - t) + self.s
        self.s = t

    @property
    def value(self) -> mpfr:
        return self.s + self.c


def prefix_sums(xs: Iterable[mpfr]) -> list[mpfr]:
    """Compensated prefix sums ``[0, x0, x0+x1, ...]``."""
    acc = NeumaierAccumulator()
    out = [mpfr(0)]
    for x in xs:
        acc.add(x)
        out.append(acc.value)
    return out


# ---------------------------------------------------------------- optimisation

_INVPHI = (math.sqrt(5) - 1) / 2


def golden_section_max(f: Callable[[mpfr], mpfr], a: mpfr, b: mpfr,
                       steps: int) -> tuple[mpfr, mpfr]:
    """Golden-section search for a maximum of ``f`` on ``[a, b]``.

    Returns the best point evaluated (including both ends) and its value.
    """
    invphi = (gmpy2.sqrt(mpfr(5)) - 1) / 2
    best_x, best_v = a, f(a)
    vb = f(b)
    if vb > best_v:
        best_x, best_v = b, vb
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(steps):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    for x, v in ((c, fc), (d, fd)):
        if v > best_v:
            best_x, best_v = x, v
    return best_x, best_v


def maximize_on_circle(f: Callable[[CirclePoint], mpfr], grid_size: int,
                       refinement_steps: int) -> tuple[CirclePoint, mpfr]:
    """Approximate maximizer of a continuous function on the circle.

    A uniform grid locates the best cell; golden-section search then refines
    inside the bracket formed by its two grid neighbours.  The returned value
    is never below the grid maximum.
    """
    if grid_size < 8:
        raise PreconditionError(f"grid_size must be >= 8, got {grid_size}")
    h = mpfr(1) / grid_size
    values = [f(CirclePoint(i * h)) for i in range(grid_size)]
    i_best = max(range(grid_size), key=values.__getitem__)
    best_x, best_v = i_best * h, values[i_best]
    if refinement_steps > 0:
        x, v = golden_section_max(lambda u: f(mod1(u)), (i_best - 1) * h,
                                  (i_best + 1) * h, refinement_steps)
        if v > best_v:
            best_x, best_v = x, v
    return mod1(best_x), best_v


# ---------------------------------------------------------------- regression


def linear_fit(xs: Sequence[mpfr], ys: Sequence[mpfr]) -> tuple[mpfr, mpfr]:
    """Least-squares ``(slope, intercept)`` of ``ys`` against ``xs``."""
    n = len(xs)
    mx = compensated_sum(xs) / n
    my = compensated_sum(ys) / n
    sxy = compensated_sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = compensated_sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise PreconditionError("degenerate abscissae in linear fit")
    slope = sxy / sxx
    return slope, my - slope * mx


def loglog_slope(points: Sequence[tuple[mpfr, mpfr]]) -> mpfr:
    """Least-squares slope of ``log y`` against ``log x``."""
    if len(points) < 3:
        raise PreconditionError(f"need at least 3 points, got {len(points)}")
    for x, y in points:
        if not (x > 0 and y > 0):
            raise PreconditionError(f"non-positive coordinate in ({x}, {y})")
    lx = [gmpy2.log(mpfr(x)) for x, _ in points]
    ly = [gmpy2.log(mpfr(y)) for _, y in points]
    return linear_fit(lx, ly)[0]


def geometric_rate(values: Sequence[mpfr]) -> mpfr:
    """Fitted ratio ``r`` in ``values[n] ~ C r**n`` (log-linear least squares)."""
    if len(values) < 3:
        raise PreconditionError("need at least 3 values for a rate fit")
    ns = [mpfr(i) for i in range(len(values))]
    ly = [gmpy2.log(mpfr(v)) for v in values]
    return gmpy2.exp(linear_fit(ns, ly)[0])
