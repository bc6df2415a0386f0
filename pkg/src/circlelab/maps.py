"""Orientation-preserving circle diffeomorphisms given by trigonometric lifts.

Every map in the package has a lift of the form

    L(x) = x + t + sum_k a_k / (2 pi k) * sin(2 pi k x + phi_k)

so ``L'(x) = 1 + sum_k a_k cos(2 pi k x + phi_k)``.  Rigid rotations, the
Arnold family and the two-harmonic family are special cases.  Orbits are
produced by the kernel in :mod:`circlelab.kernel` and stored as integer
windings plus fractional parts, which keeps full relative precision for
differences of nearby points however far the lift has travelled.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

import gmpy2
from gmpy2 import mpfr

from . import kernel
from .errors import NotADiffeomorphism, PreconditionError, ResourceCapExceeded
from .numerics import (CirclePoint, Precision, check_precision, current_precision,
                       golden_section_max, hr, mod1, to_decimal)

DEFAULT_ORBIT_CAP = 10**7
_VALIDATION_GRID = 2**14


@dataclass(frozen=True)
class Harmonic:
    k: int
    amplitude: mpfr     # coefficient of cos in L'
    phase: mpfr         # radians


@dataclass(frozen=True)
class CircleMap:
    """A circle diffeomorphism with lift ``x + t + sum of harmonics``."""

    family: str
    t: mpfr
    harmonics: tuple[Harmonic, ...]
    precision: Precision
    params: tuple[tuple[str, mpfr], ...] = ()
    alpha: mpfr = field(default=None)
    spec: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        check_precision(self.precision, self.t,
                        *(h.amplitude for h in self.harmonics), *(v for _, v in self.params))
        with self.precision.context():
            if self.alpha is None:
                object.__setattr__(self, "alpha", mpfr(1))
            twopi = 2 * gmpy2.const_pi()
            ks, coefs, amps, phases = [], [], [], []
            for h in self.harmonics:
                ks.append(h.k)
                amps.append(h.amplitude)
                coefs.append(h.amplitude / (twopi * h.k))
                turns = h.phase / twopi
                phases.append(turns - gmpy2.floor(turns))
            object.__setattr__(self, "spec", (self.precision.bits, self.t, tuple(ks),
                                              tuple(coefs), tuple(amps), tuple(phases)))

    # -- evaluation --------------------------------------------------------

    def lift(self, x: mpfr) -> mpfr:
        with self.precision.context():
            twopi = 2 * gmpy2.const_pi()
            y = x + self.t
            for h in self.harmonics:
                y += h.amplitude / (twopi * h.k) * gmpy2.sin(twopi * h.k * x + h.phase)
            return y

    def d1(self, x: mpfr) -> mpfr:
        with self.precision.context():
            twopi = 2 * gmpy2.const_pi()
            d = mpfr(1)
            for h in self.harmonics:
                d += h.amplitude * gmpy2.cos(twopi * h.k * x + h.phase)
            return d

    def d2(self, x: mpfr) -> mpfr:
        with self.precision.context():
            twopi = 2 * gmpy2.const_pi()
            d = mpfr(0)
            for h in self.harmonics:
                d -= twopi * h.k * h.amplitude * gmpy2.sin(twopi * h.k * x + h.phase)
            return d

    def __call__(self, p: CirclePoint) -> CirclePoint:
        return mod1(self.lift(p.position))

    def iterate(self, x: mpfr, n: int) -> mpfr:
        """``L^n(x)`` on the lift."""
        with self.precision.context():
            w = int(gmpy2.floor(x))
            w, f = kernel.advance(self.spec, w, x - w, n)
            return w + f

    def iterate_with_log_derivative(self, x: mpfr, n: int) -> tuple[mpfr, mpfr]:
        """``(L^n(x), log (T^n)'(x))``."""
        with self.precision.context():
            w = int(gmpy2.floor(x))
            w, f, s = kernel.advance_log(self.spec, w, x - w, n)
            return w + f, s

    # -- descriptors -------------------------------------------------------

    def param(self, name: str) -> mpfr:
        return dict(self.params)[name]

    def descriptor(self) -> str:
        parts = [f"family={self.family}", f"t={to_decimal(self.t)}"]
        parts += [f"{k}={to_decimal(v)}" for k, v in self.params]
        return " ".join(parts)

    def with_t(self, t: mpfr) -> "CircleMap":
        return _FAMILIES[self.family](t, *(v for _, v in self.params),
                                      precision=self.precision)

    @property
    def is_rotation(self) -> bool:
        return all(gmpy2.is_zero(h.amplitude) for h in self.harmonics)


def from_descriptor(text: str, precision: Precision | None = None) -> CircleMap:
    """Parse ``family=<name> t=<decimal> <param>=<decimal> ...``."""
    precision = precision or current_precision()
    fields = dict(tok.split("=", 1) for tok in text.split())
    family = fields.pop("family", None)
    if family not in _FAMILIES:
        raise PreconditionError(f"unknown or missing family in descriptor {text!r}")
    if "t" not in fields:
        raise PreconditionError(f"descriptor {text!r} has no t")
    t = hr(fields.pop("t"), precision)
    names = _PARAM_NAMES[family]
    if set(fields) != set(names):
        raise PreconditionError(f"family {family} expects parameters {names}, got {sorted(fields)}")
    return _FAMILIES[family](t, *(hr(fields[n], precision) for n in names), precision=precision)


# -- families --------------------------------------------------------------


def _coerce(prec, *xs):
    return [x if isinstance(x, type(mpfr(0))) else hr(x, prec) for x in xs]


def make_rotation(rho, precision: Precision | None = None) -> CircleMap:
    """Rigid rotation ``x -> x + rho``."""
    precision = precision or current_precision()
    (rho,) = _coerce(precision, rho)
    if not 0 < rho < 1:
        raise PreconditionError(f"rotation angle must lie in (0,1), got {rho}")
    return CircleMap("rotation", rho, (), precision)


def make_arnold(t, a, precision: Precision | None = None) -> CircleMap:
    """Arnold family ``x -> x + t + a/(2 pi) sin(2 pi x)``."""
    precision = precision or current_precision()
    t, a = _coerce(precision, t, a)
    if abs(a) >= 1:
        raise NotADiffeomorphism(f"|a| = {abs(a)} >= 1: not a diffeomorphism")
    with precision.context():
        harmonics = (Harmonic(1, a, mpfr(0)),)
    return CircleMap("arnold", t, harmonics, precision, params=(("a", a),))


def make_two_harmonic(t, a1, a2, precision: Precision | None = None) -> CircleMap:
    """``x -> x + t + a1/(2 pi) sin(2 pi x) + a2/(4 pi) sin(4 pi x + 1/3)``."""
    precision = precision or current_precision()
    t, a1, a2 = _coerce(precision, t, a1, a2)
    with precision.context():
        harmonics = (Harmonic(1, a1, mpfr(0)), Harmonic(2, a2, mpfr(1) / 3))
    _check_positive_derivative(harmonics, precision)
    return CircleMap("two_harmonic", t, harmonics, precision, params=(("a1", a1), ("a2", a2)))


def min_derivative(harmonics, precision: Precision, grid: int = _VALIDATION_GRID) -> mpfr:
    """Minimum of ``L'`` over a uniform grid, refined by golden-section search."""
    with precision.context():
        probe = CircleMap("probe", mpfr(0), tuple(harmonics), precision)
        h = mpfr(1) / grid
        vals = [probe.d1(i * h) for i in range(grid)]
        i = min(range(grid), key=vals.__getitem__)
        _, neg = golden_section_max(lambda x: -probe.d1(x), (i - 1) * h, (i + 1) * h, 60)
        return min(vals[i], -neg)


@functools.lru_cache(maxsize=256)
def _validated(key, precision):
    harmonics = tuple(Harmonic(k, a, p) for k, a, p in key)
    return min_derivative(harmonics, precision)


def _check_positive_derivative(harmonics, precision):
    key = tuple((h.k, h.amplitude, h.phase) for h in harmonics)
    m = _validated(key, precision)
    if not m > 0:
        raise NotADiffeomorphism(f"derivative reaches {m} <= 0: not a diffeomorphism")


_FAMILIES: dict[str, Callable[..., CircleMap]] = {
    "rotation": lambda t, precision=None: make_rotation(t, precision=precision),
    "arnold": make_arnold,
    "two_harmonic": make_two_harmonic,
}
_PARAM_NAMES = {"rotation": (), "arnold": ("a",), "two_harmonic": ("a1", "a2")}


def family(name: str, *params, precision: Precision | None = None) -> Callable[[mpfr], CircleMap]:
    """One-parameter family ``t -> T_t`` with the other parameters fixed."""
    if name not in _FAMILIES:
        raise PreconditionError(f"unknown family {name!r}")
    precision = precision or current_precision()
    params = _coerce(precision, *params)
    if len(params) != len(_PARAM_NAMES[name]):
        raise PreconditionError(f"family {name} expects parameters {_PARAM_NAMES[name]}")
    if name == "arnold" and abs(params[0]) >= 1:
        raise NotADiffeomorphism(f"|a| = {abs(params[0])} >= 1: not a diffeomorphism")
    if name == "two_harmonic":
        make_two_harmonic(mpfr(0, precision.bits), *params, precision=precision)

    def member(t):
        if name == "rotation":
            return CircleMap("rotation", _coerce(precision, t)[0], (), precision)
        return _FAMILIES[name](t, *params, precision=precision)

    member.family_name = name
    member.params = tuple(params)
    member.precision = precision
    return member


# -- orbits ------------------------------------------------------------------


@dataclass(frozen=True)
class Orbit:
    """Marked trajectory ``x_i = L^i(x_0)`` for ``0 <= i <= length``.

    ``windings[i] + fracs[i]`` is the lift value of ``x_i``;
    ``log_d1_prefix[i] = sum_{j<i} log T'(x_j)``.
    """

    base: CirclePoint
    windings: list
    fracs: list
    log_d1_prefix: list

    @property
    def length(self) -> int:
        return len(self.fracs) - 1

    def lift(self, i: int) -> mpfr:
        return self.windings[i] + self.fracs[i]

    @property
    def points(self) -> list:
        return [self.lift(i) for i in range(len(self.fracs))]

    def displacement(self, i: int, j: int, shift: int = 0) -> mpfr:
        """``x_j - x_i - shift`` computed without cancellation in the integer parts."""
        return (self.windings[j] - self.windings[i] - shift) + (self.fracs[j] - self.fracs[i])

    def position(self, i: int) -> CirclePoint:
        return CirclePoint(self.fracs[i])


def orbit(T: CircleMap, xi0: CirclePoint, N: int, cap: int = DEFAULT_ORBIT_CAP) -> Orbit:
    """Orbit of ``xi0`` of length ``N`` with compensated ``log T'`` prefix sums."""
    if N < 0:
        raise PreconditionError(f"orbit length must be >= 0, got {N}")
    if N > cap:
        raise ResourceCapExceeded(f"orbit length {N} exceeds cap {cap}")
    with T.precision.context():
        ws, fs, pre = kernel.orbit(T.spec, 0, mpfr(xi0.position), N)
    return Orbit(xi0, ws, fs, pre)


def iterate_derivative(T: CircleMap, orb: Orbit, i: int, n: int) -> mpfr:
    """``(T^n)'(x_i)`` from the prefix sums of ``log T'`` along the orbit."""
    if i < 0 or n < 0 or i + n > orb.length:
        raise PreconditionError(f"window [{i}, {i + n}] outside orbit of length {orb.length}")
    with T.precision.context():
        return gmpy2.exp(orb.log_d1_prefix[i + n] - orb.log_d1_prefix[i])


def log_iterate_derivative(orb: Orbit, i: int, n: int) -> mpfr:
    return orb.log_d1_prefix[i + n] - orb.log_d1_prefix[i]
