"""Invariant density and conjugacy to the rotation, built from one long orbit.

Along the orbit ``gamma(xi_0) = 0`` and ``gamma(xi_{i+1}) = gamma(xi_i) - log T'(xi_i)``,
so ``gamma_i = -sum_{j<i} log T'(xi_j)``.  Sorted on the circle and interpolated
linearly, ``h = exp(gamma) / Z`` approximates the invariant density and
``phi(xi) = int_{xi_0}^{xi} h`` the conjugacy.  Positions are offsets from
``xi_0`` in ``[0, 1)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .cfarith import ContinuedFraction
from .errors import NumericalInvariantViolation, PreconditionError
from .maps import DEFAULT_ORBIT_CAP, CircleMap, orbit
from .numerics import CirclePoint, loglog_slope, to_decimal

MIN_SAMPLES = 1000
HOLDER_BASE_POINTS = 32


@dataclass(frozen=True)
class ConjugacyProfile:
    N: int
    xs: tuple            # sorted offsets (xi - xi_0) mod 1, xs[0] = 0
    index: tuple         # orbit index of each sorted sample
    gamma: tuple
    Z: mpfr | None = None
    h: tuple | None = None
    phi: tuple | None = None

    @property
    def x_np(self) -> np.ndarray:
        return np.array([float(x) for x in self.xs])

    @property
    def gamma_np(self) -> np.ndarray:
        return np.array([float(g) for g in self.gamma])

    def max_gap(self) -> float:
        x = self.x_np
        return float(np.max(np.diff(np.append(x, 1.0))))

    def gamma_gap(self) -> float:
        """Largest jump of gamma between circular neighbours."""
        g = self.gamma_np
        return float(np.max(np.abs(np.diff(np.append(g, g[0])))))

    def gamma_at(self, u) -> np.ndarray:
        """Periodic piecewise-linear interpolant of gamma at offsets ``u``."""
        x = np.append(self.x_np, 1.0)
        g = self.gamma_np
        g = np.append(g, g[0])
        return np.interp(np.mod(u, 1.0), x, g)

    def h_at(self, u) -> np.ndarray:
        if self.Z is None:
            raise PreconditionError("density not built")
        return np.exp(self.gamma_at(u)) / float(self.Z)


def gamma_on_orbit(T: CircleMap, xi0: CirclePoint, N: int,
                   cap: int = DEFAULT_ORBIT_CAP) -> ConjugacyProfile:
    """Samples ``(xi_i, gamma(xi_i))``, ``0 <= i <= N``, sorted on the circle from ``xi0``."""
    orb = orbit(T, xi0, N, cap)
    with T.precision.context():
        f0 = orb.fracs[0]
        off = [f - f0 if f >= f0 else f - f0 + 1 for f in orb.fracs]
        order = sorted(range(N + 1), key=off.__getitem__)
        xs = tuple(off[i] for i in order)
        gam = tuple(-orb.log_d1_prefix[i] for i in order)
    return ConjugacyProfile(N, xs, tuple(order), gam)


def build_density(p: ConjugacyProfile) -> ConjugacyProfile:
    """``h = exp(gamma) / Z`` with ``Z`` from the periodic trapezoid rule."""
    if len(p.xs) < MIN_SAMPLES:
        raise PreconditionError(f"need at least {MIN_SAMPLES} samples, got {len(p.xs)}")
    e = [gmpy2.exp(g) for g in p.gamma]
    xs = list(p.xs) + [p.xs[0] + 1]
    e_ext = e + [e[0]]
    Z = gmpy2.fsum([(xs[j + 1] - xs[j]) * (e_ext[j] + e_ext[j + 1]) for j in range(len(e))]) / 2
    return replace(p, Z=Z, h=tuple(v / Z for v in e))


def integral_of_density(p: ConjugacyProfile) -> mpfr:
    """``int h`` with ``exp`` of the linear gamma interpolant integrated exactly per cell."""
    xs = list(p.xs) + [p.xs[0] + 1]
    g = list(p.gamma) + [p.gamma[0]]
    terms = []
    for j in range(len(p.xs)):
        w, dg = xs[j + 1] - xs[j], g[j + 1] - g[j]
        if gmpy2.is_zero(dg):
            terms.append(w * gmpy2.exp(g[j]))
        else:
            terms.append(w * (gmpy2.exp(g[j + 1]) - gmpy2.exp(g[j])) / dg)
    return gmpy2.fsum(terms) / p.Z


def build_phi(p: ConjugacyProfile) -> ConjugacyProfile:
    """Cumulative trapezoid ``phi(xi) = int_{xi_0}^{xi} h``."""
    if p.h is None:
        raise PreconditionError("density not built")
    phi = [mpfr(0)]
    acc_s, acc_c = mpfr(0), mpfr(0)
    for j in range(1, len(p.xs)):
        term = (p.xs[j] - p.xs[j - 1]) * (p.h[j] + p.h[j - 1]) / 2
        t = acc_s + term            # running compensated sum
        acc_c += (acc_s - t) + term
        acc_s = t
        phi.append(acc_s + acc_c)
    for a, b in zip(phi, phi[1:]):
        if not b > a:
            raise NumericalInvariantViolation("phi not strictly increasing: density not positive")
    return replace(p, phi=tuple(phi))


def phi_total(p: ConjugacyProfile) -> mpfr:
    """``phi(xi_0 + 1) - phi(xi_0)``: the last cell closes the circle."""
    last = (1 + p.xs[0] - p.xs[-1]) * (p.h[-1] + p.h[0]) / 2
    return p.phi[-1] + last


# -- residuals ----------------------------------------------------------------------


def _np_map(T: CircleMap):
    t = float(T.t)
    hs = [(h.k, float(h.amplitude), float(h.phase)) for h in T.harmonics]

    def lift(x):
        y = x + t
        for k, a, ph in hs:
            y = y + a / (2 * math.pi * k) * np.sin(2 * math.pi * k * x + ph)
        return y

    def d1(x):
        d = np.ones_like(x)
        for k, a, ph in hs:
            d = d + a * np.cos(2 * math.pi * k * x + ph)
        return d

    return lift, d1


def homological_residual(T: CircleMap, p: ConjugacyProfile, xi0: CirclePoint | None = None,
                         grid: int = 4096) -> float:
    """``sup |h(T xi) T'(xi) - h(xi)|`` over a uniform grid."""
    lift, d1 = _np_map(T)
    x0 = 0.0 if xi0 is None else float(xi0.position)
    u = np.arange(grid) / grid
    x = x0 + u
    Tu = lift(x) - x0
    return float(np.max(np.abs(p.h_at(Tu) * d1(x) - p.h_at(u))))


def commutation_residual(p: ConjugacyProfile, rho) -> float:
    """``sup_i dist(phi(xi_{i+1}) - phi(xi_i), rho)`` on the circle, over the orbit."""
    if p.phi is None:
        raise PreconditionError("phi not built")
    pos = [0] * len(p.index)
    for r, i in enumerate(p.index):
        pos[i] = r
    rho = mpfr(rho)
    worst = mpfr(0)
    for i in range(p.N):
        d = p.phi[pos[i + 1]] - p.phi[pos[i]] - rho
        d = d - gmpy2.floor(d)
        worst = max(worst, min(d, 1 - d))
    return float(worst)


def verify_measure_identity(T: CircleMap, cf: ContinuedFraction, p: ConjugacyProfile, n: int,
                            xi0: CirclePoint | None = None, grid: int = 1 << 16) -> float:
    """``|int (T^{q_n} xi - xi - p_n)(-1)^n h(xi) dxi - Delta_n|`` by the periodic trapezoid rule."""
    if n + 1 > cf.depth or n < 0:
        raise PreconditionError(f"level {n} unavailable")
    lift, _ = _np_map(T)
    x0 = 0.0 if xi0 is None else float(xi0.position)
    u = np.arange(grid) / grid
    y = x0 + u
    for _ in range(cf.q(n)):
        y = lift(y)
    disp = (y - (x0 + u) - cf.p(n)) * (-1) ** n
    val = float(np.mean(disp * p.h_at(u)))
    return abs(val - float(cf.delta(n)))


def order_matches_rotation(p: ConjugacyProfile, rho, count: int = 1000) -> bool:
    """Circular order of ``xi_i``, ``i <= count``, equals that of ``i rho mod 1``."""
    if count > p.N:
        raise PreconditionError("count exceeds orbit length")
    mine = [i for i in p.index if i <= count]
    rho = mpfr(rho)
    theirs = sorted(range(count + 1), key=lambda i: (i * rho) - gmpy2.floor(i * rho))
    return mine == theirs


# -- Hölder exponent ---------------------------------------------------------------


@dataclass(frozen=True)
class HolderEstimate:
    exponent: float | None      # None when the density is flat at all sampled scales
    label: str
    scales: tuple
    envelope: tuple


def base_points_by_measure(p: ConjugacyProfile, count: int = HOLDER_BASE_POINTS) -> list:
    """Sample indices nearest to ``phi = k / count``, ``k = 0..count-1``."""
    phi = np.array([float(v) for v in p.phi])
    return [int(np.searchsorted(phi, k / count)) % len(phi) for k in range(count)]


def holder_exponent(p: ConjugacyProfile, xi0_set=None, scales=None,
                    floor_factor: float = 8.0) -> HolderEstimate:
    """Slope of the per-scale sup-oscillation of ``h`` against dyadic scales.

    For each scale ``r_j = 2^-j`` the envelope is the sup of ``|h(xi) - h(b)|``
    over base points ``b`` and samples with circle distance in ``[r_{j+1}, r_j]``.
    """
    x = p.x_np
    hv = np.array([float(v) for v in p.h])
    bases = base_points_by_measure(p) if xi0_set is None else list(xi0_set)
    if scales is None:
        floor = floor_factor * p.max_gap()
        J = int(math.floor(-math.log2(floor)))
        scales = list(range(3, J + 1))
    env, used = [], []
    for j in scales:
        hi, lo = 2.0 ** -j, 2.0 ** -(j + 1)
        best, seen = 0.0, False
        for b in bases:
            d = np.abs(x - x[b])
            d = np.minimum(d, 1 - d)
            m = (d >= lo) & (d <= hi)
            if m.any():
                seen = True
                best = max(best, float(np.max(np.abs(hv[m] - hv[b]))))
        if seen:
            used.append(hi)
            env.append(best)
    if len(used) < 4:
        raise PreconditionError(f"only {len(used)} usable scales")
    if max(env) < 1e-12 * max(1.0, float(np.max(hv))):
        return HolderEstimate(None, "flat (C-infinity at sampled scales)", tuple(used), tuple(env))
    pts = [(mpfr(r), mpfr(e)) for r, e in zip(used, env) if e > 0]
    slope = float(loglog_slope(pts))
    label = "Lipschitz-or-better at sampled scales (>= 1)" if slope >= 1 else f"{slope:.4f}"
    return HolderEstimate(slope, label, tuple(used), tuple(env))


def profile_from_density(xs, h) -> ConjugacyProfile:
    """Profile from explicit sorted offsets and density values (normalised here)."""
    xs = [mpfr(x) for x in xs]
    if xs[0] != 0 or any(b <= a for a, b in zip(xs, xs[1:])) or xs[-1] >= 1:
        raise PreconditionError("offsets must be strictly increasing in [0, 1) from 0")
    gam = tuple(gmpy2.log(mpfr(v)) for v in h)
    p = ConjugacyProfile(len(xs) - 1, tuple(xs), tuple(range(len(xs))), gam)
    return build_phi(build_density(p))


# -- pipeline and export ------------------------------------------------------------------


@dataclass(frozen=True)
class ConjugacySummary:
    profile: ConjugacyProfile
    integral: mpfr
    h_min: mpfr
    h_max: mpfr
    homological: float
    commutation: float
    gamma_gap: float
    holder: HolderEstimate


def conjugacy_run(T: CircleMap, N: int, rho, xi0: CirclePoint | None = None,
                  grid: int = 4096) -> ConjugacySummary:
    xi0 = xi0 or CirclePoint(mpfr(0, T.precision.bits))
    with T.precision.context():
        p = build_phi(build_density(gamma_on_orbit(T, xi0, N)))
        integral = integral_of_density(p)
        hmin, hmax = min(p.h), max(p.h)
        if not hmin > 0:
            raise NumericalInvariantViolation("density not positive")
        return ConjugacySummary(p, integral, hmin, hmax,
                                homological_residual(T, p, xi0, grid),
                                commutation_residual(p, rho), p.gamma_gap(),
                                holder_exponent(p))


def profile_csv(p: ConjugacyProfile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["xi", "gamma", "h", "phi"])
    for x, g, h, f in zip(p.xs, p.gamma, p.h, p.phi):
        w.writerow([to_decimal(x), to_decimal(g), to_decimal(h), to_decimal(f)])
    return buf.getvalue()


def holder_scan_text(est: HolderEstimate) -> str:
    return "".join(f"{r!r} {e!r}\n" for r, e in zip(est.scales, est.envelope))


def gamma_coherence(T: CircleMap, cf: ContinuedFraction, n_max: int, count: int = 1000,
                    seed: int = 0, N: int | None = None) -> float:
    """Largest ``|gamma(xi_i) - gamma(xi_j)| / (eps_n + sum_{s>n} k_{s+1} eps_s)``
    over random ``(i, j, n)`` with ``xi_j`` in ``Delta^(n)_i``.
    """
    from .denjoy import epsilon
    from .partitions import length_scales, segment

    need = cf.q(n_max + 1) + cf.q(n_max)
    N = max(need, 10_000) if N is None else max(N, need)
    rng = np.random.default_rng(seed)
    with T.precision.context():
        orb = orbit(T, CirclePoint(mpfr(0)), N)
        scales = length_scales(T, cf, n_max, orb)
        eps = {n: epsilon(T, cf, n, scales) for n in range(1, n_max + 1)}
        tail = {n: sum((cf.k(s + 1) * eps[s] for s in range(n + 1, n_max + 1)), mpfr(0))
                for n in range(1, n_max + 1)}
        pos = np.array([float(f) for f in orb.fracs])
        order = np.argsort(pos)
        spos = pos[order]
        worst = 0.0
        done = 0
        while done < count:
            n = int(rng.integers(1, n_max + 1))
            i = int(rng.integers(0, cf.q(n + 1)))
            seg = segment(orb, cf, n, i)
            s, L = float(seg.start), float(seg.length)
            a = np.searchsorted(spos, s, side="left")
            b = np.searchsorted(spos, s + L, side="right")
            cand = list(order[a:b])
            if s + L > 1:
                cand += list(order[: np.searchsorted(spos, s + L - 1, side="right")])
            cand = [int(j) for j in cand if j != i]
            if not cand:
                continue
            j = cand[int(rng.integers(0, len(cand)))]
            gap = abs(orb.log_d1_prefix[i] - orb.log_d1_prefix[j])
            worst = max(worst, float(gap / (eps[n] + tail[n])))
            done += 1
    return worst
