"""Pure-Python orbit kernel (gmpy2 arithmetic, correctly rounded transcendentals).

A lift is described by ``spec = (bits, t, ks, coefs, amps, phases)`` and acts on
the fractional part ``f`` of a lift point ``w + f`` as

    f -> f + t + sum_k coefs[k] * sin(2 pi u_k),   u_k = frac(ks[k] f + phases[k])

with derivative ``1 + sum_k amps[k] cos(2 pi u_k)``.  Windings are Python ints.
"""
import gmpy2
from gmpy2 import mpfr

BACKEND = "python"


def _step(spec, f, twopi):
    _, t, ks, coefs, amps, phases = spec
    y = f + t
    d = mpfr(1)
    for k, c, a, ph in zip(ks, coefs, amps, phases):
        u = k * f + ph
        u = u - gmpy2.floor(u)
        s, co = gmpy2.sin_cos(twopi * u)
        y = y + c * s
        d = d + a * co
    fl = gmpy2.floor(y)
    return int(fl), y - fl, d


def _ctx(spec):
    return gmpy2.context(gmpy2.get_context(), precision=spec[0], round=gmpy2.RoundToNearest)


def advance(spec, w, f, n):
    """Lift point ``(w, f)`` after ``n`` steps."""
    with _ctx(spec):
        twopi = 2 * gmpy2.const_pi()
        f = mpfr(f)
        for _ in range(n):
            dw, f, _ = _step(spec, f, twopi)
            w += dw
        return w, f


def advance_log(spec, w, f, n):
    """Lift point after ``n`` steps and the compensated sum of ``log T'`` along the way."""
    with _ctx(spec):
        twopi = 2 * gmpy2.const_pi()
        f = mpfr(f)
        s = mpfr(0)
        c = mpfr(0)
        for _ in range(n):
            dw, fn, d = _step(spec, f, twopi)
            x = gmpy2.log(d)
            t = s + x
            if abs(s) >= abs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t
            w += dw
            f = fn
        return w, f, s + c


def orbit(spec, w, f, n):
    """Windings, fractional parts and ``log T'`` prefix sums for ``n`` steps.

    All three lists have length ``n + 1``; ``prefix[i] = sum_{j<i} log T'(x_j)``.
    """
    with _ctx(spec):
        twopi = 2 * gmpy2.const_pi()
        f = mpfr(f)
        ws, fs, pre = [w], [f], [mpfr(0)]
        s = mpfr(0)
        c = mpfr(0)
        for _ in range(n):
            dw, fn, d = _step(spec, f, twopi)
            x = gmpy2.log(d)
            t = s + x
            if abs(s) >= abs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t
            w += dw
            f = fn
            ws.append(w)
            fs.append(f)
            pre.append(s + c)
        return ws, fs, pre
