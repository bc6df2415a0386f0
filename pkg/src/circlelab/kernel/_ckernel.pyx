# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled orbit kernel.

Same contract as ``_pykernel``.  The per-step transcendental functions are
evaluated from per-precision tables: ``sin/cos(2 pi u)`` by a 4096-entry table
plus a short Taylor series, ``log`` by exponent splitting, a 1024-entry table
and an atanh series.  Temporaries carry 16 guard bits, so results agree with
the correctly rounded fallback to a few ulp.
"""
from libc.stdlib cimport malloc, free
from gmpy2 cimport *

cdef extern from "mpfr.h":
    int mpfr_init2(mpfr_t x, mpfr_prec_t p)
    void mpfr_clear(mpfr_t x)
    int mpfr_set(mpfr_t r, mpfr_t x, mpfr_rnd_t rnd)
    int mpfr_set_ui(mpfr_t r, unsigned long x, mpfr_rnd_t rnd)
    int mpfr_set_si(mpfr_t r, long x, mpfr_rnd_t rnd)
    int mpfr_add(mpfr_t r, mpfr_t a, mpfr_t b, mpfr_rnd_t rnd)
    int mpfr_sub(mpfr_t r, mpfr_t a, mpfr_t b, mpfr_rnd_t rnd)
    int mpfr_mul(mpfr_t r, mpfr_t a, mpfr_t b, mpfr_rnd_t rnd)
    int mpfr_div(mpfr_t r, mpfr_t a, mpfr_t b, mpfr_rnd_t rnd)
    int mpfr_mul_ui(mpfr_t r, mpfr_t a, unsigned long b, mpfr_rnd_t rnd)
    int mpfr_mul_si(mpfr_t r, mpfr_t a, long b, mpfr_rnd_t rnd)
    int mpfr_div_ui(mpfr_t r, mpfr_t a, unsigned long b, mpfr_rnd_t rnd)
    int mpfr_add_ui(mpfr_t r, mpfr_t a, unsigned long b, mpfr_rnd_t rnd)
    int mpfr_sub_ui(mpfr_t r, mpfr_t a, unsigned long b, mpfr_rnd_t rnd)
    int mpfr_ui_div(mpfr_t r, unsigned long a, mpfr_t b, mpfr_rnd_t rnd)
    int mpfr_mul_2ui(mpfr_t r, mpfr_t a, unsigned long b, mpfr_rnd_t rnd)
    int mpfr_mul_2si(mpfr_t r, mpfr_t a, long b, mpfr_rnd_t rnd)
    int mpfr_div_2ui(mpfr_t r, mpfr_t a, unsigned long b, mpfr_rnd_t rnd)
    int mpfr_floor(mpfr_t r, mpfr_t a)
    int mpfr_frac(mpfr_t r, mpfr_t a, mpfr_rnd_t rnd)
    long mpfr_get_si(mpfr_t a, mpfr_rnd_t rnd)
    mpfr_exp_t mpfr_get_exp(mpfr_t a)
    int mpfr_cmpabs(mpfr_t a, mpfr_t b)
    int mpfr_sgn(mpfr_t a)
    int mpfr_zero_p(mpfr_t a)
    int mpfr_sin_cos(mpfr_t s, mpfr_t c, mpfr_t a, mpfr_rnd_t rnd)
    int mpfr_log(mpfr_t r, mpfr_t a, mpfr_rnd_t rnd)
    int mpfr_log1p(mpfr_t r, mpfr_t a, mpfr_rnd_t rnd)
    int mpfr_const_pi(mpfr_t r, mpfr_rnd_t rnd)
    int mpfr_const_log2(mpfr_t r, mpfr_rnd_t rnd)
    int mpfr_pow_ui(mpfr_t r, mpfr_t a, unsigned long n, mpfr_rnd_t rnd)
    int mpfr_cmp(mpfr_t a, mpfr_t b)

import_gmpy2()

BACKEND = "compiled"

DEF SIN_BITS = 12
DEF SIN_N = 4096
DEF LOG_BITS = 10
DEF LOG_N = 1024
DEF GUARD = 16
DEF MAX_TERMS = 64

cdef mpfr_rnd_t RN = MPFR_RNDN


cdef class _Tables:
    """Constants and lookup tables for one working precision."""
    cdef mpfr_prec_t wp
    cdef mpfr_t* sin_t
    cdef mpfr_t* cos_t
    cdef mpfr_t* log_t
    cdef mpfr_t twopi, ln2
    cdef mpfr_t sin_c[MAX_TERMS]
    cdef mpfr_t cos_c[MAX_TERMS]
    cdef mpfr_t atanh_c[MAX_TERMS]
    cdef int n_sin, n_cos, n_atanh

    def __cinit__(self, mpfr_prec_t bits):
        cdef int j, i
        cdef mpfr_t a, bound, term
        self.wp = bits + GUARD
        self.sin_t = <mpfr_t*> malloc(SIN_N * sizeof(mpfr_t))
        self.cos_t = <mpfr_t*> malloc(SIN_N * sizeof(mpfr_t))
        self.log_t = <mpfr_t*> malloc(LOG_N * sizeof(mpfr_t))
        mpfr_init2(self.twopi, self.wp)
        mpfr_init2(self.ln2, self.wp)
        mpfr_const_pi(self.twopi, RN)
        mpfr_mul_2ui(self.twopi, self.twopi, 1, RN)
        mpfr_const_log2(self.ln2, RN)
        mpfr_init2(a, self.wp + 16)
        for j in range(SIN_N):
            mpfr_init2(self.sin_t[j], self.wp)
            mpfr_init2(self.cos_t[j], self.wp)
            # angle 2 pi (j + 1/2) / SIN_N
            mpfr_const_pi(a, RN)
            mpfr_mul_ui(a, a, 2 * j + 1, RN)
            mpfr_div_2ui(a, a, SIN_BITS, RN)
            mpfr_sin_cos(self.sin_t[j], self.cos_t[j], a, RN)
        for j in range(LOG_N):
            mpfr_init2(self.log_t[j], self.wp)
            # log(1 + (j + 1/2) / LOG_N)
            mpfr_set_ui(a, 2 * j + 1, RN)
            mpfr_div_2ui(a, a, LOG_BITS + 1, RN)
            mpfr_log1p(self.log_t[j], a, RN)
        mpfr_clear(a)

        # series lengths: |theta| <= pi / SIN_N, |z| <= 2^-(LOG_BITS + 2)
        mpfr_init2(bound, 64)
        mpfr_init2(term, 64)
        mpfr_set_ui(bound, 1, RN)
        mpfr_div_2ui(bound, bound, self.wp + 4, RN)
        mpfr_const_pi(term, RN)
        mpfr_div_2ui(term, term, SIN_BITS, RN)
        self.n_sin = _terms_needed(term, bound)
        self.n_cos = self.n_sin
        # atanh terms z^2m/(2m+1) carry no factorial: need 2m (LOG_BITS + 2) > wp + 4
        self.n_atanh = (self.wp + 4) // (2 * (LOG_BITS + 2)) + 2
        mpfr_clear(bound)
        mpfr_clear(term)

        # sin(x)/x = sum (-1)^i x^2i / (2i+1)!, cos(x) = sum (-1)^i x^2i / (2i)!
        # atanh(z)/z = sum z^2i / (2i+1)
        for i in range(MAX_TERMS):
            mpfr_init2(self.sin_c[i], self.wp)
            mpfr_init2(self.cos_c[i], self.wp)
            mpfr_init2(self.atanh_c[i], self.wp)
        mpfr_set_ui(self.cos_c[0], 1, RN)
        mpfr_set_ui(self.sin_c[0], 1, RN)
        for i in range(1, MAX_TERMS):
            mpfr_div_ui(self.cos_c[i], self.sin_c[i - 1], 2 * i, RN)
            mpfr_mul_si(self.cos_c[i], self.cos_c[i], -1, RN)
            mpfr_div_ui(self.sin_c[i], self.cos_c[i], 2 * i + 1, RN)
        for i in range(MAX_TERMS):
            mpfr_set_ui(self.atanh_c[i], 1, RN)
            mpfr_div_ui(self.atanh_c[i], self.atanh_c[i], 2 * i + 1, RN)

    def __dealloc__(self):
        cdef int j
        if self.sin_t != NULL:
            for j in range(SIN_N):
                mpfr_clear(self.sin_t[j])
                mpfr_clear(self.cos_t[j])
            free(self.sin_t)
            free(self.cos_t)
        if self.log_t != NULL:
            for j in range(LOG_N):
                mpfr_clear(self.log_t[j])
            free(self.log_t)
        for j in range(MAX_TERMS):
            mpfr_clear(self.sin_c[j])
            mpfr_clear(self.cos_c[j])
            mpfr_clear(self.atanh_c[j])
        mpfr_clear(self.twopi)
        mpfr_clear(self.ln2)


cdef int _terms_needed(mpfr_t x, mpfr_t bound):
    # number of even-power terms m such that x^(2m) / (2m)! < bound
    cdef mpfr_t t
    cdef int m = 1
    mpfr_init2(t, 64)
    mpfr_set_ui(t, 1, RN)
    while m < MAX_TERMS:
        mpfr_mul(t, t, x, RN)
        mpfr_mul(t, t, x, RN)
        mpfr_div_ui(t, t, (2 * m - 1) * (2 * m), RN)
        if mpfr_cmp(t, bound) < 0:
            break
        m += 1
    mpfr_clear(t)
    return m + 1


_cache = {}


cdef _Tables _tables(mpfr_prec_t bits):
    t = _cache.get(bits)
    if t is None:
        t = _Tables(bits)
        _cache[bits] = t
    return <_Tables> t


cdef struct Work:
    mpfr_t a, b, th, z, sn, cs, p, q


cdef void _work_init(Work* w, mpfr_prec_t wp):
    mpfr_init2(w.a, wp); mpfr_init2(w.b, wp); mpfr_init2(w.th, wp); mpfr_init2(w.z, wp)
    mpfr_init2(w.sn, wp); mpfr_init2(w.cs, wp); mpfr_init2(w.p, wp); mpfr_init2(w.q, wp)


cdef void _work_clear(Work* w):
    mpfr_clear(w.a); mpfr_clear(w.b); mpfr_clear(w.th); mpfr_clear(w.z)
    mpfr_clear(w.sn); mpfr_clear(w.cs); mpfr_clear(w.p); mpfr_clear(w.q)


cdef void _sincos_turns(_Tables T, Work* w, mpfr_t u):
    # w.sn, w.cs <- sin, cos of 2 pi u for u in [0, 1)
    cdef long j
    cdef int i
    mpfr_mul_2ui(w.a, u, SIN_BITS, RN)
    j = mpfr_get_si(w.a, MPFR_RNDD)
    if j >= SIN_N:
        j = SIN_N - 1
    elif j < 0:
        j = 0
    mpfr_set_si(w.b, 2 * j + 1, RN)
    mpfr_div_2ui(w.b, w.b, SIN_BITS + 1, RN)
    mpfr_sub(w.th, u, w.b, RN)
    mpfr_mul(w.th, w.th, T.twopi, RN)
    mpfr_mul(w.z, w.th, w.th, RN)
    # Horner in z
    mpfr_set(w.p, T.sin_c[T.n_sin - 1], RN)
    mpfr_set(w.q, T.cos_c[T.n_cos - 1], RN)
    for i in range(T.n_sin - 2, -1, -1):
        mpfr_mul(w.p, w.p, w.z, RN)
        mpfr_add(w.p, w.p, T.sin_c[i], RN)
    for i in range(T.n_cos - 2, -1, -1):
        mpfr_mul(w.q, w.q, w.z, RN)
        mpfr_add(w.q, w.q, T.cos_c[i], RN)
    mpfr_mul(w.p, w.p, w.th, RN)          # sin(theta)
    # sin(A + th) = S cos th + C sin th ; cos(A + th) = C cos th - S sin th
    mpfr_mul(w.a, T.sin_t[j], w.q, RN)
    mpfr_mul(w.b, T.cos_t[j], w.p, RN)
    mpfr_add(w.sn, w.a, w.b, RN)
    mpfr_mul(w.a, T.cos_t[j], w.q, RN)
    mpfr_mul(w.b, T.sin_t[j], w.p, RN)
    mpfr_sub(w.cs, w.a, w.b, RN)


cdef void _log(_Tables T, Work* w, mpfr_t r, mpfr_t y):
    # r <- log(y), y > 0
    cdef mpfr_exp_t e = mpfr_get_exp(y)     # y = m 2^e, m in [1/2, 1)
    cdef long j
    cdef int i
    mpfr_mul_2si(w.a, y, 1 - e, RN)         # m2 = 2m in [1, 2)
    mpfr_sub_ui(w.b, w.a, 1, RN)            # m2 - 1
    mpfr_mul_2ui(w.b, w.b, LOG_BITS, RN)
    j = mpfr_get_si(w.b, MPFR_RNDD)
    if j >= LOG_N:
        j = LOG_N - 1
    elif j < 0:
        j = 0
    # c = 1 + (j + 1/2)/LOG_N ; z = (m2 - c)/(m2 + c)
    mpfr_set_si(w.b, 2 * j + 1, RN)
    mpfr_div_2ui(w.b, w.b, LOG_BITS + 1, RN)
    mpfr_add_ui(w.b, w.b, 1, RN)
    mpfr_sub(w.th, w.a, w.b, RN)
    mpfr_add(w.z, w.a, w.b, RN)
    mpfr_div(w.th, w.th, w.z, RN)
    mpfr_mul(w.z, w.th, w.th, RN)
    mpfr_set(w.p, T.atanh_c[T.n_atanh - 1], RN)
    for i in range(T.n_atanh - 2, -1, -1):
        mpfr_mul(w.p, w.p, w.z, RN)
        mpfr_add(w.p, w.p, T.atanh_c[i], RN)
    mpfr_mul(w.p, w.p, w.th, RN)
    mpfr_mul_2ui(w.p, w.p, 1, RN)
    mpfr_add(w.p, w.p, T.log_t[j], RN)
    mpfr_mul_si(w.q, T.ln2, e - 1, RN)
    mpfr_add(r, w.p, w.q, RN)


cdef class _Lift:
    """Unpacked lift spec with MPFR copies of its coefficients."""
    cdef mpfr_prec_t bits
    cdef int nh
    cdef long* ks
    cdef mpfr_t t
    cdef mpfr_t* coefs
    cdef mpfr_t* amps
    cdef mpfr_t* phases
    cdef _Tables T

    def __cinit__(self, spec):
        cdef int i
        bits, t, ks, coefs, amps, phases = spec
        self.bits = bits
        self.nh = len(ks)
        self.T = _tables(bits)
        mpfr_init2(self.t, bits)
        mpfr_set(self.t, MPFR(_as_mpfr(t)), RN)
        self.ks = <long*> malloc(max(self.nh, 1) * sizeof(long))
        self.coefs = <mpfr_t*> malloc(max(self.nh, 1) * sizeof(mpfr_t))
        self.amps = <mpfr_t*> malloc(max(self.nh, 1) * sizeof(mpfr_t))
        self.phases = <mpfr_t*> malloc(max(self.nh, 1) * sizeof(mpfr_t))
        for i in range(self.nh):
            self.ks[i] = ks[i]
            mpfr_init2(self.coefs[i], bits)
            mpfr_init2(self.amps[i], bits)
            mpfr_init2(self.phases[i], bits)
            mpfr_set(self.coefs[i], MPFR(_as_mpfr(coefs[i])), RN)
            mpfr_set(self.amps[i], MPFR(_as_mpfr(amps[i])), RN)
            mpfr_set(self.phases[i], MPFR(_as_mpfr(phases[i])), RN)

    def __dealloc__(self):
        cdef int i
        for i in range(self.nh):
            mpfr_clear(self.coefs[i])
            mpfr_clear(self.amps[i])
            mpfr_clear(self.phases[i])
        free(self.ks)
        free(self.coefs)
        free(self.amps)
        free(self.phases)
        mpfr_clear(self.t)


cdef mpfr _as_mpfr(x):
    if not MPFR_Check(x):
        raise TypeError("expected gmpy2.mpfr")
    return <mpfr> x


cdef long _step(_Lift L, Work* w, mpfr_t f, mpfr_t y, mpfr_t d, mpfr_t u, mpfr_t fl,
                bint want_d):
    # f <- frac of the image; returns the winding increment; d <- T'(f) if want_d
    cdef int i
    cdef long dw
    mpfr_add(y, f, L.t, RN)
    if want_d:
        mpfr_set_ui(d, 1, RN)
    for i in range(L.nh):
        mpfr_mul_si(u, f, L.ks[i], RN)
        mpfr_add(u, u, L.phases[i], RN)
        mpfr_floor(fl, u)
        mpfr_sub(u, u, fl, RN)
        _sincos_turns(L.T, w, u)
        mpfr_mul(w.a, L.coefs[i], w.sn, RN)
        mpfr_add(y, y, w.a, RN)
        if want_d:
            mpfr_mul(w.a, L.amps[i], w.cs, RN)
            mpfr_add(d, d, w.a, RN)
    mpfr_floor(fl, y)
    dw = mpfr_get_si(fl, RN)
    mpfr_sub(f, y, fl, RN)     # rounds to the state precision
    return dw


cdef class _Stepper:
    cdef _Lift L
    cdef Work w
    cdef mpfr_t f, y, d, u, fl, lg, s, c, tmp

    def __cinit__(self, spec, f0):
        self.L = _Lift(spec)
        cdef mpfr_prec_t wp = self.L.T.wp
        cdef mpfr_prec_t bits = self.L.bits
        _work_init(&self.w, wp)
        mpfr_init2(self.f, bits)
        mpfr_init2(self.y, wp)
        mpfr_init2(self.d, wp)
        mpfr_init2(self.u, wp)
        mpfr_init2(self.fl, wp)
        mpfr_init2(self.lg, bits)
        mpfr_init2(self.s, bits)
        mpfr_init2(self.c, bits)
        mpfr_init2(self.tmp, bits)
        mpfr_set(self.f, MPFR(_as_mpfr(f0)), RN)
        mpfr_set_ui(self.s, 0, RN)
        mpfr_set_ui(self.c, 0, RN)

    def __dealloc__(self):
        _work_clear(&self.w)
        mpfr_clear(self.f); mpfr_clear(self.y); mpfr_clear(self.d); mpfr_clear(self.u)
        mpfr_clear(self.fl); mpfr_clear(self.lg); mpfr_clear(self.s); mpfr_clear(self.c)
        mpfr_clear(self.tmp)

    cdef inline long step(self, bint want_log):
        cdef long dw = _step(self.L, &self.w, self.f, self.y, self.d, self.u, self.fl, want_log)
        if want_log:
            if self.L.nh == 0:
                mpfr_set_ui(self.lg, 0, RN)
            else:
                _log(self.L.T, &self.w, self.lg, self.d)
            # Neumaier update of (s, c) with lg
            mpfr_add(self.tmp, self.s, self.lg, RN)
            if mpfr_cmpabs(self.s, self.lg) >= 0:
                mpfr_sub(self.y, self.s, self.tmp, RN)
                mpfr_add(self.y, self.y, self.lg, RN)
            else:
                mpfr_sub(self.y, self.lg, self.tmp, RN)
                mpfr_add(self.y, self.y, self.s, RN)
            mpfr_add(self.c, self.c, self.y, RN)
            mpfr_set(self.s, self.tmp, RN)
        return dw

    cdef mpfr frac(self):
        cdef mpfr r = GMPy_MPFR_New(self.L.bits, NULL)
        mpfr_set(r.f, self.f, RN)
        return r

    cdef mpfr total(self):
        cdef mpfr r = GMPy_MPFR_New(self.L.bits, NULL)
        mpfr_add(r.f, self.s, self.c, RN)
        return r


def advance(spec, long w, f, long n):
    """Lift point ``(w, f)`` after ``n`` steps."""
    cdef _Stepper S = _Stepper(spec, f)
    cdef long i
    for i in range(n):
        w += S.step(False)
    return w, S.frac()


def advance_log(spec, long w, f, long n):
    """Lift point after ``n`` steps and the compensated sum of ``log T'``."""
    cdef _Stepper S = _Stepper(spec, f)
    cdef long i
    for i in range(n):
        w += S.step(True)
    return w, S.frac(), S.total()


def orbit(spec, long w, f, long n):
    """Windings, fractional parts and ``log T'`` prefix sums for ``n`` steps."""
    cdef _Stepper S = _Stepper(spec, f)
    cdef long i
    ws = [w]
    fs = [S.frac()]
    pre = [GMPy_MPFR_New(S.L.bits, NULL)]
    mpfr_set_ui((<mpfr> pre[0]).f, 0, RN)
    for i in range(n):
        w += S.step(True)
        ws.append(w)
        fs.append(S.frac())
        pre.append(S.total())
    return ws, fs, pre
