import os
import subprocess
import sys

import pytest
from gmpy2 import mpfr

from circlelab import kernel
from circlelab.maps import make_arnold, make_two_harmonic

needs_compiled = pytest.mark.skipif(kernel.compiled_backend is None,
                                    reason="compiled kernel not built")


def maps():
    return [make_arnold("0.61", "0.5"), make_arnold("0.2", "0.95"),
            make_two_harmonic("0.4", "0.4", "0.2")]


@needs_compiled
def test_compiled_is_default():
    assert kernel.BACKEND == kernel.compiled_backend.BACKEND


@needs_compiled
@pytest.mark.parametrize("n", [0, 1, 7, 3000])
def test_backends_agree(n):
    tol = mpfr("1e-42")
    py, c = kernel.python_backend, kernel.compiled_backend
    for T in maps():
        for f0 in (mpfr(0), mpfr("0.73")):
            wa, fa = py.advance(T.spec, 2, f0, n)
            wb, fb = c.advance(T.spec, 2, f0, n)
            assert abs((wa + fa) - (wb + fb)) < tol
            a, b = py.advance_log(T.spec, 0, f0, n), c.advance_log(T.spec, 0, f0, n)
            assert abs(a[2] - b[2]) < tol
            oa, ob = py.orbit(T.spec, 0, f0, n), c.orbit(T.spec, 0, f0, n)
            assert oa[0] == ob[0]
            assert max(abs(x - y) for x, y in zip(oa[1], ob[1])) < tol
            assert max(abs(x - y) for x, y in zip(oa[2], ob[2])) < tol


def test_fractional_parts_stay_in_unit_interval():
    for T in maps():
        ws, fs, _ = kernel.orbit(T.spec, 0, mpfr("0.999"), 500)
        assert all(0 <= f < 1 for f in fs)
        assert all(b - a in (0, 1) for a, b in zip(ws, ws[1:]))


def test_pure_python_switch():
    code = "from circlelab import kernel; print(kernel.BACKEND == kernel.python_backend.BACKEND)"
    env = dict(os.environ, CIRCLELAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "True"
