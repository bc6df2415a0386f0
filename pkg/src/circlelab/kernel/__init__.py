"""Orbit kernels: a compiled MPFR kernel with a pure-Python fallback.

The compiled extension is used when it imports; setting the environment
variable ``CIRCLELAB_PURE_PYTHON=1`` forces the fallback.  Both expose
``advance``, ``advance_log`` and ``orbit`` with identical signatures.
"""
import os

from . import _pykernel as python_backend

compiled_backend = None
if not os.environ.get("CIRCLELAB_PURE_PYTHON"):
    try:
        from . import _ckernel as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

active = compiled_backend or python_backend
BACKEND = active.BACKEND

advance = active.advance
advance_log = active.advance_log
orbit = active.orbit
