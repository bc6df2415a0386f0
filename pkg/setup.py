"""Build the optional compiled orbit kernel.

The extension links against the MPFR/GMP copies that ship inside the gmpy2
wheel (``gmpy2.libs``) so that a single MPFR library is loaded per process.
If Cython or a compiler is unavailable the package still installs and runs
on the pure-Python kernel.
"""
import os

from setuptools import setup

ext_modules = []
try:
    import gmpy2
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:
    pass
else:
    gdir = os.path.dirname(gmpy2.__file__)
    bundled = os.path.abspath(os.path.join(gdir, "..", "gmpy2.libs"))
    kw = {}
    if os.path.isdir(bundled):
        libs = sorted(f for f in os.listdir(bundled) if f.startswith(("libmpfr", "libgmp")))
        kw = dict(extra_link_args=[os.path.join(bundled, f) for f in libs],
                  runtime_library_dirs=[bundled])
    else:
        kw = dict(libraries=["mpfr", "gmp"])
    ext_modules = cythonize(
        [Extension("circlelab.kernel._ckernel", ["src/circlelab/kernel/_ckernel.pyx"],
                   include_dirs=[gdir], extra_compile_args=["-O2"], **kw)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
