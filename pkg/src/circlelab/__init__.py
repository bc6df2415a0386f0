"""Numerics for smooth circle diffeomorphisms with irrational rotation number."""
from .numerics import Precision, working_precision
from .maps import family, make_arnold, make_rotation, make_two_harmonic

__version__ = "0.1.0"

__all__ = ["Precision", "working_precision", "family", "make_arnold", "make_rotation",
           "make_two_harmonic", "__version__"]
