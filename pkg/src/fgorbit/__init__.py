"""Orbit decision algorithms for free group automorphisms.

Given an automorphism phi of F_n and words u, v, the top-level entry points
decide whether u . phi^N equals (or is conjugate to) v for some exponent N,
and return the exponent when it exists.  The machinery underneath computes
efficient relative train track representatives of outer automorphisms.
"""

from .free_group import Automorphism, Word, reduce_word, is_conjugate

__all__ = [
    "Automorphism",
    "Word",
    "reduce_word",
    "is_conjugate",
    "element_orbit",
    "conjugacy_orbit",
    "OrbitAnswer",
]


def __getattr__(name):
    if name in ("element_orbit", "conjugacy_orbit", "OrbitAnswer"):
        from . import orbit

        return getattr(orbit, name)
    raise AttributeError(f"module 'fgorbit' has no attribute {name!r}")
