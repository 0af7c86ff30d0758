"""Numerical certification of existence, multiplicity and localisation of nontrivial
solutions of perturbed Hammerstein integral equations

    u(t) = B u(t) + int_0^1 k(t, s) g(s) f(s, u(s), D u(s)) ds

on cones of functions that are positive on a window [a, b].
"""

from .errors import HammerCertError

__version__ = "0.1.0"

__all__ = ["HammerCertError", "__version__"]
