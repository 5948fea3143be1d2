"""Finite-precision p-adic period rings, Witt vectors and (phi, Gamma)-module cohomology."""

__version__ = "0.1.0"
