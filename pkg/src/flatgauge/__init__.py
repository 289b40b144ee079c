"""Numerical laboratory for multiscale flatness coefficients of two-phase boundaries."""

__version__ = "0.1.0"
