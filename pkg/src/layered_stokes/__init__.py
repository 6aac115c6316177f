"""Verification laboratory for Stokes systems with coefficients measurable in x1."""

__version__ = "0.1.0"
