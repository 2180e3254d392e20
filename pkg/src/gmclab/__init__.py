"""Numerical laboratory for complex Gaussian multiplicative chaos."""

__version__ = "0.1.0"
