"""Exact spectral gaps and certified lower bounds for reversible particle systems."""

__version__ = "0.1.0"
