"""Polar coding with sparse spreading for unsourced Gaussian random access."""

__version__ = "0.1.0"
