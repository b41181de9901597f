"""Numerical laboratory for the scalar Signorini problem on polygonal domains."""

__version__ = "0.1.0"
