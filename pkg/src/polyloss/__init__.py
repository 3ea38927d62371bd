"""Polynomial-expansion classification losses, series analysis, and a desk-scale trainer."""

__version__ = "0.1.0"
