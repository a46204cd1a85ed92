"""Numerical laboratory for dephasing-type open quantum systems."""

__version__ = "0.1.0"
