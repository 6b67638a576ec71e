"""Pseudo-spectral experiments for the fast-rotation limit of dissipative SQG."""

__version__ = "0.1.0"
