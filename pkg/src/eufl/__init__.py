"""Euclidean uncapacitated facility location: LP rounding pipeline and verification suite."""
__version__ = "0.1.0"
