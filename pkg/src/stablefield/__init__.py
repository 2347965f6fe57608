"""Stationary symmetric alpha-stable random fields generated by nonsingular Z^d-actions."""

__version__ = "0.1.0"
