"""Pointwise verification of curvature identities for 4D chart metrics."""

__version__ = "0.1.0"
