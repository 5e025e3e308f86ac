"""Positive self-commutators of positive operators on truncated Hilbert lattices."""

__version__ = "0.1.0"
