"""Weighted optimal measures on discretized compact sets."""

__version__ = "0.1.0"
