"""Boundary-element solver for Maxwell interior transmission eigenvalues."""

__version__ = "0.1.0"
