"""Exact Fibonacci series identities from the draw-until-red urn model."""

__version__ = "0.1.0"
