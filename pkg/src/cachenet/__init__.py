"""Collaborative in-network video caching: placement, selection, simulation."""

__version__ = "0.1.0"
