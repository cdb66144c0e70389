"""Coordinate-oracle verification of doubly warped product curvature identities."""

from . import dwp, exprlang, geometry, tensor, verify

__all__ = ["dwp", "exprlang", "geometry", "tensor", "verify"]
__version__ = "0.1.0"
