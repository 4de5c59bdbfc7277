"""Dynamic 3D scene graphs updated from egocentric pick-and-place observations."""

__version__ = "0.1.0"
