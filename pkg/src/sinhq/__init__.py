"""Lattice laboratory for the elliptic stochastic quantization of the
two-dimensional sinh-Gordon (cosh interaction) model."""
from .lattice import Field, Grid2, Grid4, PhysicsParams

__all__ = ["Grid2", "Grid4", "Field", "PhysicsParams"]
__version__ = "0.1.0"
