"""Coarse-grained PDE discovery from particle and agent simulation data.

Two workflows are covered: mining an unknown dependent variable from
local particle-distribution moments (Diffusion Maps on a particle-based
Burgers system), and recovering an unknown independent variable (an
emergent space coordinate) from scrambled time series of a complex
Ginzburg-Landau simulation. In both, a neural network regresses the PDE
right-hand side and the learned PDE is integrated and scored against
ground truth.
"""

from ._kernels import BACKEND, HAVE_EXT

__version__ = "0.1.0"

__all__ = ["BACKEND", "HAVE_EXT", "__version__"]
