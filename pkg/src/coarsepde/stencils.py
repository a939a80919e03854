"""Finite-difference stencils of arbitrary width and derivative order.

Coefficients come from solving the Taylor-expansion system on the given
integer offsets, which yields the highest-order approximation the stencil
width admits. Near zero-flux boundaries the stencil window is shifted to
stay in-domain (one-sided), keeping the full width and order.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import ConfigError


def stencil_coefficients(offsets, deriv: int) -> np.ndarray:
    """Weights c_j such that sum_j c_j u(x + o_j h) ~ h^p u^(p)(x)."""
    offsets = np.asarray(offsets, dtype=np.float64)
    n = offsets.size
    if deriv >= n:
        raise ConfigError(
            f"derivative order {deriv} needs more than {n} points"
        )
    if np.unique(offsets).size != n:
        raise ConfigError("stencil offsets must be distinct")
    a = np.vander(offsets, n, increasing=True).T / \
        np.array([math.factorial(r) for r in range(n)])[:, None]
    b = np.zeros(n)
    b[deriv] = 1.0
    return np.linalg.solve(a, b)


@lru_cache(maxsize=None)
def _derivative_matrix_cached(n: int, deriv: int, width: int,
                              boundary: str) -> np.ndarray:
    if width % 2 != 1 or width < deriv + 1:
        raise ConfigError("stencil width must be odd and exceed the "
                          "derivative order")
    if width > n:
        raise ConfigError(f"stencil width {width} exceeds grid size {n}")
    half = width // 2
    mat = np.zeros((n, n))
    if boundary == "periodic":
        offs = np.arange(-half, half + 1)
        coef = stencil_coefficients(offs, deriv)
        for j, o in enumerate(offs):
            mat[np.arange(n), (np.arange(n) + o) % n] = \
                mat[np.arange(n), (np.arange(n) + o) % n] + coef[j]
    elif boundary == "zero_flux":
        for i in range(n):
            lo = min(max(i - half, 0), n - width)
            offs = np.arange(lo - i, lo - i + width)
            coef = stencil_coefficients(offs, deriv)
            mat[i, lo:lo + width] = coef
    else:
        raise ConfigError(f"unknown boundary {boundary!r}")
    mat.setflags(write=False)
    return mat


def derivative_matrix(n: int, deriv: int, width: int, boundary: str,
                      dx: float) -> np.ndarray:
    """Dense matrix D with (D @ u) ~ d^p u / dx^p on a uniform grid."""
    return _derivative_matrix_cached(n, deriv, width, boundary) / dx ** deriv


def differentiate(values: np.ndarray, deriv: int, width: int, boundary: str,
                  dx: float) -> np.ndarray:
    """Apply the stencil along the last axis of ``values``."""
    mat = derivative_matrix(values.shape[-1], deriv, width, boundary, dx)
    return values @ mat.T
