"""Half-line representation of even fields.

An even field on the symmetric grid is stored by its values at nodes
``0, h, ..., (M-1) h``; the end node ``L`` is the Dirichlet zero.  The
Schrödinger-type operator ``-d2 + V - mu delta`` restricted to even fields
is tridiagonal in this representation, with the reflected stencil
``2 (u0 - u1) / h^2`` at the origin.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from .grid import SpatialGrid


def fold(grid: SpatialGrid, u) -> np.ndarray:
    """Values at ``x = 0, h, ..., L - h``."""
    return np.asarray(u)[grid.center:-1].copy()


def unfold(grid: SpatialGrid, v) -> np.ndarray:
    v = np.asarray(v)
    out = np.zeros(grid.n, dtype=v.dtype)
    c = grid.center
    out[c:-1] = v
    out[1:c] = v[:0:-1]
    return out


def half_weights(grid: SpatialGrid) -> np.ndarray:
    """Weights such that ``sum(w * f g)`` is the full-line trapezoid of even ``f g``."""
    w = np.full(grid.center, 2 * grid.h)
    w[0] = grid.h
    return w


def banded(grid: SpatialGrid, potential, delta_strength: float = 0.0,
           shift: complex = 0.0, scale: complex = 1.0) -> np.ndarray:
    """Banded (1, 1) storage of ``shift + scale * (-d2 + V - mu delta)`` on even fields."""
    h = grid.h
    V = fold(grid, potential)
    m = V.size
    ab = np.zeros((3, m), dtype=np.result_type(V, shift, scale))
    diag = 2.0 / h ** 2 + V
    diag = diag.astype(ab.dtype)
    diag[0] -= delta_strength / h
    ab[1] = shift + scale * diag
    off = -scale / h ** 2
    ab[0, 1:] = off                  # super-diagonal
    ab[2, :-1] = off                 # sub-diagonal
    ab[0, 1] = 2 * off               # reflected neighbour at the origin
    return ab


def apply_banded(ab: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = ab[1] * v
    out[:-1] += ab[0, 1:] * v[1:]
    out[1:] += ab[2, :-1] * v[:-1]
    return out


def solve(ab: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return solve_banded((1, 1), ab, rhs)
