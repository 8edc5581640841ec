"""Uniform symmetric 1D grid, quadrature, stencils and the one-node delta.

Fields are plain numpy arrays of length ``grid.n`` (real or complex).  The
first and last nodes carry the Dirichlet closure: every operator in this
package treats values beyond them as zero and returns zero there.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class GridMismatchError(ValueError):
    """Raised when a field does not live on the grid it is paired with."""


@dataclass(frozen=True)
class SpatialGrid:
    """Nodes ``x_i = -L + i h``, ``i = 0..N-1`` with ``N`` odd and ``x_{(N-1)/2} = 0``."""

    half_width: float
    spacing: float
    x: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        L, h = float(self.half_width), float(self.spacing)
        if L <= 0 or h <= 0:
            raise ValueError("half_width and spacing must be positive")
        m = L / h
        half = int(round(m))
        if half < 1 or abs(m - half) > 1e-9 * max(1.0, m):
            raise ValueError(f"half_width/spacing = {m} must be a positive integer")
        x = h * np.arange(-half, half + 1, dtype=float)
        x.setflags(write=False)
        w = np.full(x.size, h)
        w[0] = w[-1] = h / 2
        w.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def default(cls) -> "SpatialGrid":
        return cls(20.0, 0.01)

    @property
    def h(self) -> float:
        return self.spacing

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def center(self) -> int:
        return (self.n - 1) // 2

    def refine(self, factor: int = 2) -> "SpatialGrid":
        return SpatialGrid(self.half_width, self.spacing / factor)

    def scaled(self, lam: float) -> "SpatialGrid":
        """The grid of physical points ``x = lam * y``."""
        return SpatialGrid(self.half_width * lam, self.spacing * lam)

    def check(self, *fields) -> None:
        for u in fields:
            if np.shape(u) != (self.n,):
                raise GridMismatchError(
                    f"field of shape {np.shape(u)} on a grid with {self.n} nodes")


# ---------------------------------------------------------------- quadrature

def integrate(grid: SpatialGrid, f) -> float | complex:
    """Trapezoid rule."""
    grid.check(f)
    return np.dot(grid.weights, f)


def inner(grid: SpatialGrid, u, v) -> float:
    """Real L2 pairing ``Re ∫ u conj(v)``."""
    grid.check(u, v)
    return float(np.real(np.dot(grid.weights, u * np.conj(v))))


class Norms(NamedTuple):
    l2: float
    l6: float
    h1: float
    grad_l2: float


def gradient(grid: SpatialGrid, u) -> np.ndarray:
    """Fourth-order centered derivative, used by the norm and energy functionals.

    Two-point centered at the nodes next to the ends, one-sided at the ends.
    """
    grid.check(u)
    h = grid.h
    u = np.asarray(u)
    d = np.empty_like(u)
    d[2:-2] = (u[:-4] - 8 * u[1:-3] + 8 * u[3:-1] - u[4:]) / (12 * h)
    d[1] = (u[2] - u[0]) / (2 * h)
    d[-2] = (u[-1] - u[-3]) / (2 * h)
    d[0] = (u[1] - u[0]) / h
    d[-1] = (u[-1] - u[-2]) / h
    return d


def norms(grid: SpatialGrid, u) -> Norms:
    grid.check(u)
    a2 = np.abs(u) ** 2
    l2sq = float(np.dot(grid.weights, a2))
    l6 = float(np.dot(grid.weights, a2 ** 3)) ** (1 / 6)
    g2 = float(np.dot(grid.weights, np.abs(gradient(grid, u)) ** 2))
    return Norms(np.sqrt(l2sq), l6, np.sqrt(l2sq + g2), np.sqrt(g2))


# ------------------------------------------------------------------ stencils

def first_derivative(grid: SpatialGrid, u) -> np.ndarray:
    """Centered two-point derivative; one-sided at the end nodes."""
    grid.check(u)
    u = np.asarray(u)
    h = grid.h
    d = np.empty_like(u)
    d[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    d[0] = (u[1] - u[0]) / h
    d[-1] = (u[-1] - u[-2]) / h
    return d


def second_derivative(grid: SpatialGrid, u) -> np.ndarray:
    """Three-point Laplacian on interior nodes; zero on the end nodes."""
    grid.check(u)
    if grid.n < 3:
        raise ValueError("need at least three nodes")
    u = np.asarray(u)
    d = np.zeros_like(u)
    d[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / grid.h ** 2
    return d


def lambda_op(grid: SpatialGrid, u) -> np.ndarray:
    """Scaling generator ``u/2 + y u'``."""
    return 0.5 * np.asarray(u) + grid.x * first_derivative(grid, u)


def discrete_delta_apply(grid: SpatialGrid, u, mu: float = 1.0) -> np.ndarray:
    """``mu * delta * u`` as a single-node field of height ``mu u(0) / h``.

    Paired with the trapezoid rule this gives ``<delta u, v> = mu Re u(0) conj(v(0))``
    exactly.
    """
    grid.check(u)
    u = np.asarray(u)
    out = np.zeros_like(u)
    out[grid.center] = mu * u[grid.center] / grid.h
    return out


def origin_value(grid: SpatialGrid, u):
    return np.asarray(u)[grid.center]


# ------------------------------------------------------------------------ io

def write_field_csv(path, grid: SpatialGrid, u) -> None:
    """Columns x, re, im with 17 significant digits."""
    grid.check(u)
    u = np.asarray(u, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "re", "im"])
        for xi, ui in zip(grid.x, u):
            w.writerow([f"{xi:.16e}", f"{ui.real:.16e}", f"{ui.imag:.16e}"])


def read_field_csv(path) -> tuple[SpatialGrid, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x = data[:, 0]
    h = (x[-1] - x[0]) / (x.size - 1)
    grid = SpatialGrid(float(x[-1]), float(h))
    if grid.n != x.size or not np.allclose(grid.x, x, rtol=0, atol=1e-9 * max(1.0, grid.half_width)):
        raise GridMismatchError(f"{path}: nodes are not a symmetric uniform grid")
    return grid, data[:, 1] + 1j * data[:, 2]
