"""Linearized operators around the ground state, their inverses, beta and coercivity gaps."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu, spsolve

from . import _evenline
from .grid import (SpatialGrid, discrete_delta_apply, inner, lambda_op, origin_value,
                   second_derivative)
from .ground_state import ConvergenceError, GroundStateSpec, ground_state, ground_state_derivative


class SolvabilityError(ValueError):
    """Right-hand side is not orthogonal to the kernel of the operator."""


class ParityError(ValueError):
    pass


@dataclass(frozen=True)
class LinearizedOperator:
    """``L+ = -d2 + 1 - 5 q^4`` or ``L- = -d2 + 1 - q^4`` around the field ``q``.

    ``delta_strength`` adds ``- delta_strength * delta``.
    """

    kind: str
    grid: SpatialGrid
    q: np.ndarray = field(repr=False)
    delta_strength: float = 0.0

    def __post_init__(self):
        if self.kind not in ("plus", "minus"):
            raise ValueError(f"kind must be 'plus' or 'minus', got {self.kind!r}")
        self.grid.check(self.q)

    @classmethod
    def around(cls, kind: str, grid: SpatialGrid, q=None, delta_strength: float = 0.0):
        q = ground_state(GroundStateSpec(), grid) if q is None else np.asarray(q, dtype=float)
        return cls(kind, grid, q, delta_strength)

    @property
    def potential(self) -> np.ndarray:
        return 1 - (5 if self.kind == "plus" else 1) * self.q ** 4

    def banded(self, shift: float = 0.0) -> np.ndarray:
        """Even-sector half-line matrix, see :mod:`._evenline`."""
        return _evenline.banded(self.grid, self.potential, self.delta_strength, shift=shift)


def apply(op: LinearizedOperator, f) -> np.ndarray:
    out = (-second_derivative(op.grid, f) + op.potential * f
           - discrete_delta_apply(op.grid, f, op.delta_strength))
    out[[0, -1]] = 0
    return out


def _check_even(grid: SpatialGrid, g, rtol: float = 1e-10):
    g = np.asarray(g)
    if np.max(np.abs(g - g[::-1])) > rtol * max(np.max(np.abs(g)), 1e-300):
        raise ParityError("right-hand side must be even")


def solve_plus(op: LinearizedOperator, g) -> np.ndarray:
    """Even solution of ``L+ f = g`` (``L+`` is invertible on even fields)."""
    if op.kind != "plus":
        raise ValueError("solve_plus needs the L+ operator")
    op.grid.check(g)
    _check_even(op.grid, g)
    f = _evenline.solve(op.banded(), _evenline.fold(op.grid, g))
    return _evenline.unfold(op.grid, f)


def solve_minus(op: LinearizedOperator, g, tol_solv: float = 1e-8,
                return_multiplier: bool = False):
    """Even solution of ``L- f = g`` with ``<f, q> = 0``.

    Solved through the bordered system ``[L-, q; q^T W, 0]``, which returns the
    solution for the part of ``g`` orthogonal to ``q`` together with the
    multiplier ``c`` of the discarded component.
    """
    if op.kind != "minus":
        raise ValueError("solve_minus needs the L- operator")
    grid = op.grid
    grid.check(g)
    _check_even(grid, g)
    gnorm = np.sqrt(inner(grid, g, g))
    if gnorm == 0:
        return (np.zeros(grid.n), 0.0) if return_multiplier else np.zeros(grid.n)
    pairing = inner(grid, g, op.q)
    if abs(pairing) > tol_solv * gnorm:
        raise SolvabilityError(
            f"<g, Q> = {pairing:.3e} exceeds tol_solv * ||g|| = {tol_solv * gnorm:.3e}")
    ab = op.banded()
    m = ab.shape[1]
    A = sp.diags([ab[2, :-1], ab[1], ab[0, 1:]], [-1, 0, 1], format="csr")
    qh = _evenline.fold(grid, op.q)
    wq = _evenline.half_weights(grid) * qh
    K = sp.bmat([[A, sp.csr_matrix(qh[:, None])], [sp.csr_matrix(wq[None, :]), None]], format="csc")
    sol = spsolve(K, np.append(_evenline.fold(grid, g), 0.0))
    f = _evenline.unfold(grid, sol[:m])
    return (f, float(sol[m])) if return_multiplier else f


# ------------------------------------------------------------------ beta, rho

def rho(grid: SpatialGrid, q=None) -> np.ndarray:
    """Even solution of ``L+ rho = |y|^2 q``."""
    op = LinearizedOperator.around("plus", grid, q)
    return solve_plus(op, grid.x ** 2 * op.q)


def beta_coefficient(mu: float, grid: SpatialGrid | None = None,
                     both: bool = False):
    """``beta = 2 mu Q(0)^2 / ||yQ||^2`` by two routes.

    (a) the closed formula with ``||yQ||^2`` by quadrature;
    (b) the solvability condition ``<mu delta Q + beta |y|^2 Q / 4, Lambda Q> = 0``
        of the leading profile block, with ``Lambda Q`` from the exact derivative.
    """
    grid = SpatialGrid.default() if grid is None else grid
    spec = GroundStateSpec()
    q = ground_state(spec, grid)
    y = grid.x
    route_a = 2 * mu * q[grid.center] ** 2 / inner(grid, y * q, y * q)
    lq = 0.5 * q + y * ground_state_derivative(spec, grid)
    route_b = -4 * inner(grid, discrete_delta_apply(grid, q, mu), lq) / inner(grid, y ** 2 * q, lq)
    return (route_a, route_b) if both else route_a


# --------------------------------------------------------------- coercivity

def _symmetric_even(op: LinearizedOperator):
    """Half-line stiffness ``W A`` and mass ``W`` (both symmetric)."""
    ab = op.banded()
    w = _evenline.half_weights(op.grid)
    A = sp.diags([ab[2, :-1], ab[1], ab[0, 1:]], [-1, 0, 1], format="csr")
    return (sp.diags(w) @ A).tocsr(), sp.diags(w).tocsr()


def coercivity_gap(op: LinearizedOperator, constraints=(), n_values: int = 1) -> float | np.ndarray:
    """Smallest Rayleigh quotient ``<L e, e> / <e, e>`` over even ``e`` orthogonal to ``constraints``.

    Projected inverse iteration accelerated by Lanczos: the shifted inverse is
    the bordered solve ``[L - s, c; c^T W, 0]``, whose range is the constraint
    complement, and the shift sits below the spectrum so the iteration
    converges to the bottom of the constrained spectrum.
    """
    grid = op.grid
    S, W = _symmetric_even(op)
    m = S.shape[0]
    shift = float(np.min(op.potential)) - 1.0
    K = S - shift * W
    if len(constraints):
        Y = np.column_stack([_evenline.fold(grid, c) for c in constraints])
        if np.linalg.matrix_rank(Y) < Y.shape[1]:
            raise ValueError("constraint fields are linearly dependent")
        WY = sp.csr_matrix(W @ Y)
        K = sp.bmat([[K, WY], [WY.T, None]])
    lu = splu(K.tocsc())
    pad = np.zeros(K.shape[0] - m)

    def opinv(r):
        return lu.solve(np.concatenate([np.ravel(r), pad]))[:m]

    try:
        vals = eigsh(S, k=n_values, M=W, sigma=shift, which="LM",
                     OPinv=LinearOperator((m, m), matvec=opinv, dtype=float),
                     return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        raise ConvergenceError("constrained eigenvalue iteration did not converge") from exc
    vals = np.sort(vals)
    return float(vals[0]) if n_values == 1 else vals


# ------------------------------------------------------------ algebra check

def _algebra_fields(grid: SpatialGrid):
    q = ground_state(GroundStateSpec(), grid)
    y2q = grid.x ** 2 * q
    plus = LinearizedOperator.around("plus", grid, q)
    minus = LinearizedOperator.around("minus", grid, q)
    lq = lambda_op(grid, q)
    r1 = apply(minus, q)
    r2 = apply(plus, lq) + 2 * q
    r3 = apply(minus, y2q) + 4 * lq
    return r1, r2, r3, solve_plus(plus, y2q)


def _l2(grid, f):
    return float(np.sqrt(inner(grid, f, f)))


def algebra_residuals(grid: SpatialGrid, reference_levels: tuple[int, int] = (8, 16)) -> dict:
    """L2 residuals of the four algebraic identities on ``grid``.

    The identity ``L+ rho = |y|^2 Q`` holds exactly for the discrete solve, so
    its entry is the discretization error of ``rho`` against a Richardson
    extrapolation from two finer nested grids.
    """
    r1, r2, r3, rho_h = _algebra_fields(grid)
    fine = [_algebra_fields(grid.refine(k))[3] for k in reference_levels]
    a, b = reference_levels
    # restrict the fine solutions to the coarse nodes
    coarse = [f[::k] for f, k in zip(fine, reference_levels)]
    ratio = (b / a) ** 2
    rho_ref = (ratio * coarse[1] - coarse[0]) / (ratio - 1)
    q = ground_state(GroundStateSpec(), grid)
    y = grid.x
    return {
        "L-Q": _l2(grid, r1),
        "L+LambdaQ+2Q": _l2(grid, r2),
        "L-y2Q+4LambdaQ": _l2(grid, r3),
        "rho": _l2(grid, rho_h - rho_ref),
        "Q_rho_ratio": inner(grid, q, rho_h) / (0.5 * inner(grid, y * q, y * q)),
    }


def origin_kink(grid: SpatialGrid, f) -> float:
    """Jump of the one-sided derivatives at the origin, ``f'(0+) - f'(0-)``."""
    c = grid.center
    return float(2 * (np.real(f[c + 1]) - np.real(origin_value(grid, f))) / grid.h)
