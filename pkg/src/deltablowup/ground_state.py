"""Ground states, conserved functionals and the fixed-mass minimizer."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _evenline
from .grid import SpatialGrid, discrete_delta_apply, inner, norms, origin_value, second_derivative

log = logging.getLogger(__name__)

#: ||Q||_2^2 for the mu = 0, omega = 1 ground state.
Q_MASS = np.sqrt(3.0) * np.pi / 2
#: Sharp Gagliardo-Nirenberg constant 3 / ||Q||_2^4.
C_GN = 3.0 / Q_MASS ** 2
#: ||y Q||_2^2 in closed form.
YQ_SQUARED = np.sqrt(3.0) * np.pi ** 3 / 32


class InvalidParameters(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class GroundStateSpec:
    omega: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if self.omega <= 0:
            raise InvalidParameters(f"omega must be positive, got {self.omega}")
        if self.mu > 0 and self.omega <= self.mu ** 2 / 4:
            raise InvalidParameters(
                f"omega = {self.omega} must exceed mu^2/4 = {self.mu ** 2 / 4} for mu > 0")

    @property
    def shift(self) -> float:
        return float(np.arctanh(self.mu / (2 * np.sqrt(self.omega))))


def _sech(z):
    e = np.exp(-np.abs(z))
    return 2 * e / (1 + e * e)


def ground_state(spec: GroundStateSpec, x) -> np.ndarray:
    """``[3 omega sech^2(2 sqrt(omega)|x| + artanh(mu / 2 sqrt(omega)))]^(1/4)``.

    ``x`` is either a grid or an array of points.
    """
    x = x.x if isinstance(x, SpatialGrid) else np.asarray(x, dtype=float)
    z = 2 * np.sqrt(spec.omega) * np.abs(x) + spec.shift
    return (3 * spec.omega) ** 0.25 * np.sqrt(_sech(z))


def ground_state_derivative(spec: GroundStateSpec, x) -> np.ndarray:
    """Exact ``d/dx`` of :func:`ground_state` (one-sided limit 0 taken at x = 0)."""
    x = x.x if isinstance(x, SpatialGrid) else np.asarray(x, dtype=float)
    z = 2 * np.sqrt(spec.omega) * np.abs(x) + spec.shift
    return -np.sqrt(spec.omega) * np.tanh(z) * np.sign(x) * ground_state(spec, x)


def Q(grid: SpatialGrid) -> np.ndarray:
    return ground_state(GroundStateSpec(), grid)


def ground_state_mass(spec: GroundStateSpec) -> float:
    """``||Q_{omega,mu}||_2^2 = sqrt(3) (pi/2 - arcsin(mu / 2 sqrt(omega)))``."""
    return float(np.sqrt(3.0) * (np.pi / 2 - np.arcsin(spec.mu / (2 * np.sqrt(spec.omega)))))


def discrete_ground_state(grid: SpatialGrid, spec: GroundStateSpec = GroundStateSpec(),
                          tol: float = 1e-13, maxiter: int = 30) -> np.ndarray:
    """Even solution of the discrete problem ``-D2 q + omega q - mu delta q - q^5 = 0``.

    Newton iteration on the half line, started from the closed form.
    """
    q = _evenline.fold(grid, ground_state(spec, grid))
    zero = np.zeros(grid.n)
    for it in range(maxiter):
        ab = _evenline.banded(grid, zero, spec.mu, shift=spec.omega)
        res = _evenline.apply_banded(ab, q) - q ** 5
        jac = _evenline.banded(grid, _evenline.unfold(grid, -5 * q ** 4), spec.mu, shift=spec.omega)
        dq = _evenline.solve(jac, res)
        q = q - dq
        if np.max(np.abs(dq)) < tol * np.max(np.abs(q)):
            break
    else:
        raise ConvergenceError("Newton iteration for the discrete ground state did not converge")
    return _evenline.unfold(grid, q)


class Mass(NamedTuple):
    M: float          # (1/2) ||u||_2^2
    l2_squared: float


def mass(grid: SpatialGrid, u) -> Mass:
    l2sq = inner(grid, u, u)
    return Mass(0.5 * l2sq, l2sq)


def energy(grid: SpatialGrid, u, mu: float = 0.0) -> float:
    """``1/2 ||u'||^2 - mu/2 |u(0)|^2 - 1/6 ||u||_6^6``."""
    nm = norms(grid, u)
    return 0.5 * nm.grad_l2 ** 2 - 0.5 * mu * abs(origin_value(grid, u)) ** 2 - nm.l6 ** 6 / 6


def pohozaev_defect(grid: SpatialGrid) -> float:
    """``1/2 ||Q'||^2 - int F(Q)`` with the exact derivative of the closed form."""
    spec = GroundStateSpec()
    q, dq = ground_state(spec, grid), ground_state_derivative(spec, grid)
    return float(0.5 * inner(grid, dq, dq) - np.dot(grid.weights, q ** 6) / 6)


class GNCheck(NamedTuple):
    lhs: float
    rhs: float
    ratio: float


def gn_check(grid: SpatialGrid, u) -> GNCheck:
    """Compare ``||u||_6^6`` with ``C_GN ||u||_2^4 ||u'||_2^2``."""
    nm = norms(grid, u)
    if nm.l2 == 0:
        raise ValueError("gn_check needs a nonzero field")
    lhs = nm.l6 ** 6
    rhs = C_GN * nm.l2 ** 4 * nm.grad_l2 ** 2
    return GNCheck(lhs, rhs, lhs / rhs)


def pseudoconformal_solution(t: float, grid: SpatialGrid) -> np.ndarray:
    """Explicit critical-mass blow-up solution of the delta-free equation (blows up at t = 0)."""
    if t >= 0:
        raise ValueError("pseudo-conformal solution is defined for t < 0")
    a = abs(t)
    if grid.h / a > 0.2:
        raise ResolutionError(f"h/|t| = {grid.h / a:.3g} exceeds 0.2; the profile is unresolved")
    x = grid.x
    return a ** -0.5 * ground_state(GroundStateSpec(), x / a) * np.exp(-1j * x ** 2 / (4 * a) + 1j / a)


# ------------------------------------------------------------ minimization

@dataclass
class MinimizerResult:
    field: np.ndarray
    omega: float
    energy: float
    iterations: int
    converged: bool


def lagrange_multiplier(grid: SpatialGrid, u, mu: float) -> float:
    """``omega = <u'' + u^5 + mu delta u, u> / ||u||^2`` with the discrete Laplacian."""
    num = inner(grid, second_derivative(grid, u) + np.abs(u) ** 4 * u
                + discrete_delta_apply(grid, u, mu), u)
    return num / inner(grid, u, u)


def _scheme_energy(grid: SpatialGrid, u, mu: float) -> float:
    """Energy whose gradient is exactly ``-D2 u - mu delta u - u^5`` on the grid."""
    du = np.diff(u) / grid.h
    return (0.5 * grid.h * np.sum(du ** 2) - 0.5 * mu * origin_value(grid, u) ** 2
            - np.dot(grid.weights, u ** 6) / 6)


def _implicit_factor(grid: SpatialGrid, mu: float, dt: float):
    n = grid.n - 2
    h2 = grid.h ** 2
    main = np.full(n, 1 + 2 * dt / h2)
    main[grid.center - 1] -= dt * mu / grid.h
    off = np.full(n - 1, -dt / h2)
    return splu(sp.diags([off, main, off], [-1, 0, 1], format="csc"))


def _polish(grid: SpatialGrid, u, omega: float, M: float, mu: float,
            tol: float = 1e-10, maxiter: int = 30):
    """Newton on ``-D2 v - mu delta v + omega v - v^5 = 0, ||v||^2 = M^2`` for even ``v``."""
    v = _evenline.fold(grid, u)
    w = _evenline.half_weights(grid)
    zero = np.zeros(grid.n)
    for _ in range(maxiter):
        F = _evenline.apply_banded(_evenline.banded(grid, zero, mu, shift=omega), v) - v ** 5
        G = np.dot(w, v * v) - M ** 2
        J0 = _evenline.banded(grid, _evenline.unfold(grid, -5 * v ** 4), mu, shift=omega)
        z1, z2 = _evenline.solve(J0, F), _evenline.solve(J0, v)
        dw = (2 * np.dot(w * v, z1) - G) / (2 * np.dot(w * v, z2))
        dv = z1 - dw * z2
        v, omega = v - dv, omega - dw
        if np.max(np.abs(dv)) < tol * np.max(np.abs(v)) and abs(dw) < tol * abs(omega):
            return _evenline.unfold(grid, v), omega
    raise ConvergenceError("Newton refinement of the minimizer did not converge")


def minimize_fixed_mass(M: float, mu: float, grid: SpatialGrid, dt: float = 1e-3,
                        rtol: float = 1e-9, window: int = 100,
                        max_iter: int = 200_000) -> MinimizerResult:
    """Minimize the energy over ``||u||_2 = M`` by normalized semi-implicit gradient flow.

    Each step solves ``(1 + dt(-D2 - mu delta)) v = u + dt |u|^4 u`` and rescales
    ``v`` back to mass ``M``; the step is halved whenever the energy rises.
    The flow is slow along the near-flat scaling direction, so once the energy
    has settled the state is refined by Newton on the constrained
    Euler-Lagrange system.
    """
    if mu <= 0:
        raise InvalidParameters("the fixed-mass minimizer needs mu > 0")
    if not 0 < M < np.sqrt(Q_MASS):
        raise InvalidParameters(f"M = {M} must lie in (0, ||Q||_2 = {np.sqrt(Q_MASS):.6f})")

    def renorm(v):
        return v * (M / np.sqrt(inner(grid, v, v)))

    u = renorm(Q(grid).astype(float))
    e = _scheme_energy(grid, u, mu)
    history = [e]
    lu = _implicit_factor(grid, mu, dt)
    for it in range(1, max_iter + 1):
        while True:
            rhs = u[1:-1] + dt * u[1:-1] ** 5
            v = np.zeros_like(u)
            v[1:-1] = lu.solve(rhs)
            v = renorm(v)
            e_new = _scheme_energy(grid, v, mu)
            if e_new <= e + 1e-15 * abs(e) or dt < 1e-8:
                break
            dt /= 2
            lu = _implicit_factor(grid, mu, dt)
        u, e = v, e_new
        history.append(e)
        if it >= window and abs(history[-1] - history[-1 - window]) <= rtol * abs(e):
            u, omega = _polish(grid, u, lagrange_multiplier(grid, u, mu), M, mu)
            return MinimizerResult(u, omega, energy(grid, u, mu), it, True)
    raise ConvergenceError(f"gradient flow did not converge in {max_iter} steps")
