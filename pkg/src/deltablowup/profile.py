"""Refined blow-up profile ``P(b, lambda)``: recursion, evaluation, residual and energy."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .grid import (SpatialGrid, discrete_delta_apply, first_derivative, inner,
                   second_derivative)
from .ground_state import GroundStateSpec, ResolutionError, discrete_ground_state, energy
from .linops import LinearizedOperator, apply, solve_minus, solve_plus
from .series import BivariateSeries

log = logging.getLogger(__name__)

MAX_K = 3


class MissingBlockError(KeyError):
    pass


class RegimeWarning(UserWarning):
    pass


def index_set(K: int) -> list[tuple[int, int]]:
    """``Sigma_K = {(j, k): j + k <= K}`` in solve order (k outer, j inner)."""
    return [(j, k) for k in range(K + 1) for j in range(K + 1 - k)]


@dataclass
class ProfileCoefficients:
    K: int
    mu: float
    grid: SpatialGrid
    Q: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    P_plus: dict = field(default_factory=dict, repr=False)
    P_minus: dict = field(default_factory=dict, repr=False)
    beta: dict = field(default_factory=dict)

    @property
    def blocks(self) -> list[tuple[int, int]]:
        return [jk for jk in index_set(self.K) if jk in self.beta]

    def copy_partial(self, blocks) -> "ProfileCoefficients":
        keep = set(blocks)
        return ProfileCoefficients(
            self.K, self.mu, self.grid, self.Q, self.rho,
            {jk: v for jk, v in self.P_plus.items() if jk in keep},
            {jk: v for jk, v in self.P_minus.items() if jk in keep},
            {jk: v for jk, v in self.beta.items() if jk in keep})


# --------------------------------------------------------------- series forms

def profile_series(coeffs: ProfileCoefficients, D: int | None = None) -> BivariateSeries:
    """``Q + sum b^2j lam^(k+1) P+_jk + i sum b^(2j+1) lam^(k+1) P-_jk``."""
    terms = {(0, 0): coeffs.Q.astype(complex)}
    for (j, k) in coeffs.blocks:
        terms[(2 * j, k + 1)] = coeffs.P_plus[(j, k)].astype(complex)
        terms[(2 * j + 1, k + 1)] = 1j * coeffs.P_minus[(j, k)]
    return BivariateSeries(terms, D)


def theta_series(coeffs: ProfileCoefficients, D: int | None = None) -> BivariateSeries:
    return BivariateSeries({(2 * j, k + 1): coeffs.beta[(j, k)] for (j, k) in coeffs.blocks}, D)


def residual_series(coeffs: ProfileCoefficients, D: int | None = None) -> BivariateSeries:
    """Series of ``i dP/ds + P'' - P + |P|^4 P + lam mu delta P + theta |y|^2 P / 4``.

    ``dP/ds`` uses ``lam_s / lam = -b`` and ``b_s = theta - b^2``.
    """
    grid = coeffs.grid
    P = profile_series(coeffs, D)
    theta = theta_series(coeffs, D)
    b2 = BivariateSeries({(2, 0): 1.0}, D)
    dP_ds = -(P.d_lambda().shift(1, 1)) + (theta - b2) * P.d_b()
    PP = P * P.conj()
    quintic = PP * PP * P
    return (1j * dP_ds
            + P.map(lambda c: second_derivative(grid, c))
            - P
            + quintic
            + P.map(lambda c: discrete_delta_apply(grid, c, coeffs.mu)).shift(0, 1)
            + theta * P.map(lambda c: 0.25 * grid.x ** 2 * c))


# --------------------------------------------------------------- recursion

class Sources(NamedTuple):
    F_plus: np.ndarray
    F_minus: np.ndarray


def _dependencies(j: int, k: int) -> list[tuple[int, int]]:
    return [(jj, kk) for (jj, kk) in index_set(j + k + 1)
            if (kk < k and jj <= j + 1) or (kk == k and jj < j)]


def extract_sources(partial: ProfileCoefficients, j: int, k: int) -> Sources:
    """Right-hand sides of block ``(j, k)`` read off the residual with that block absent."""
    if (j, k) in partial.beta:
        raise ValueError(f"block {(j, k)} is already solved")
    missing = [jk for jk in _dependencies(j, k) if jk[0] + jk[1] <= partial.K and jk not in partial.beta]
    if missing:
        raise MissingBlockError(f"block {(j, k)} needs unsolved blocks {missing}")
    R = residual_series(partial, D=2 * j + k + 2)
    return Sources(np.real(R.coefficient(2 * j, k + 1)) * np.ones(partial.grid.n),
                   np.imag(R.coefficient(2 * j + 1, k + 1)) * np.ones(partial.grid.n))


def build_profile(K: int = 2, mu: float = 1.0, grid: SpatialGrid | None = None,
                  tol: float = 1e-8) -> ProfileCoefficients:
    """Solve the block systems for ``(j, k)`` in ``Sigma_K``.

    Block ``(j, k)`` with ``c = k + 1 + 2j``:
    ``L+ P+ = F+ + beta |y|^2 Q / 4`` and ``L- P- = F- - c P+``, with ``beta``
    fixed by the solvability condition ``<F- - c P+, Q> = 0`` and the gauge
    ``<P-, Q> = 0``.  Everything is built around the discrete ground state so
    that the zeroth-order residual vanishes on the grid.
    """
    if not 0 <= K <= MAX_K:
        raise ValueError(f"K = {K} outside the supported range 0..{MAX_K}")
    grid = SpatialGrid.default() if grid is None else grid
    q = discrete_ground_state(grid, GroundStateSpec())
    plus = LinearizedOperator.around("plus", grid, q)
    minus = LinearizedOperator.around("minus", grid, q)
    rho = solve_plus(plus, grid.x ** 2 * q)
    coeffs = ProfileCoefficients(K, mu, grid, q, rho)
    q_rho = inner(grid, q, rho)
    for (j, k) in index_set(K):
        Fp, Fm = extract_sources(coeffs, j, k)
        c = k + 1 + 2 * j
        base = solve_plus(plus, Fp)
        beta = 4 * (inner(grid, Fm, q) / c - inner(grid, base, q)) / q_rho
        Pp = base + 0.25 * beta * rho
        g = Fm - c * Pp
        scale = 1 + np.sqrt(inner(grid, g, g))
        Pm = solve_minus(minus, g, tol_solv=tol * scale / max(np.sqrt(inner(grid, g, g)), 1e-300))
        coeffs.P_plus[(j, k)], coeffs.P_minus[(j, k)], coeffs.beta[(j, k)] = Pp, Pm, float(beta)
        res_p = _l2(grid, _interior(apply(plus, Pp) - Fp - 0.25 * beta * grid.x ** 2 * q))
        res_m = _l2(grid, _interior(apply(minus, Pm) - g))
        if max(res_p / (1 + _l2(grid, Fp)), res_m / (1 + _l2(grid, Fm))) > tol:
            raise ArithmeticError(f"block {(j, k)} residuals {res_p:.2e}, {res_m:.2e} exceed {tol}")
        log.debug("block %s: beta = %.17g", (j, k), beta)
    return coeffs


def _interior(f):
    f = np.array(f)
    f[[0, -1]] = 0
    return f


def _l2(grid, f) -> float:
    return float(np.sqrt(inner(grid, f, f)))


# -------------------------------------------------------------- evaluation

def _check_regime(b: float, lam: float):
    if abs(b) + lam > 0.5:
        warnings.warn(f"|b| + lambda = {abs(b) + lam:.3g} > 0.5 is outside the small-parameter regime",
                      RegimeWarning, stacklevel=3)


def eval_P(coeffs: ProfileCoefficients, b: float, lam: float) -> np.ndarray:
    _check_regime(b, lam)
    return profile_series(coeffs).evaluate(b, lam)


def eval_theta(coeffs: ProfileCoefficients, b: float, lam: float) -> float:
    _check_regime(b, lam)
    return float(theta_series(coeffs).evaluate(b, lam))


def eval_Pb(coeffs: ProfileCoefficients, b: float, lam: float) -> np.ndarray:
    """``P_b = P exp(-i b |y|^2 / 4)``."""
    return eval_P(coeffs, b, lam) * np.exp(-0.25j * b * coeffs.grid.x ** 2)


class Residual(NamedTuple):
    field: np.ndarray
    weighted_sup: float
    solved_floor: float


def solved_monomials(coeffs: ProfileCoefficients) -> list[tuple[int, int]]:
    """Monomials whose residual coefficient vanishes by construction."""
    out = [(0, 0)]
    for (j, k) in coeffs.blocks:
        out += [(2 * j, k + 1), (2 * j + 1, k + 1)]
    return out


def _weighted_sup(grid: SpatialGrid, psi, window: float) -> float:
    inside = np.abs(grid.x) <= window + 1e-12
    weighted = np.exp(np.abs(grid.x) / 2) * (np.abs(psi) + np.abs(first_derivative(grid, psi)))
    return float(np.max(weighted[inside]))


def residual_PsiK(coeffs: ProfileCoefficients, b: float, lam: float,
                  window: float | None = None, include_solved: bool = False) -> Residual:
    """``Psi_K`` at ``(b, lam)`` and ``sup e^{|y|/2} (|Psi| + |Psi'|)`` over ``|y| <= window``.

    The residual is summed monomial by monomial from its full series.  The
    coefficients of the ground-state equation and of the solved blocks are
    zero in exact arithmetic; on the grid they hold solver roundoff, which is
    left out of ``field`` unless ``include_solved`` and reported as
    ``solved_floor`` (the same weighted sup of their contribution).
    ``window`` defaults to ``L/2``.
    """
    _check_regime(b, lam)
    grid = coeffs.grid
    window = grid.half_width / 2 if window is None else window
    R = residual_series(coeffs)
    solved = solved_monomials(coeffs)
    rest = R.evaluate(b, lam, exclude=solved)
    floor = BivariateSeries({k: R.coefficient(*k) for k in solved if k in R.coeffs}).evaluate(b, lam)
    floor = np.zeros(grid.n) + floor
    psi = rest + floor if include_solved else rest
    return Residual(psi, _weighted_sup(grid, psi, window), _weighted_sup(grid, floor, window))


class EnergyCheck(NamedTuple):
    E_profile: float
    E_leading: float
    gap: float


def energy_expansion_check(coeffs: ProfileCoefficients, b: float, lam: float,
                           mu: float | None = None,
                           physical_grid: SpatialGrid | None = None) -> EnergyCheck:
    """Energy of ``lam^{-1/2} P_b(x / lam)`` against ``(1/8)(b^2/lam^2 - 2 beta/lam) ||yQ||^2``.

    By default the physical field lives on the profile grid scaled by ``lam``,
    which is exact.  With ``physical_grid`` the field is interpolated onto it
    instead, and ``lam >= 50 h`` is required there.
    """
    mu = coeffs.mu if mu is None else mu
    grid = coeffs.grid
    u = eval_Pb(coeffs, b, lam) / np.sqrt(lam)
    if physical_grid is None:
        E = energy(grid.scaled(lam), u, mu)
    else:
        if lam < 50 * physical_grid.h:
            raise ResolutionError(f"lambda = {lam:.3g} is below the floor 50 h = {50 * physical_grid.h:.3g}")
        E = energy(physical_grid, resample(grid.scaled(lam), u, physical_grid.x), mu)
    y = grid.x
    beta = coeffs.beta.get((0, 0), 0.0)
    lead = 0.125 * (b ** 2 / lam ** 2 - 2 * beta / lam) * inner(grid, y * coeffs.Q, y * coeffs.Q)
    return EnergyCheck(E, lead, abs(E - lead))


def resample(grid: SpatialGrid, u, x) -> np.ndarray:
    """Cubic-spline values of the field ``u`` at the points ``x`` (zero outside the grid)."""
    from scipy.interpolate import CubicSpline
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=complex)
    inside = np.abs(x) <= grid.half_width
    u = np.asarray(u)
    out[inside] = (CubicSpline(grid.x, u.real)(x[inside])
                   + 1j * CubicSpline(grid.x, u.imag)(x[inside]))
    return out
