"""Modulation decomposition, Mod(s), and the H, J, S diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import SpatialGrid, first_derivative, inner, lambda_op, norms, origin_value
from .profile import ProfileCoefficients, eval_Pb, eval_theta


class NewtonDivergence(RuntimeError):
    """Newton failed: the field has left the modulation tube of the guess."""


class ModulationState(NamedTuple):
    lam: float
    b: float
    gamma: float
    s: float = float("nan")
    t: float = float("nan")


@dataclass
class Decomposition:
    state: ModulationState
    epsilon: np.ndarray = field(repr=False)
    residuals: np.ndarray
    iterations: int = 0


# ------------------------------------------------------------ Morawetz weight

@lru_cache(maxsize=1)
def _blend_coefficients() -> np.ndarray:
    """Quintic on ``[1, 2]`` matching value, slope and curvature of both pieces."""
    e = np.exp(-2.0)
    rows, rhs = [], []
    for r, vals in ((1.0, (0.5, 1.0, 1.0)), (2.0, (6 + e, 3 - e, e))):
        rows.append([r ** k for k in range(6)])
        rows.append([k * r ** (k - 1) if k else 0.0 for k in range(6)])
        rows.append([k * (k - 1) * r ** (k - 2) if k > 1 else 0.0 for k in range(6)])
        rhs.extend(vals)
    return np.linalg.solve(np.array(rows), np.array(rhs))


def phi(r, derivative: int = 0) -> np.ndarray:
    """``r^2/2`` on ``[0, 1]``, ``3r + e^-r`` on ``[2, inf)``, quintic blend between."""
    r = np.abs(np.asarray(r, dtype=float))
    c = np.polynomial.Polynomial(_blend_coefficients()).deriv(derivative)
    inner_piece = np.polynomial.Polynomial([0, 0, 0.5]).deriv(derivative)
    outer = {0: 3 * r + np.exp(-r), 1: 3 - np.exp(-r)}.get(derivative, (-1) ** derivative * np.exp(-r))
    return np.where(r < 1, inner_piece(r), np.where(r > 2, outer, c(r)))


@dataclass(frozen=True)
class MorawetzWeight:
    A: float = 20.0

    def __post_init__(self):
        if self.A <= 1:
            raise ValueError("A must exceed 1")

    def __call__(self, x, derivative: int = 0) -> np.ndarray:
        """``d^k/dx^k [A^2 phi(|x| / A)]``; odd derivatives carry ``sign(x)``."""
        x = np.asarray(x, dtype=float)
        val = self.A ** (2 - derivative) * phi(x / self.A, derivative)
        return val * np.sign(x) if derivative % 2 else val


def blend_is_convex(samples: int = 2001) -> bool:
    r = np.linspace(1, 2, samples)
    return bool(np.all(phi(r, 2) >= 0))


# ------------------------------------------------------------- decomposition

class _Rescaler:
    """Cubic-spline access to ``u`` on its physical grid."""

    def __init__(self, phys: SpatialGrid, u):
        u = np.asarray(u, dtype=complex)
        self.L = phys.half_width
        self.re = CubicSpline(phys.x, u.real)
        self.im = CubicSpline(phys.x, u.imag)

    def __call__(self, x):
        out = np.zeros(x.shape, dtype=complex)
        inside = np.abs(x) <= self.L
        out[inside] = self.re(x[inside]) + 1j * self.im(x[inside])
        return out


def _profile_fields(coeffs: ProfileCoefficients, b: float, lam: float):
    grid = coeffs.grid
    pb = eval_Pb(coeffs, b, lam)
    phase = np.exp(-0.25j * b * grid.x ** 2)
    return pb, lambda_op(grid, pb), grid.x ** 2 * pb, coeffs.rho * phase


def orthogonality(coeffs: ProfileCoefficients, eps, b: float, lam: float) -> np.ndarray:
    """``(<eps, i Lambda P_b>, <eps, |y|^2 P_b>, <eps, i rho_b>)``."""
    grid = coeffs.grid
    _, lpb, y2pb, rho_b = _profile_fields(coeffs, b, lam)
    return np.array([inner(grid, eps, 1j * lpb), inner(grid, eps, y2pb), inner(grid, eps, 1j * rho_b)])


def epsilon_of(coeffs: ProfileCoefficients, sample, lam: float, b: float, gamma: float) -> np.ndarray:
    """``lam^{1/2} u(lam y) e^{-i gamma} - P_b``."""
    v = np.sqrt(lam) * sample(lam * coeffs.grid.x) * np.exp(-1j * gamma)
    return v - eval_Pb(coeffs, b, lam)


def reconstruct(coeffs: ProfileCoefficients, state: ModulationState, phys: SpatialGrid,
                eps=None) -> np.ndarray:
    """``lam^{-1/2} (P_b + eps)(x / lam) e^{i gamma}`` sampled on ``phys``."""
    from .profile import resample
    w = eval_Pb(coeffs, state.b, state.lam) + (0 if eps is None else eps)
    return resample(coeffs.grid.scaled(state.lam), w / np.sqrt(state.lam), phys.x) * np.exp(1j * state.gamma)


def decompose(u, phys: SpatialGrid, guess: ModulationState, coeffs: ProfileCoefficients,
              tol: float = 1e-10, maxiter: int = 50, fd_step: float = 1e-6) -> Decomposition:
    """Newton on ``(lam, b, gamma)`` for the three orthogonality conditions.

    The Jacobian is a central difference with relative step ``fd_step`` in
    ``lam`` and absolute steps in ``b`` and ``gamma``.
    """
    phys.check(u)
    if guess.lam < 50 * phys.h:
        from .ground_state import ResolutionError
        raise ResolutionError(f"guess lambda = {guess.lam:.3g} is below 50 h = {50 * phys.h:.3g}")
    sample = _Rescaler(phys, u)
    grid = coeffs.grid
    scale = norms(phys, u).l2 * max(1.0, norms(grid, coeffs.rho).l2)
    p = np.array([guess.lam, guess.b, guess.gamma], dtype=float)

    def F(p):
        lam, b, gamma = p
        eps = epsilon_of(coeffs, sample, lam, b, gamma)
        return orthogonality(coeffs, eps, b, lam), eps

    r, eps = F(p)
    for it in range(maxiter + 1):
        if np.max(np.abs(r)) <= tol * scale:
            state = ModulationState(*p, guess.s, guess.t)
            return Decomposition(state, eps, r, it)
        if it == maxiter:
            break
        J = np.empty((3, 3))
        for k, d in enumerate((fd_step * p[0], fd_step, fd_step)):
            e = np.zeros(3)
            e[k] = d
            J[:, k] = (F(p + e)[0] - F(p - e)[0]) / (2 * d)
        dp = np.linalg.solve(J, -r)
        # damp steps that would flip the sign of lambda
        while p[0] + dp[0] <= 0.2 * p[0]:
            dp /= 2
        p = p + dp
        r, eps = F(p)
        if not np.all(np.isfinite(r)):
            break
    raise NewtonDivergence(f"no convergence from guess {guess}; last residual {np.max(np.abs(r)):.3e}")


# ------------------------------------------------------------------- Mod(s)

class ModSeries(NamedTuple):
    s: np.ndarray
    mod1: np.ndarray
    mod2: np.ndarray
    mod3: np.ndarray


def reconstruct_s(t, lam, s0: float) -> np.ndarray:
    """``s(t) = s0 + int 1/lam^2 dt`` by the trapezoid rule (``s(t[0]) = s0``)."""
    t, lam = np.asarray(t, float), np.asarray(lam, float)
    inc = 0.5 * np.diff(t) * (1 / lam[1:] ** 2 + 1 / lam[:-1] ** 2)
    return s0 + np.concatenate([[0.0], np.cumsum(inc)])


def mod_vector(states: Sequence[ModulationState], coeffs: ProfileCoefficients) -> ModSeries:
    """``(lam_s/lam + b, b_s + b^2 - theta, 1 - gamma_s)`` by finite differences in ``s``."""
    if len(states) < 3:
        raise ValueError("mod_vector needs at least three samples")
    s = np.array([st.s for st in states], float)
    lam = np.array([st.lam for st in states], float)
    b = np.array([st.b for st in states], float)
    gamma = np.array([st.gamma for st in states], float)
    order = np.argsort(s)
    s, lam, b, gamma = s[order], lam[order], b[order], gamma[order]
    theta = np.array([eval_theta(coeffs, bi, li) for bi, li in zip(b, lam)])
    return ModSeries(s,
                     np.gradient(np.log(lam), s) + b,
                     np.gradient(b, s) + b * b - theta,
                     1 - np.gradient(gamma, s))


# -------------------------------------------------------------- functionals

def _forward_grad_sq(grid: SpatialGrid, f) -> float:
    """``||f'||^2`` with forward differences; equals ``<-D2 f, f>`` for Dirichlet fields."""
    return float(np.sum(np.abs(np.diff(f)) ** 2) / grid.h)


def functional_H(eps, b: float, lam: float, coeffs: ProfileCoefficients) -> float:
    """Linearized energy of the remainder, including the point-interaction term."""
    grid = coeffs.grid
    pb = eval_Pb(coeffs, b, lam)
    w = pb + eps
    a2 = np.abs(pb) ** 2
    dF = (np.abs(w) ** 6 - a2 ** 3) / 6 - a2 ** 2 * np.real(np.conj(pb) * eps)
    quad = 0.5 * _forward_grad_sq(grid, eps) + 0.5 * inner(grid, eps, eps)
    point = 0.5 * lam * coeffs.mu * abs(origin_value(grid, eps)) ** 2
    return float(quad - np.dot(grid.weights, dF) - point)


def functional_J(grid: SpatialGrid, eps, A: float = 20.0) -> float:
    """``(1/2) Im int phi_A' eps' conj(eps)``."""
    dphi = MorawetzWeight(A)(grid.x, 1)
    return float(0.5 * np.imag(np.dot(grid.weights, dphi * first_derivative(grid, eps) * np.conj(eps))))


def functional_S(eps, state: ModulationState, coeffs: ProfileCoefficients, A: float = 20.0) -> float:
    """``(H + b J) / lam^4``."""
    H = functional_H(eps, state.b, state.lam, coeffs)
    return (H + state.b * functional_J(coeffs.grid, eps, A)) / state.lam ** 4


# -------------------------------------------------------------- coercivity

def _real_gram_schmidt(grid: SpatialGrid, fields):
    basis = []
    for f in fields:
        v = np.array(f, dtype=complex)
        for e in basis:
            v = v - inner(grid, v, e) * e
        nrm = np.sqrt(inner(grid, v, v))
        if nrm > 1e-12:
            basis.append(v / nrm)
    return basis


def random_even_field(grid: SpatialGrid, rng: np.random.Generator, modes: int = 8) -> np.ndarray:
    """Smooth even decaying complex field: Gaussians times random cosines."""
    y = grid.x
    out = np.zeros(grid.n, dtype=complex)
    for _ in range(modes):
        width = rng.uniform(0.5, 4.0)
        freq = rng.uniform(0.0, 3.0)
        c = rng.standard_normal() + 1j * rng.standard_normal()
        out += c * np.exp(-(y / width) ** 2) * np.cos(freq * y)
    return out


def h1_norm_sq(grid: SpatialGrid, f) -> float:
    return _forward_grad_sq(grid, f) + inner(grid, f, f)


def coercivity_H_check(n_samples: int, amplitude: float, b: float, lam: float,
                       coeffs: ProfileCoefficients, seed: int = 20240607,
                       project: bool = True) -> float:
    """Minimum of ``H / ||eps||_{H^1}^2`` over seeded random even ``eps``.

    Samples are projected off ``i Lambda P_b``, ``|y|^2 P_b``, ``i rho_b`` and
    ``P_b`` in the real inner product and scaled to ``||eps||_{H^1} = amplitude``.
    """
    grid = coeffs.grid
    pb, lpb, y2pb, rho_b = _profile_fields(coeffs, b, lam)
    basis = _real_gram_schmidt(grid, [1j * lpb, y2pb, 1j * rho_b, pb]) if project else []
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(n_samples):
        eps = random_even_field(grid, rng)
        for e in basis:
            eps = eps - inner(grid, eps, e) * e
        eps[[0, -1]] = 0
        nrm = h1_norm_sq(grid, eps)
        eps *= amplitude / np.sqrt(nrm)
        ratios.append(functional_H(eps, b, lam, coeffs) / h1_norm_sq(grid, eps))
    return float(np.min(ratios))


def quadratic_form(grid: SpatialGrid, q, eps) -> float:
    """``(1/2)<L+ eps1, eps1> + (1/2)<L- eps2, eps2>`` with the same discrete gradient as H."""
    e1, e2 = np.real(eps), np.imag(eps)
    return 0.5 * (_forward_grad_sq(grid, eps) + inner(grid, eps, eps)
                  - np.dot(grid.weights, 5 * q ** 4 * e1 ** 2 + q ** 4 * e2 ** 2))
