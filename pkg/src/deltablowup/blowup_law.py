"""The ``(lambda, b)`` blow-up law, its explicit solution, time maps and final data."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .ground_state import YQ_SQUARED, Q_MASS


class RegimeError(ValueError):
    pass


def beta_closed_form(mu: float) -> float:
    """``2 mu Q(0)^2 / ||yQ||^2`` with the exact constants (``= 64 mu / pi^3``)."""
    return 2 * mu * np.sqrt(3.0) / YQ_SQUARED


@dataclass(frozen=True)
class LawParams:
    beta: float
    C0: float = 0.0
    lambda0: float = 0.1

    def __post_init__(self):
        if self.lambda0 <= 0:
            raise ValueError("lambda0 must be positive")
        if 2 * self.beta + self.C0 * self.lambda0 <= 0:
            raise ValueError(f"2 beta + C0 lambda0 = {2 * self.beta + self.C0 * self.lambda0:.3g} must be positive")

    @classmethod
    def from_energy(cls, E0: float, mu: float, lambda0: float = 0.1) -> "LawParams":
        """``C0 = 8 E0 / ||yQ||^2``."""
        return cls(beta_closed_form(mu), 8 * E0 / YQ_SQUARED, lambda0)


class FlowState(NamedTuple):
    s: float
    lam: float
    b: float


def vector_field(state, beta: float) -> tuple[float, float]:
    """``(d lambda/ds, d b/ds) = (-lambda b, -b^2 + beta lambda)``."""
    _, lam, b = state
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return -lam * b, -b * b + beta * lam


def invariant_c0(lam, b, beta: float):
    """``b^2/lambda^2 - 2 beta/lambda``, constant along the flow."""
    lam, b = np.asarray(lam), np.asarray(b)
    return b * b / (lam * lam) - 2 * beta / lam


class Trajectory(NamedTuple):
    s: np.ndarray
    lam: np.ndarray
    b: np.ndarray
    t: np.ndarray
    collapsed: bool      # lambda reached 0 before s_end


def _rhs(y, beta):
    lam, b, _ = y
    with np.errstate(over="ignore", invalid="ignore"):
        return np.array([-lam * b, -b * b + beta * lam, lam * lam])


def integrate(state0, beta: float, s_end: float, step: float = 1e-3,
              t0: float | None = None) -> Trajectory:
    """Classical RK4 from ``state0`` to ``s_end`` with steps ``step * max(|s|, 1)``.

    Physical time is carried along through ``dt/ds = lambda^2``; it starts at
    ``t0``, by default ``t_app(s0)`` when ``beta > 0`` and 0 otherwise.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    s, lam, b = (float(v) for v in state0)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if t0 is None:
        t0 = -4 / (3 * beta ** 2 * s ** 3) if beta > 0 else 0.0
    y = np.array([lam, b, t0])
    out = [(s, *y)]
    direction = 1.0 if s_end >= s else -1.0
    collapsed = False
    while direction * (s_end - s) > 1e-12 * abs(s_end):
        hs = direction * min(step * max(abs(s), 1.0), abs(s_end - s))
        k1 = _rhs(y, beta)
        k2 = _rhs(y + 0.5 * hs * k1, beta)
        k3 = _rhs(y + 0.5 * hs * k2, beta)
        k4 = _rhs(y + hs * k3, beta)
        with np.errstate(over="ignore", invalid="ignore"):
            y_new = y + hs / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y_new)):
            break
        if not y_new[0] > 0:
            collapsed = True
            break
        y, s = y_new, s + hs
        out.append((s, *y))
    arr = np.array(out)
    return Trajectory(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], collapsed)


def app_solution(s, beta: float):
    """``lambda_app = 2 / (beta s^2)``, ``b_app = 2 / s``."""
    s = np.asarray(s, dtype=float)
    return 2 / (beta * s ** 2), 2 / s


class TimeMaps(NamedTuple):
    t_app: float
    C_s: float
    C_lambda: float
    C_b: float
    lam_of_t: float
    b_of_t: float


def time_maps(s, beta: float) -> TimeMaps:
    """``t_app = -C_s s^-3``, ``lambda = C_lambda |t|^(2/3)``, ``b = C_b |t|^(1/3)``."""
    if beta <= 0:
        raise ValueError("time maps need beta > 0")
    C_s = 4 / (3 * beta ** 2)
    C_lambda = 2 / beta * C_s ** (-2 / 3)
    C_b = 2 * C_s ** (-1 / 3)
    t = -C_s * np.asarray(s, dtype=float) ** -3
    return TimeMaps(t, C_s, C_lambda, C_b, C_lambda * np.abs(t) ** (2 / 3), C_b * np.abs(t) ** (1 / 3))


def script_F(lam: float, params: LawParams) -> float:
    """``int_lam^lambda0 dtau / (tau^(3/2) sqrt(2 beta + C0 tau))`` via ``tau = sigma^2``."""
    if not 0 < lam <= params.lambda0:
        raise ValueError(f"lambda = {lam} must lie in (0, lambda0 = {params.lambda0}]")
    a, c = 2 * params.beta, params.C0

    def integrand(sig):
        return 2 / (sig * sig * np.sqrt(a + c * sig * sig))

    lo, hi = np.sqrt(lam), np.sqrt(params.lambda0)
    # split geometrically so each piece has a bounded integrand ratio
    edges = np.geomspace(lo, hi, max(2, int(np.ceil(np.log2(hi / lo))) + 1)) if hi > lo else [lo, hi]
    return float(sum(quad(integrand, p, q, epsabs=0, epsrel=1e-13, limit=200)[0]
                     for p, q in zip(edges[:-1], edges[1:])))


def script_F_closed(lam: float, params: LawParams) -> float:
    """Antiderivative form ``(2/a) (sqrt(a + c lam)/sqrt(lam) - sqrt(a + c lam0)/sqrt(lam0))``."""
    a, c, l0 = 2 * params.beta, params.C0, params.lambda0
    return 2 / a * (np.sqrt(a + c * lam) / np.sqrt(lam) - np.sqrt(a + c * l0) / np.sqrt(l0))


class FinalData(NamedTuple):
    lambda1: float
    b1: float
    params: LawParams


def final_data(s1: float, E0: float, mu: float, lambda0: float = 0.1) -> FinalData:
    """Solve ``F(lambda1) = s1`` and ``b1^2 = 2 beta lambda1 + C0 lambda1^2``."""
    if mu <= 0:
        raise RegimeError("final data need beta > 0 (mu > 0)")
    try:
        params = LawParams.from_energy(E0, mu, lambda0)
    except ValueError as exc:
        raise RegimeError(str(exc)) from exc
    if s1 <= 0:
        raise RegimeError("s1 must be positive")
    hi = params.lambda0
    lo = min(hi, 2 / (params.beta * s1 ** 2))
    while script_F(lo, params) < s1:
        lo /= 4
        if lo < 1e-300:
            raise RegimeError("no bracket for F(lambda) = s1")
    lam1 = brentq(lambda l: script_F(l, params) - s1, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    disc = 2 * params.beta * lam1 + params.C0 * lam1 ** 2
    if disc <= 0:
        raise RegimeError("negative discriminant for b1")
    return FinalData(float(lam1), float(np.sqrt(disc)), params)


def phase_portrait(beta: float, lambda_range, b_range, counts, band: float = 0.05) -> np.ndarray:
    """Rows ``(lambda, b, dlambda, db, on_parabola)`` on a tensor grid.

    ``on_parabola`` marks ``|b^2 - beta lambda| <= band * max(b^2, |beta| lambda)``.
    """
    n_lam, n_b = counts
    if n_lam <= 0 or n_b <= 0:
        raise ValueError("grid counts must be positive")
    lam = np.linspace(*lambda_range, n_lam)
    b = np.linspace(*b_range, n_b)
    L, B = np.meshgrid(lam, b, indexing="ij")
    dl, db = -L * B, -B * B + beta * L
    scale = np.maximum(B * B, abs(beta) * L)
    flag = (beta > 0) & (np.abs(B * B - beta * L) <= band * scale)
    return np.column_stack([L.ravel(), B.ravel(), dl.ravel(), db.ravel(), flag.ravel().astype(float)])


def fitted_exponent(t, lam) -> float:
    """Least-squares slope of ``log lambda`` against ``log |t|``."""
    return float(np.polyfit(np.log(np.abs(t)), np.log(lam), 1)[0])


def critical_mass() -> float:
    return float(np.sqrt(Q_MASS))
