"""Strang-split Crank-Nicolson solver for ``i u_t + u_xx + mu delta u + |u|^4 u = 0``."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .blowup_law import final_data
from .grid import SpatialGrid, inner, norms, origin_value
from .ground_state import ResolutionError, energy
from .profile import ProfileCoefficients, eval_Pb, resample

log = logging.getLogger(__name__)

#: ||Q'||_2 for the free ground state.
GRAD_Q = float(np.sqrt(np.sqrt(3.0) * np.pi / 4))


@lru_cache(maxsize=16)
def _cn_matrices(grid: SpatialGrid, mu: float, dt: float):
    """Banded ``(1 + i dt/2 H)`` and the explicit half ``(1 - i dt/2 H)``, ``H = -D2 - mu delta``.

    Unknowns are the interior nodes; the end nodes stay zero.
    """
    m = grid.n - 2
    h2 = grid.h ** 2
    diag = np.full(m, 2 / h2, dtype=complex)
    diag[grid.center - 1] -= mu / grid.h
    off = -1 / h2
    a = 0.5j * dt
    ab = np.zeros((3, m), dtype=complex)
    ab[0, 1:] = a * off
    ab[1] = 1 + a * diag
    ab[2, :-1] = a * off
    return ab, diag, off


def linear_step(grid: SpatialGrid, u, dt: float, mu: float) -> np.ndarray:
    ab, diag, off = _cn_matrices(grid, float(mu), float(dt))
    a = 0.5j * dt
    v = u[1:-1]
    rhs = (1 - a * diag) * v
    rhs[1:] -= a * off * v[:-1]
    rhs[:-1] -= a * off * v[1:]
    out = np.zeros_like(u, dtype=complex)
    out[1:-1] = solve_banded((1, 1), ab, rhs, check_finite=False)
    return out


def step(grid: SpatialGrid, u, dt: float, mu: float) -> np.ndarray:
    """Half nonlinear phase, Crank-Nicolson linear step, half nonlinear phase."""
    u = np.asarray(u, dtype=complex)
    u = u * np.exp(0.5j * dt * np.abs(u) ** 4)
    u = linear_step(grid, u, dt, mu)
    return u * np.exp(0.5j * dt * np.abs(u) ** 4)


@dataclass
class EvolutionConfig:
    mu: float = 0.0
    dt0: float = 1e-3
    t_start: float = 0.0
    t_end: float = 1.0
    adapt: bool = False
    adapt_exponent: float = 2.0
    direction: str = "forward"
    scheme: str = "crank_nicolson_strang"
    blowup_factor: float = 50.0
    resolution_factor: float = 20.0
    record_every: int = 1
    snapshot_times: tuple = ()

    def __post_init__(self):
        if self.dt0 <= 0:
            raise ValueError("dt0 must be positive")
        if self.t_end == self.t_start:
            raise ValueError("t_end must differ from t_start")
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be 'forward' or 'backward'")
        if (self.direction == "forward") != (self.t_end > self.t_start):
            raise ValueError(f"t_end = {self.t_end} is not {self.direction} of t_start = {self.t_start}")
        if self.scheme != "crank_nicolson_strang":
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass
class EvolutionRecord:
    """Observables; ``mass`` is ``||u||_2^2``."""
    t: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    grad_l2: list = field(default_factory=list)
    abs_u0: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)   # (t, field)
    blowup: bool = False
    resolution_floor: bool = False
    steps: int = 0

    def rows(self):
        return zip(self.t, self.mass, self.energy, self.grad_l2, self.abs_u0, self.dt)

    def append(self, grid, t, u, mu, dt):
        nm = norms(grid, u)
        self.t.append(t)
        self.mass.append(nm.l2 ** 2)
        self.energy.append(energy(grid, u, mu))
        self.grad_l2.append(nm.grad_l2)
        self.abs_u0.append(float(abs(origin_value(grid, u))))
        self.dt.append(dt)
        return nm


def lambda_estimate(grad_l2: float) -> float:
    """``||Q'|| / ||u'||``."""
    return GRAD_Q / grad_l2


def evolve(u0, grid: SpatialGrid, config: EvolutionConfig,
           callback: Callable | None = None):
    """Integrate from ``t_start`` to ``t_end``; returns ``(u_final, record)``.

    Steps are ``dt0 * min(1, lambda_est^p)``.  The run stops early when
    ``||u'||`` exceeds ``blowup_factor`` times its initial value, or when
    ``lambda_est < resolution_factor * h``.  Backward runs evolve the
    conjugate ``v(tau) = conj(u(-tau))`` forward.
    """
    grid.check(u0)
    backward = config.direction == "backward"
    sign = -1.0 if backward else 1.0
    u = np.array(u0, dtype=complex)
    if backward:
        u = np.conj(u)
    tau, tau_end = sign * config.t_start, sign * config.t_end
    rec = EvolutionRecord()
    snaps = sorted((sign * ts for ts in config.snapshot_times))
    nm0 = rec.append(grid, config.t_start, u0, config.mu, 0.0)
    grad0 = nm0.grad_l2
    grad = grad0
    n = 0
    while tau_end - tau > 1e-14 * max(1.0, abs(tau_end)):
        lam = lambda_estimate(grad)
        if lam < config.resolution_factor * grid.h:
            rec.resolution_floor = True
            break
        dt = config.dt0 * (min(1.0, lam ** config.adapt_exponent) if config.adapt else 1.0)
        dt = min(dt, tau_end - tau)
        if snaps and tau + dt > snaps[0]:
            dt = snaps[0] - tau
        u = step(grid, u, dt, config.mu)
        tau += dt
        n += 1
        phys = np.conj(u) if backward else u
        if snaps and abs(tau - snaps[0]) <= 1e-14 * max(1.0, abs(tau)):
            rec.snapshots.append((sign * tau, phys.copy()))
            snaps.pop(0)
        if n % config.record_every == 0 or tau >= tau_end:
            grad = rec.append(grid, sign * tau, phys, config.mu, dt).grad_l2
        else:
            grad = norms(grid, u).grad_l2
        if callback is not None:
            callback(sign * tau, phys)
        if grad > config.blowup_factor * grad0:
            rec.blowup = True
            break
    rec.steps = n
    return (np.conj(u) if backward else u), rec


def final_data_field(s1: float, E0: float, mu: float, coeffs: ProfileCoefficients,
                     grid: SpatialGrid, lambda0: float = 0.1):
    """``lambda1^{-1/2} P_{b1}(x / lambda1)`` on ``grid`` by cubic interpolation.

    Returns ``(field, FinalData)``.
    """
    fd = final_data(s1, E0, mu, lambda0)
    if fd.lambda1 < 50 * grid.h:
        raise ResolutionError(
            f"lambda1 = {fd.lambda1:.3g} is below the resolution floor 50 h = {50 * grid.h:.3g}")
    pb = eval_Pb(coeffs, fd.b1, fd.lambda1)
    u = resample(coeffs.grid.scaled(fd.lambda1), pb / np.sqrt(fd.lambda1), grid.x)
    return u, fd


def soliton_orbit_deviation(grid: SpatialGrid, u0, u) -> float:
    """``max | |u| - |u0| | / max |u0|``."""
    return float(np.max(np.abs(np.abs(u) - np.abs(u0))) / np.max(np.abs(u0)))


def l2_error(grid: SpatialGrid, u, v) -> float:
    d = np.asarray(u) - np.asarray(v)
    return float(np.sqrt(inner(grid, d, d)))
