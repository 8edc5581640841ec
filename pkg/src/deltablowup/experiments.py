"""Composite numerical experiments shared by the CLI and the acceptance suite."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .blowup_law import fitted_exponent, integrate, final_data, time_maps
from .grid import SpatialGrid, origin_value
from .modulation import ModulationState, decompose, functional_H, functional_J, h1_norm_sq
from .pde import EvolutionConfig, evolve, final_data_field
from .profile import ProfileCoefficients, build_profile, eval_Pb

log = logging.getLogger(__name__)


@dataclass
class BlowupExperiment:
    s1: float
    lambda1: float
    b1: float
    t1: float
    T_ode: float
    phys: SpatialGrid
    rows: list = field(default_factory=list)   # dicts per snapshot
    steps: int = 0
    stopped_early: bool = False

    def column(self, key):
        return np.array([r[key] for r in self.rows])

    @property
    def max_lambda_error(self) -> float:
        return float(np.max(np.abs(self.column("lambda") / self.column("lambda_ode") - 1)))

    @property
    def max_eps_h1(self) -> float:
        return float(np.max(self.column("eps_h1")))

    @property
    def exponent(self) -> float:
        return fitted_exponent(self.T_ode - self.column("t"), self.column("lambda"))


def blowup_experiment(mu: float = 1.0, E0: float = 0.0, s1: float = 100.0, s_stop: float = 40.0,
                      K: int = 2, coeffs: ProfileCoefficients | None = None,
                      points_per_lambda: int = 200, width_in_lambda: float = 15.0,
                      ds: float = 0.0025, n_snapshots: int = 13, profile_half_width: float = 20.0) -> BlowupExperiment:
    """Final data at ``s1``, backward evolution to ``s_stop``, modulation fits along the way.

    The physical grid is scaled to the final-data scale: spacing
    ``lambda1 / points_per_lambda`` and half width ``width_in_lambda`` times
    the predicted scale at ``s_stop``.  Steps are ``ds * lambda_est^2``.
    """
    fd = final_data(s1, E0, mu)
    beta = fd.params.beta
    t1 = float(time_maps(s1, beta).t_app)
    back = integrate((s1, fd.lambda1, fd.b1), beta, s_stop, t0=t1)
    fwd = integrate((s1, fd.lambda1, fd.b1), beta, 1e5, t0=t1)
    T_ode = float(fwd.t[-1] + time_maps(fwd.s[-1], beta).C_s * fwd.s[-1] ** -3)

    h = fd.lambda1 / points_per_lambda
    half = int(np.ceil(width_in_lambda * back.lam[-1] / h))
    phys = SpatialGrid(half * h, h)
    if coeffs is None:
        # profile nodes coincide with the physical nodes at t1, so the data
        # carry the discrete critical mass of the evolution grid
        coeffs = build_profile(K, mu, SpatialGrid(profile_half_width, 1 / points_per_lambda))
    u1, _ = final_data_field(s1, E0, mu, coeffs, phys)

    s_marks = np.linspace(s1, s_stop, n_snapshots)
    t_marks = np.interp(-s_marks, -back.s, back.t)
    lam_marks = np.interp(-s_marks, -back.s, back.lam)
    b_marks = np.interp(-s_marks, -back.s, back.b)
    cfg = EvolutionConfig(mu=mu, dt0=ds, t_start=t1, t_end=float(t_marks[-1]), adapt=True,
                          direction="backward", record_every=50,
                          snapshot_times=tuple(float(t) for t in t_marks[1:]))
    _, rec = evolve(u1, phys, cfg)
    snaps = [(t1, u1)] + rec.snapshots
    exp = BlowupExperiment(s1, fd.lambda1, fd.b1, t1, T_ode, phys, steps=rec.steps,
                           stopped_early=rec.blowup or rec.resolution_floor)
    for (t, u), s_m, lam_o, b_o in zip(snaps, s_marks, lam_marks, b_marks):
        # ODE scale and parameter, phase read off at the origin
        gamma0 = np.angle(origin_value(phys, u) / origin_value(coeffs.grid, eval_Pb(coeffs, b_o, lam_o)))
        dec = decompose(u, phys, ModulationState(lam_o, b_o, gamma0, s_m, t), coeffs)
        st = dec.state
        exp.rows.append(dict(t=t, s_ode=s_m, lambda_ode=lam_o, b_ode=b_o, lambda_=st.lam,
                             **{"lambda": st.lam}, b=st.b, gamma=st.gamma,
                             eps_l2=float(np.sqrt(np.sum(coeffs.grid.weights * np.abs(dec.epsilon) ** 2))),
                             eps_h1=float(np.sqrt(h1_norm_sq(coeffs.grid, dec.epsilon))),
                             H=functional_H(dec.epsilon, st.b, st.lam, coeffs),
                             J=functional_J(coeffs.grid, dec.epsilon)))
    return exp
