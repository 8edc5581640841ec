"""Command-line entry point: one subcommand per experiment, one manifest per run."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .blowup_law import (app_solution, beta_closed_form, integrate, invariant_c0, phase_portrait,
                         time_maps)
from .grid import SpatialGrid, first_derivative, inner, norms, origin_value, read_field_csv, write_field_csv
from .ground_state import (GroundStateSpec, ResolutionError, discrete_ground_state, energy,
                           ground_state, gn_check, lagrange_multiplier, mass, minimize_fixed_mass,
                           pseudoconformal_solution)
from .linops import LinearizedOperator, algebra_residuals, coercivity_gap, rho
from .modulation import (ModulationState, coercivity_H_check, decompose, functional_H,
                         functional_J, functional_S, h1_norm_sq, mod_vector, reconstruct_s)
from .pde import EvolutionConfig, evolve, final_data_field
from .profile import RegimeWarning, build_profile, eval_Pb, residual_PsiK

log = logging.getLogger("deltablowup")

DEFAULT_SEED = 20240607
YQ_SQ = float(np.sqrt(3.0) * np.pi ** 3 / 32)
GRAD_ABS_Q = float(np.sqrt(np.sqrt(3.0) * np.pi / 4))


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ output

def fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, data) -> Path:
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def check(criterion, value, target, tolerance, passed) -> dict:
    return dict(criterion_id=criterion, value=value, target=target, tolerance=tolerance,
                **{"pass": bool(passed)})


def _grid(p) -> SpatialGrid:
    return SpatialGrid(float(p["half_width"]), float(p["spacing"]))


# -------------------------------------------------------------- subcommands

def cmd_ground_state(p, out: Path):
    """Ground state or fixed-mass minimizer: field CSV and a JSON summary."""
    grid = _grid(p)
    spec = GroundStateSpec(p["omega"], p["mu"])
    if p["mass"] is not None:
        res = minimize_fixed_mass(p["mass"], p["mu"], grid)
        u, omega = res.field, res.omega
    else:
        u = discrete_ground_state(grid, spec) if p["discrete"] else ground_state(spec, grid)
        omega = lagrange_multiplier(grid, u, p["mu"])
    files = [out / "ground_state.csv"]
    write_field_csv(files[0], grid, u)
    ratio = gn_check(grid, u).ratio
    summary = dict(mass=mass(grid, u).l2_squared, energy=energy(grid, u, p["mu"]), omega=omega,
                   gn_ratio=ratio)
    files.append(write_json(out / "ground_state.json", summary))
    checks = [check(1, ratio, 1.0, 1e-4, abs(ratio - 1) <= 1e-4)] if p["mu"] == 0 and p["mass"] is None else []
    return files, summary, checks


def cmd_linops_verify(p, out: Path):
    """Algebraic identities of the linearized operators and constrained gaps."""
    grid = _grid(p)
    coarse, fine = algebra_residuals(grid), algebra_residuals(grid.refine(2))
    q, qf = ground_state(GroundStateSpec(), grid), ground_state(GroundStateSpec(), grid.refine(2))
    gaps = {}
    for name, g, qq in (("coarse", grid, q), ("fine", grid.refine(2), qf)):
        y2q = g.x ** 2 * qq
        gaps[name] = dict(
            plus=coercivity_gap(LinearizedOperator.around("plus", g), (qq, y2q)),
            minus=coercivity_gap(LinearizedOperator.around("minus", g), (rho(g),)))
    summary = dict(residuals=coarse, residuals_refined=fine, gaps=gaps)
    keys = ["L-Q", "L+LambdaQ+2Q", "L-y2Q+4LambdaQ", "rho"]
    checks = [check(3, max(coarse[k] for k in keys), 0.0, 1e-4, all(coarse[k] <= 1e-4 for k in keys))]
    checks += [check(3, coarse[k] / fine[k], 4.0, 0.5, abs(coarse[k] / fine[k] - 4) <= 0.5) for k in keys]
    checks.append(check(3, coarse["Q_rho_ratio"], 1.0, 1e-4, abs(coarse["Q_rho_ratio"] - 1) <= 1e-4))
    for k in ("plus", "minus"):
        a, b = gaps["coarse"][k], gaps["fine"][k]
        checks.append(check(11, b / a, 1.0, 0.05, a > 0 and b > 0 and abs(b / a - 1) <= 0.05))
    return [write_json(out / "linops.json", summary)], summary, checks


def cmd_profile_build(p, out: Path):
    """Profile recursion: per-block CSV fields and the beta coefficients."""
    grid = _grid(p)
    coeffs = build_profile(p["K"], p["mu"], grid)
    files = []
    for (j, k) in coeffs.blocks:
        rows = zip(grid.x, coeffs.P_plus[(j, k)], coeffs.P_minus[(j, k)])
        files.append(write_csv(out / f"block_{j}_{k}.csv", ["x", "P_plus", "P_minus"], rows))
    summary = dict(K=p["K"], mu=p["mu"], half_width=grid.half_width, spacing=grid.spacing,
                   beta={f"{j},{k}": v for (j, k), v in coeffs.beta.items()})
    if p["mu"] > 0:
        # residual at one point of the approximate blow-up curve
        lam, b = (float(v) for v in app_solution(p["s"], beta_closed_form(p["mu"])))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            res = residual_PsiK(coeffs, b, lam)
        summary["residual"] = dict(s=p["s"], b=b, weighted_sup=res.weighted_sup,
                                   solved_floor=res.solved_floor, **{"lambda": lam})
    files.append(write_json(out / "profile.json", summary))
    return files, summary, []


def cmd_residual_scan(p, out: Path):
    """Weighted residual of the profile along the approximate blow-up curve."""
    coeffs = build_profile(p["K"], p["mu"], _grid(p))
    beta = beta_closed_form(p["mu"])
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        for s in p["s_values"]:
            lam, b = (float(v) for v in app_solution(s, beta))
            rows.append((s, b, lam, residual_PsiK(coeffs, b, lam).weighted_sup))
    arr = np.array(rows)
    slope = float(np.polyfit(np.log(arr[:, 1] ** 2 + arr[:, 2]), np.log(arr[:, 3]), 1)[0])
    target = p["K"] + 2
    files = [write_csv(out / "residual_scan.csv", ["s", "b", "lambda", "weighted_sup"], rows)]
    return files, dict(slope=slope), [check(5, slope, target, 0.3, abs(slope - target) <= 0.3)]


def cmd_phase_portrait(p, out: Path):
    """Vector field of the blow-up law on a (lambda, b) grid."""
    table = phase_portrait(p["beta"], p["lambda_range"], p["b_range"], p["counts"], p["band"])
    path = write_csv(out / p["out"], ["lambda", "b", "dlambda", "db", "on_parabola"], table)
    return [path], dict(rows=len(table)), []


def cmd_law_integrate(p, out: Path):
    """Integrate the blow-up law from the explicit solution at s0."""
    beta = p["beta"]
    lam0, b0 = (float(v) for v in app_solution(p["s0"], beta))
    tr = integrate((p["s0"], lam0, b0), beta, p["s1"], step=p["step"])
    c0 = invariant_c0(tr.lam, tr.b, beta)
    path = write_csv(out / p["out"], ["s", "lambda", "b", "c0", "t_app"],
                     zip(tr.s, tr.lam, tr.b, c0, tr.t))
    lam_app, _ = app_solution(tr.s[-1], beta)
    rel = abs(tr.lam[-1] / lam_app - 1)
    span = abs(tr.s[-1] - tr.s[0])
    drift = float(np.max(np.abs(c0 - c0[0])) / span)
    # the same drift measured against the size 2 beta / lambda of the cancelling terms
    rel_drift = float(np.max(np.abs(c0 - c0[0]) * tr.lam / (2 * abs(beta))) / span)
    summary = dict(endpoint_rel_error=rel, c0_drift_per_s=drift, c0_relative_drift_per_s=rel_drift,
                   collapsed=tr.collapsed)
    checks = [check(6, rel, 0.0, 1e-8, rel <= 1e-8), check(6, drift, 0.0, 1e-10, drift <= 1e-10)]
    return [path], summary, checks


def _initial_data(p, grid: SpatialGrid):
    kind = p["initial"]
    if kind == "ground_state":
        return ground_state(GroundStateSpec(p["omega"], p["init_mu"]), grid).astype(complex)
    if kind == "pseudoconformal":
        return pseudoconformal_solution(p["t_start"], grid)
    if kind == "final_data":
        coeffs = build_profile(p["K"], p["mu"], SpatialGrid(20.0, p["profile_spacing"]))
        return final_data_field(p["s1"], p["E0"], p["mu"], coeffs, grid)[0]
    if kind == "file":
        g, u = read_field_csv(p["file"])
        if g != grid:
            raise ConfigError(f"field file grid {g} differs from the run grid {grid}")
        return u
    raise ConfigError(f"unknown initial-data selector {kind!r}")


def cmd_simulate(p, out: Path):
    """Evolve the PDE from a JSON run configuration."""
    grid = _grid(p)
    u0 = _initial_data(p, grid)
    cfg = EvolutionConfig(mu=p["mu"], dt0=p["dt0"], t_start=p["t_start"], t_end=p["t_end"],
                          adapt=p["adapt"], direction=p["direction"],
                          record_every=p["record_every"], snapshot_times=tuple(p["snapshot_times"]))
    u, rec = evolve(u0, grid, cfg)
    files = [write_csv(out / "record.csv", ["t", "mass", "energy", "grad_l2", "abs_u0", "dt"], rec.rows())]
    fields_dir = out / "fields"
    fields_dir.mkdir(exist_ok=True)
    index = []
    for i, (t, v) in enumerate([(cfg.t_start, u0)] + rec.snapshots + [(rec.t[-1], u)]):
        name = f"field_{i:04d}.csv"
        write_field_csv(fields_dir / name, grid, v)
        index.append((i, t))
        files.append(fields_dir / name)
    files.append(write_csv(fields_dir / "index.csv", ["index", "t"], index))
    mass_arr = np.array(rec.mass)
    summary = dict(steps=rec.steps, blowup=rec.blowup, resolution_floor=rec.resolution_floor,
                   mass_drift=float(np.max(np.abs(mass_arr / mass_arr[0] - 1))),
                   grad_ratio=float(max(rec.grad_l2) / min(rec.grad_l2)))
    return files, summary, []


def _abs_grad_lambda(grid: SpatialGrid, u) -> float:
    """Scale from the phase-free gradient: ``||(|u|)'|| = ||Q'|| / lam``."""
    return GRAD_ABS_Q / norms(grid, np.abs(u)).grad_l2


def cmd_modulation_track(p, out: Path):
    """Fit (lambda, b, gamma) to stored fields of a run."""
    # pseudo-conformal runs sit far outside the small-parameter regime by design
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        return _modulation_track(p, out)


def _modulation_track(p, out: Path):
    src = Path(p["in"])
    meta = json.loads(Path(p["coeffs"]).read_text())
    coeffs = build_profile(int(meta["K"]), float(meta["mu"]),
                           SpatialGrid(float(meta["half_width"]), float(meta["spacing"])))
    index = np.loadtxt(src / "index.csv", delimiter=",", skiprows=1, ndmin=2)
    states, rows_raw = [], []
    prev = None
    for i, t in index:
        grid, u = read_field_csv(src / f"field_{int(i):04d}.csv")
        if prev is None:
            lam = _abs_grad_lambda(grid, u)
            # Re int x u conj(i u') = b ||yQ||^2 / 2 for a modulated Q
            b = 2 * inner(grid, grid.x * u, 1j * first_derivative(grid, u)) / YQ_SQ
        else:
            lam, b = prev.lam, prev.b
        pb0 = origin_value(coeffs.grid, eval_Pb(coeffs, b, lam))
        gamma = float(np.angle(origin_value(grid, u) / pb0))
        dec = decompose(u, grid, ModulationState(lam, b, gamma, np.nan, float(t)), coeffs)
        prev = dec.state
        states.append(dec.state)
        rows_raw.append(dec)
    t = np.array([st.t for st in states])
    lam = np.array([st.lam for st in states])
    s = reconstruct_s(t, lam, p["s0"])
    states = [st._replace(s=si) for st, si in zip(states, s)]
    mod = mod_vector(states, coeffs) if len(states) >= 3 else None
    rows = []
    for k, (st, dec) in enumerate(zip(states, rows_raw)):
        g = coeffs.grid
        eps = dec.epsilon
        pb = eval_Pb(coeffs, st.b, st.lam)
        m = [np.nan] * 3 if mod is None else [mod.mod1[k], mod.mod2[k], mod.mod3[k]]
        rows.append((st.t, st.s, st.lam, st.b, st.gamma, np.sqrt(inner(g, eps, eps)),
                     np.sqrt(h1_norm_sq(g, eps)), *m, functional_H(eps, st.b, st.lam, coeffs),
                     functional_J(g, eps), functional_S(eps, st, coeffs), inner(g, eps, pb)))
    header = ["t", "s", "lambda", "b", "gamma", "eps_l2", "eps_h1", "mod1", "mod2", "mod3",
              "H", "J", "S", "eps_Pb_pairing"]
    path = write_csv(out / p["out"], header, rows)
    return [path], dict(samples=len(rows)), []


def cmd_blowup_experiment(p, out: Path):
    """Final data, backward evolution and modulation fits."""
    from .experiments import blowup_experiment
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        exp = blowup_experiment(mu=p["mu"], E0=p["E0"], s1=p["s1"], s_stop=p["s_stop"], K=p["K"],
                                points_per_lambda=p["points_per_lambda"], ds=p["ds"],
                                n_snapshots=p["snapshots"])
    keys = ["t", "s_ode", "lambda_ode", "b_ode", "lambda", "b", "gamma", "eps_l2", "eps_h1", "H", "J"]
    path = write_csv(out / "blowup.csv", keys, ([r[k] for k in keys] for r in exp.rows))
    summary = dict(lambda1=exp.lambda1, b1=exp.b1, t1=exp.t1, T_ode=exp.T_ode, steps=exp.steps,
                   max_lambda_error=exp.max_lambda_error, max_eps_h1=exp.max_eps_h1,
                   exponent=exp.exponent, grid=dict(half_width=exp.phys.half_width,
                                                    spacing=exp.phys.spacing))
    checks = [check(9, exp.max_lambda_error, 0.0, 0.1, exp.max_lambda_error <= 0.1),
              check(9, exp.max_eps_h1, 0.0, 0.1, exp.max_eps_h1 <= 0.1),
              check(9, exp.exponent, 0.67, 0.1, 0.57 <= exp.exponent <= 0.77)]
    return [path, write_json(out / "blowup.json", summary)], summary, checks


def cmd_coercivity(p, out: Path):
    """Seeded sampling of the linearized energy on the constrained space."""
    coeffs = build_profile(p["K"], p["mu"], _grid(p))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        ratio = coercivity_H_check(p["samples"], p["amplitude"], p["b"], p["lambda"], coeffs,
                                   seed=p["seed"])
    summary = dict(min_ratio=ratio, seed=p["seed"])
    return [write_json(out / "coercivity.json", summary)], summary, [check(11, ratio, 0.0, 0.0, ratio > 0)]


def cmd_report(p, out: Path):
    """Collate manifest checks into one acceptance summary."""
    entries = []
    for d in p["inputs"]:
        for m in sorted(Path(d).glob("*.manifest.json")):
            entries.extend(json.loads(m.read_text()).get("checks", []))
    entries.sort(key=lambda e: e["criterion_id"])
    path = write_json(out / p["out"], entries)
    return [path], dict(checks=len(entries), passed=sum(e["pass"] for e in entries)), []


# ----------------------------------------------------------------- parsing

GRID = dict(half_width=20.0, spacing=0.01)

SUBCOMMANDS = {
    "ground-state": (cmd_ground_state, dict(GRID, omega=1.0, mu=0.0, mass=None, discrete=False)),
    "linops-verify": (cmd_linops_verify, dict(GRID)),
    "profile-build": (cmd_profile_build, dict(GRID, K=2, mu=1.0, s=40.0)),
    "residual-scan": (cmd_residual_scan, dict(GRID, K=2, mu=1.0, s_values=[20.0, 40.0, 80.0, 160.0])),
    "phase-portrait": (cmd_phase_portrait, dict(beta=1.0, lambda_range=[0.001, 0.1], b_range=[-0.5, 0.5],
                                                counts=[40, 40], band=0.05, out="portrait.csv")),
    "law-integrate": (cmd_law_integrate, dict(beta=1.0, s0=10.0, s1=1000.0, step=1e-3, out="traj.csv")),
    "simulate": (cmd_simulate, dict(GRID, mu=0.0, dt0=1e-3, t_start=0.0, t_end=1.0, adapt=False,
                                    direction="forward", record_every=1, snapshot_times=[],
                                    initial="ground_state", omega=1.0, init_mu=None, K=2, s1=100.0,
                                    E0=0.0, profile_spacing=0.01, file=None)),
    "modulation-track": (cmd_modulation_track, {"in": "fields", "coeffs": "profile.json",
                                                "out": "mod.csv", "s0": 0.0}),
    "blowup-experiment": (cmd_blowup_experiment, dict(mu=1.0, E0=0.0, s1=100.0, s_stop=40.0, K=2,
                                                      points_per_lambda=200, ds=0.0025, snapshots=13)),
    "coercivity": (cmd_coercivity, dict(GRID, K=2, mu=1.0, samples=100, amplitude=1e-3, b=0.05,
                                        **{"lambda": 0.00125}, seed=DEFAULT_SEED)),
    "report": (cmd_report, dict(inputs=["."], out="report.json")),
}


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _add_options(sub: argparse.ArgumentParser, defaults: dict):
    for key, default in defaults.items():
        flag = "--" + key.replace("_", "-")
        kw = dict(dest=key, default=argparse.SUPPRESS, help=f"default: {default}")
        if isinstance(default, bool):
            kw["type"] = _bool
        elif isinstance(default, list):
            kw["nargs"] = "*" if key in ("snapshot_times", "inputs") else "+"
            kw["type"] = type(default[0]) if default else float
            if key == "inputs":
                kw["type"] = str
        elif isinstance(default, (int, float)) and not isinstance(default, bool):
            kw["type"] = type(default)
        elif default is None and key in ("mass", "init_mu"):
            kw["type"] = float
        sub.add_argument(flag, **kw)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error=usage message={message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="deltablowup",
                                 description="Minimal-mass blow-up experiments for the quintic NLS with a point interaction.")
    ap.add_argument("--version", action="version", version=__version__)
    subs = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name, (_, defaults) in SUBCOMMANDS.items():
        sp = subs.add_parser(name, help=(SUBCOMMANDS[name][0].__doc__ or "").strip() or None)
        sp.add_argument("--config", default=None, help="JSON file of parameters; flags win")
        sp.add_argument("--out-dir", default=".", help="directory for outputs and the manifest")
        sp.add_argument("-v", "--verbose", action="store_true")
        _add_options(sp, defaults)
    return ap


def resolve_params(name: str, ns: argparse.Namespace) -> dict:
    defaults = SUBCOMMANDS[name][1]
    params = dict(defaults)
    if ns.config:
        try:
            cfg = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        for k, v in cfg.items():
            key = k.replace("-", "_")
            if key not in defaults:
                raise ConfigError(f"unknown config key {k!r}")
            params[key] = v
    for key in defaults:
        if hasattr(ns, key):
            params[key] = getattr(ns, key)
    if name == "simulate" and params["init_mu"] is None:
        params["init_mu"] = params["mu"]
    return params


def _hash_files(files) -> str:
    h = hashlib.sha256()
    for f in sorted(str(f) for f in files):
        h.update(Path(f).name.encode())
        h.update(Path(f).read_bytes())
    return h.hexdigest()


def dispatch(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    name = ns.subcommand
    try:
        params = resolve_params(name, ns)
        out = Path(ns.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        files, summary, checks = SUBCOMMANDS[name][0](params, out)
        wall = time.perf_counter() - start
        manifest = dict(subcommand=name, parameters=params, version=__version__, wall_time=wall,
                        outputs=[str(Path(f).relative_to(out)) for f in files],
                        output_hash=_hash_files(files), summary=summary, checks=checks)
        write_json(out / f"{name}.manifest.json", manifest)
    except ConfigError as exc:
        print(f"error=config message={exc}", file=sys.stderr)
        return 2
    except ResolutionError as exc:
        print(f"error=resolution message={exc}", file=sys.stderr)
        return 3
    except (ValueError, ArithmeticError) as exc:
        print(f"error=parameters message={exc}", file=sys.stderr)
        return 4
    except RuntimeError as exc:
        print(f"error=numerics message={exc}", file=sys.stderr)
        return 5
    print(json.dumps(_jsonable(dict(subcommand=name, summary=summary, checks=checks)), sort_keys=True))
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
