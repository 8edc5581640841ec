"""Acceptance criteria 1-12, each printing one PASS/FAIL line.

Every criterion that produces data goes through the CLI into a session
directory, so criterion 12 can rerun the recorded manifests and compare CSVs.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import Q_MASS_ORACLE, decaying_field
from deltablowup.blowup_law import (app_solution, beta_closed_form, final_data, fitted_exponent,
                                    script_F, time_maps)
from deltablowup.cli import dispatch
from deltablowup.grid import SpatialGrid, inner, read_field_csv, second_derivative
from deltablowup.ground_state import (GroundStateSpec, ground_state, gn_check, pohozaev_defect,
                                      pseudoconformal_solution)
from deltablowup.linops import beta_coefficient
from deltablowup.pde import l2_error, soliton_orbit_deviation

RESULTS: list[str] = []

LADDER = ((0.02, 0.002), (0.01, 0.001), (0.005, 0.0005))

# subcommand runs behind the criteria, keyed by output directory name
RUNS = {
    "ground-state": ["ground-state"],
    "linops-verify": ["linops-verify"],
    "profile-build": ["profile-build"],
    **{f"residual-scan-K{K}": ["residual-scan", "--K", str(K)] for K in (0, 1, 2)},
    "law-integrate": ["law-integrate", "--beta", "1", "--s0", "10", "--s1", "1000"],
    **{f"benchmark-{i}": ["simulate", "--initial", "pseudoconformal", "--mu", "0", "--t-start", "-1",
                          "--t-end", "-0.5", "--dt0", str(dt), "--spacing", str(h), "--record-every", "100"]
       for i, (h, dt) in enumerate(LADDER)},
    "blowup-experiment": ["blowup-experiment", "--mu", "1", "--E0", "0", "--s1", "100"],
    "repulsive": ["simulate", "--initial", "ground_state", "--mu", "-1", "--init-mu", "0", "--t-end", "20",
                  "--dt0", "0.001", "--record-every", "50"],
    "soliton": ["simulate", "--initial", "ground_state", "--mu", "1", "--omega", "1", "--t-end",
                str(2 * np.pi), "--dt0", "0.001", "--record-every", "100"],
    "coercivity": ["coercivity", "--samples", "100", "--amplitude", "1e-3", "--b", "0.05",
                   "--lambda", "0.00125"],
}


@pytest.fixture(scope="session")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


_done: dict = {}


def cli(workdir: Path, key: str) -> dict:
    """Run the subcommand behind ``key`` once per session; returns its manifest."""
    if key not in _done:
        out = workdir / "first" / key
        start = time.perf_counter()
        code = dispatch([*RUNS[key], "--out-dir", str(out)])
        assert code == 0, f"{key} exited with {code}"
        name = RUNS[key][0]
        _done[key] = json.loads((out / f"{name}.manifest.json").read_text())
        _done[key]["_dir"] = out
        _done[key]["_seconds"] = time.perf_counter() - start
    return _done[key]


def verdict(n: int, ok: bool, detail: str, seconds: float, budget: float) -> bool:
    ok = ok and seconds < budget
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{seconds:.1f}s / {budget:.0f}s]"
    RESULTS.append(line)
    print(line)
    return ok


def manifest_checks(m, n):
    return [c for c in m["checks"] if c["criterion_id"] == n]


def test_criterion_01_gn_extremality(workdir):
    start = time.perf_counter()
    m = cli(workdir, "ground-state")
    ratio_q = m["summary"]["gn_ratio"]
    g = SpatialGrid(20.0, 0.01)
    rng = np.random.default_rng(20240607)
    worst = max(gn_check(g, decaying_field(rng, g, complex_=True)).ratio for _ in range(1000))
    ok = abs(ratio_q - 1) <= 1e-4 and worst <= 1 + 1e-4
    assert verdict(1, ok, f"GN(Q) - 1 = {ratio_q - 1:.2e}, max random ratio = {worst:.4f}",
                   time.perf_counter() - start, 10)


def test_criterion_02_ground_state_identities():
    start = time.perf_counter()
    g = SpatialGrid(20.0, 0.01)
    poh = abs(pohozaev_defect(g))
    q = ground_state(GroundStateSpec(), g)
    mass_err = abs(inner(g, q, q) / Q_MASS_ORACLE - 1)
    res = []
    for gg in (g, g.refine(2)):
        qq = ground_state(GroundStateSpec(), gg)
        r = -second_derivative(gg, qq) + qq - qq ** 5
        r[[0, -1]] = 0
        res.append(np.sqrt(inner(gg, r, r)))
    order = np.log2(res[0] / res[1])
    ok = poh <= 1e-6 and mass_err <= 1e-6 and abs(order - 2) <= 0.2
    assert verdict(2, ok, f"Pohozaev = {poh:.1e}, mass rel err = {mass_err:.1e}, order = {order:.3f}",
                   time.perf_counter() - start, 10)


def test_criterion_03_linearized_algebra(workdir):
    m = cli(workdir, "linops-verify")
    res = m["summary"]["residuals"]
    checks = manifest_checks(m, 3)
    ok = all(c["pass"] for c in checks)
    worst = max(res[k] for k in ("L-Q", "L+LambdaQ+2Q", "L-y2Q+4LambdaQ", "rho"))
    ratios = ", ".join(f"{c['value']:.3f}" for c in checks[1:5])
    assert verdict(3, ok, f"max residual = {worst:.2e} (tol 1e-4), ratios = {ratios}, "
                          f"<Q,rho> ratio - 1 = {res['Q_rho_ratio'] - 1:.1e}", m["_seconds"], 30)


def test_criterion_04_beta_two_routes(workdir):
    start = time.perf_counter()
    m = cli(workdir, "profile-build")
    devs = []
    for mu in (0.5, 1.0, 2.0):
        a, b = beta_coefficient(mu, both=True)
        devs.append(abs(b / a - 1))
    zero = abs(beta_coefficient(0.0))
    ok = max(devs) <= 1e-6 and zero <= 1e-10
    b00 = m["summary"]["beta"]["0,0"]
    assert verdict(4, ok, f"max route gap = {max(devs):.1e}, beta(0) = {zero:.1e} "
                          f"(profile beta00 rel diff {b00 / beta_closed_form(1) - 1:.1e})",
                   time.perf_counter() - start, 30)


def test_criterion_05_residual_order(workdir):
    start = time.perf_counter()
    slopes = {K: cli(workdir, f"residual-scan-K{K}")["summary"]["slope"] for K in (0, 1, 2)}
    ok = all(abs(slopes[K] - (K + 2)) <= 0.3 for K in slopes)
    assert verdict(5, ok, "slopes " + ", ".join(f"K={K}: {v:.3f}" for K, v in slopes.items()),
                   time.perf_counter() - start, 300)


def test_criterion_06_law_exactness(workdir):
    start = time.perf_counter()
    m = cli(workdir, "law-integrate")
    data = np.loadtxt(m["_dir"] / "traj.csv", delimiter=",", skiprows=1)
    s, lam, b, t = data[:, 0], data[:, 1], data[:, 2], data[:, 4]
    la, ba = app_solution(s, 1.0)
    rel = max(np.max(np.abs(lam / la - 1)), np.max(np.abs(b / ba - 1)))
    drift = m["summary"]["c0_drift_per_s"]
    expo = fitted_exponent(t, lam)
    tm = time_maps(s, 1.0)
    consist = max(np.max(np.abs(tm.lam_of_t / la - 1)), np.max(np.abs(tm.b_of_t / ba - 1)))
    ok = rel <= 1e-8 and drift <= 1e-10 and abs(expo - 2 / 3) <= 0.01 and consist <= 1e-12
    assert verdict(6, ok, f"max rel err = {rel:.1e}, c0 drift/s = {drift:.1e} (tol 1e-10; relative "
                          f"{m['summary']['c0_relative_drift_per_s']:.1e}), exponent = {expo:.6f}, "
                          f"time-map consistency = {consist:.1e}", time.perf_counter() - start, 10)


def test_criterion_07_final_data():
    start = time.perf_counter()
    worst_F, worst_b = 0.0, 0.0
    for s1 in (50.0, 100.0, 200.0):
        for E0 in (-1.0, 0.0, 1.0):
            fd = final_data(s1, E0, 1.0)
            worst_F = max(worst_F, abs(script_F(fd.lambda1, fd.params) - s1) / s1)
            worst_b = max(worst_b, abs(fd.b1 / app_solution(s1, fd.params.beta)[1] - 1) * s1)
    ok = worst_F <= 1e-8 and worst_b <= 10
    assert verdict(7, ok, f"max |F - s1|/s1 = {worst_F:.1e}, max s1 |b1/b_app - 1| = {worst_b:.2f}",
                   time.perf_counter() - start, 60)


def test_criterion_08_solver_benchmark(workdir):
    start = time.perf_counter()
    errs, drifts = [], []
    for i in range(len(LADDER)):
        m = cli(workdir, f"benchmark-{i}")
        fields = m["_dir"] / "fields"
        idx = np.loadtxt(fields / "index.csv", delimiter=",", skiprows=1, ndmin=2)
        g, u = read_field_csv(fields / f"field_{int(idx[-1, 0]):04d}.csv")
        errs.append(l2_error(g, u, pseudoconformal_solution(-0.5, g)))
        drifts.append(m["summary"]["mass_drift"] * 1e4 / m["summary"]["steps"])
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    ok = np.all(np.abs(orders - 2) <= 0.3) and max(drifts) <= 1e-10
    shown = ", ".join(f"{o:.3f}" for o in orders)
    assert verdict(8, ok, f"orders = {shown}, "
                          f"mass drift per 1e4 steps = {max(drifts):.1e}", time.perf_counter() - start, 600)


@pytest.mark.slow
def test_criterion_09_blowup_trend(workdir):
    m = cli(workdir, "blowup-experiment")
    s = m["summary"]
    ok = all(c["pass"] for c in manifest_checks(m, 9))
    assert verdict(9, ok, f"max lambda rel err = {s['max_lambda_error']:.2e}, max eps H1 = "
                          f"{s['max_eps_h1']:.1e}, exponent = {s['exponent']:.3f}", m["_seconds"], 1800)


@pytest.mark.slow
def test_criterion_10_global_contrasts(workdir):
    start = time.perf_counter()
    rep = cli(workdir, "repulsive")["summary"]
    m = cli(workdir, "soliton")
    fields = m["_dir"] / "fields"
    idx = np.loadtxt(fields / "index.csv", delimiter=",", skiprows=1, ndmin=2)
    g, u0 = read_field_csv(fields / "field_0000.csv")
    _, u1 = read_field_csv(fields / f"field_{int(idx[-1, 0]):04d}.csv")
    dev = soliton_orbit_deviation(g, u0, u1)
    ok = rep["grad_ratio"] <= 3 and not rep["blowup"] and dev <= 0.01
    assert verdict(10, ok, f"mu=-1 grad max/min = {rep['grad_ratio']:.3f}, soliton deviation per period = "
                           f"{dev:.1e}", time.perf_counter() - start, 900)


def test_criterion_11_coercivity(workdir):
    start = time.perf_counter()
    gaps = manifest_checks(cli(workdir, "linops-verify"), 11)
    coer = cli(workdir, "coercivity")
    ok = all(c["pass"] for c in gaps) and coer["checks"][0]["pass"]
    ratios = ", ".join(f"{c['value']:.4f}" for c in gaps)
    assert verdict(11, ok, f"gap ratios fine/coarse = {ratios}, "
                           f"min H ratio = {coer['summary']['min_ratio']:.3f}", time.perf_counter() - start, 600)


@pytest.mark.slow
def test_criterion_12_determinism(workdir):
    start = time.perf_counter()
    mismatched, compared = [], 0
    for key in RUNS:
        m = cli(workdir, key)
        cfg = workdir / f"{key}.config.json"
        cfg.write_text(json.dumps(m["parameters"]))
        again = workdir / "second" / key
        assert dispatch([m["subcommand"], "--config", str(cfg), "--out-dir", str(again)]) == 0
        for f in sorted(m["_dir"].rglob("*.csv")):
            compared += 1
            if f.read_bytes() != (again / f.relative_to(m["_dir"])).read_bytes():
                mismatched.append(str(f.relative_to(workdir)))
    ok = compared > 0 and not mismatched
    assert verdict(12, ok, f"{compared} CSVs compared, {len(mismatched)} differ", time.perf_counter() - start,
                   3600)
