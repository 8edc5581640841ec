import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from conftest import YQ_SQ_ORACLE
from deltablowup.blowup_law import (LawParams, RegimeError, app_solution, beta_closed_form, critical_mass,
                                    final_data, fitted_exponent, integrate, invariant_c0,
                                    phase_portrait, script_F, script_F_closed, time_maps, vector_field)


def test_beta_closed_form():
    assert beta_closed_form(1.0) == pytest.approx(2 * np.sqrt(3) / YQ_SQ_ORACLE, rel=1e-14)
    assert beta_closed_form(1.0) == pytest.approx(2.0641, abs=1e-4)
    assert critical_mass() ** 2 == pytest.approx(np.sqrt(3) * np.pi / 2, rel=1e-14)


def test_vector_field_examples():
    lam, b = app_solution(10.0, 1.0)
    assert vector_field((10, lam, b), 1.0) == pytest.approx((-0.004, -0.02), rel=1e-12)
    dl, db = vector_field((0, 0.3, 0.0), 2.0)
    assert dl == 0 and db == pytest.approx(0.6)
    with pytest.raises(ValueError):
        vector_field((0, 0.0, 1.0), 1.0)


def test_unperturbed_law():
    tr = integrate((1.0, 1.0, 1.0), 0.0, 100.0)
    assert np.max(np.abs(tr.lam * tr.s - 1)) < 1e-10
    assert np.max(np.abs(tr.b * tr.s - 1)) < 1e-10


@pytest.fixture(scope="module")
def app_run():
    beta = beta_closed_form(1.0)
    lam, b = app_solution(10.0, beta)
    return beta, integrate((10.0, lam, b), beta, 1000.0)


def test_endpoint_matches_explicit_solution(app_run):
    beta, tr = app_run
    lam, b = app_solution(1000.0, beta)
    assert tr.s[-1] == pytest.approx(1000.0, rel=1e-14)
    assert tr.lam[-1] == pytest.approx(lam, rel=1e-8)
    assert tr.b[-1] == pytest.approx(b, rel=1e-8)
    assert not tr.collapsed


def test_fourth_order_convergence():
    lam, b = app_solution(10.0, 1.0)
    errs = [abs(integrate((10.0, lam, b), 1.0, 20.0, step=st_).lam[-1] / app_solution(20.0, 1.0)[0] - 1)
            for st_ in (0.04, 0.02)]
    assert np.log2(errs[0] / errs[1]) == pytest.approx(4, abs=0.3)


def test_invariant_drift_absolute(app_run):
    # stated 1e-10 per unit s; c0 is a difference of two terms of size 2 beta / lam ~ 1e6,
    # so roundoff alone puts the absolute drift near 1e-9
    beta, tr = app_run
    c = invariant_c0(tr.lam, tr.b, beta)
    assert np.max(np.abs(c - c[0])) / (tr.s[-1] - tr.s[0]) <= 1e-10


def test_invariant_drift_relative(app_run):
    beta, tr = app_run
    c = invariant_c0(tr.lam, tr.b, beta)
    rel = np.abs(c - c[0]) / (2 * beta / tr.lam)
    assert np.max(rel) / (tr.s[-1] - tr.s[0]) <= 1e-10


@given(st.floats(0.5, 3.0), st.floats(0.001, 0.05), st.floats(0.01, 0.3))
def test_invariant_conserved_on_random_starts(beta, lam, b):
    tr = integrate((1.0, lam, b), beta, 30.0)
    c = invariant_c0(tr.lam, tr.b, beta)
    assert np.max(np.abs(c - c[0])) <= 1e-9 * max(1.0, np.max(2 * beta / tr.lam))


def test_negative_beta_no_blowup():
    tr = integrate((0.0, 0.01, 0.1), -1.0, 200.0)
    assert np.any(tr.b < 0)
    k = np.argmax(tr.b < 0)
    assert np.all(np.diff(tr.lam[k:]) > 0)
    assert tr.lam.min() > 0.001


def test_time_maps():
    tm = time_maps(10.0, 1.0)
    assert tm.C_s == pytest.approx(4 / 3, rel=1e-15)
    assert tm.t_app == pytest.approx(-4 / 3000, rel=1e-14)
    beta = beta_closed_form(1.0)
    for s in (10.0, 100.0, 1000.0):
        tm = time_maps(s, beta)
        lam, b = app_solution(s, beta)
        assert tm.lam_of_t == pytest.approx(lam, rel=1e-12)
        assert tm.b_of_t == pytest.approx(b, rel=1e-12)
        assert tm.b_of_t / tm.lam_of_t ** 2 * abs(tm.t_app) == pytest.approx(2 / 3, rel=1e-10)
    with pytest.raises(ValueError):
        time_maps(10.0, 0.0)


def test_integrated_time_matches_time_map(app_run):
    beta, tr = app_run
    assert np.max(np.abs(tr.t / time_maps(tr.s, beta).t_app - 1)) < 1e-6


def test_exponents(app_run):
    beta, tr = app_run
    t = -np.geomspace(1e-2, 1e-6, 50)
    C_s = time_maps(1.0, beta).C_s
    s = (C_s / -t) ** (1 / 3)
    assert fitted_exponent(t, app_solution(s, beta)[0]) == pytest.approx(2 / 3, abs=1e-6)
    assert fitted_exponent(tr.t, tr.lam) == pytest.approx(2 / 3, abs=0.01)


@pytest.mark.parametrize("E0", [-1.0, 0.0, 1.0])
def test_script_F_oracles(E0):
    p = LawParams.from_energy(E0, 1.0)
    assert script_F(p.lambda0, p) == 0
    for lam in (1e-2, 1e-4, 1e-7):
        # raw integrand in tau as an independent oracle
        raw = quad(lambda t: t ** -1.5 / np.sqrt(2 * p.beta + p.C0 * t), lam, p.lambda0,
                   epsrel=1e-12, limit=500, points=np.geomspace(lam, p.lambda0, 12)[1:-1])[0]
        assert script_F(lam, p) == pytest.approx(raw, rel=1e-9)
        assert script_F(lam, p) == pytest.approx(script_F_closed(lam, p), rel=1e-12)
    dev = [script_F(lam, p) - 2 / (np.sqrt(2 * p.beta) * np.sqrt(lam)) for lam in (1e-3, 1e-4, 1e-5)]
    assert np.ptp(dev) < 1 and max(map(abs, dev)) < 10


def test_script_F_monotone():
    p = LawParams.from_energy(0.0, 1.0)
    vals = [script_F(lam, p) for lam in np.geomspace(1e-8, 0.1, 40)]
    assert np.all(np.diff(vals) < 0)
    with pytest.raises(ValueError):
        script_F(0.2, p)


def test_law_params_validation():
    with pytest.raises(ValueError):
        LawParams(beta=0.1, C0=-10.0, lambda0=0.1)
    with pytest.raises(ValueError):
        LawParams(beta=1.0, lambda0=0.0)
    assert LawParams.from_energy(1.0, 1.0).C0 == pytest.approx(8 / YQ_SQ_ORACLE)


@pytest.mark.parametrize("s1", [50.0, 100.0, 200.0])
@pytest.mark.parametrize("E0", [-1.0, 0.0, 1.0])
def test_final_data(s1, E0):
    fd = final_data(s1, E0, 1.0)
    assert abs(script_F(fd.lambda1, fd.params) - s1) <= 1e-10 * s1
    assert fd.b1 > 0
    lam_app, b_app = app_solution(s1, fd.params.beta)
    assert fd.b1 ** 2 == pytest.approx(2 * fd.params.beta * fd.lambda1 + fd.params.C0 * fd.lambda1 ** 2,
                                       rel=1e-14)
    assert abs(fd.b1 / b_app - 1) <= 10 / s1
    assert abs(np.sqrt(fd.lambda1 / lam_app) - 1) + abs(fd.b1 / b_app - 1) <= 10 / s1


def test_final_data_regime():
    assert abs(final_data(100.0, 0.0, 1.0).b1 / 0.02 - 1) < 0.1
    with pytest.raises(RegimeError):
        final_data(100.0, 0.0, -1.0)
    with pytest.raises(RegimeError):
        final_data(-1.0, 0.0, 1.0)


def test_phase_portrait():
    rows = phase_portrait(1.0, (0.01, 0.01), (0.1, 0.1), (1, 1))
    assert rows.shape == (1, 5) and rows[0, 4] == 1.0
    flat = phase_portrait(0.0, (0.01, 1), (-1, 1), (5, 7))
    assert np.all(flat[:, 3] <= 0) and not np.any(flat[:, 4])
    sym = phase_portrait(1.5, (0.01, 1), (-1, 1), (6, 9)).reshape(6, 9, 5)
    assert np.allclose(sym[:, :, 3], sym[:, ::-1, 3])
    assert np.allclose(sym[:, :, 2], -sym[:, ::-1, 2])
    with pytest.raises(ValueError):
        phase_portrait(1.0, (0, 1), (0, 1), (0, 3))
