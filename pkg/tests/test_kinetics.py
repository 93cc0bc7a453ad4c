import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from zenogas import kinetics


def test_gamma_eff_values():
    assert kinetics.gamma_eff(0.0, 1e4) == 0.0
    assert kinetics.gamma_eff(570.0, 8.7e4) == pytest.approx(7.469, rel=1e-3)
    assert kinetics.gamma_eff(2 * 570.0, 8.7e4) == pytest.approx(
        4 * kinetics.gamma_eff(570.0, 8.7e4), rel=1e-12)
    assert kinetics.gamma_eff(570.0, 2 * 8.7e4) == pytest.approx(
        0.5 * kinetics.gamma_eff(570.0, 8.7e4), rel=1e-12)
    with pytest.raises(ZeroDivisionError):
        kinetics.gamma_eff(570.0, 0.0)


def test_re_solution_basics():
    assert kinetics.re_solution(100.0, 3.0, 0.0) == 100.0
    assert kinetics.re_solution(100.0, 0.0, 57.0) == 100.0
    assert kinetics.re_solution(100.0, 3.0, 1.0 / 3.0) == pytest.approx(50.0)


def test_re_solution_satisfies_ode():
    n0, kappa = 80.0, 2.5
    sol = solve_ivp(lambda t, n: -kappa / n0 * n**2, (0.0, 2.0), [n0],
                    t_eval=np.linspace(0, 2, 17), rtol=1e-12, atol=1e-12)
    closed = kinetics.re_solution(n0, kappa, sol.t)
    assert np.abs(sol.y[0] - closed).max() < 1e-8
    # plug-back residual of the closed form
    ts = np.linspace(0.01, 2.0, 50)
    n = kinetics.re_solution(n0, kappa, ts)
    dn_exact = -kappa / n0 * n**2
    dn_closed = -n0 * kappa / (1 + kappa * ts) ** 2
    assert np.abs(dn_exact - dn_closed).max() < 1e-10 * n0


def test_kappa_from_filling():
    assert kinetics.kappa_from_filling(0.0, 50.0) == 0.0
    gamma_mb = 5 * 7.469
    assert kinetics.kappa_from_filling(0.06, gamma_mb) == pytest.approx(
        8.96, rel=2e-3)
    # same kappa with a 5x larger rate needs a 5x smaller filling
    k = kinetics.kappa_from_filling(0.25, 7.469)
    assert kinetics.kappa_from_filling(0.05, 5 * 7.469) == pytest.approx(k)
    with pytest.raises(ValueError):
        kinetics.kappa_from_filling(1.2, 10.0)


def test_kappa_from_filling_monotone():
    vals_f = [kinetics.kappa_from_filling(f, 10.0) for f in (0.02, 0.1, 0.3)]
    vals_g = [kinetics.kappa_from_filling(0.1, g) for g in (5.0, 10.0, 20.0)]
    assert vals_f == sorted(vals_f) and len(set(vals_f)) == 3
    assert vals_g == sorted(vals_g) and len(set(vals_g)) == 3


def test_fit_kappa_exact_roundtrip():
    ts = np.linspace(0.0, 0.2, 40)
    curve = kinetics.LossCurve(ts, kinetics.re_solution(100.0, 3.0, ts))
    fit = kinetics.fit_kappa(curve)
    assert fit.kappa == pytest.approx(3.0, abs=1e-6)
    assert fit.n0 == pytest.approx(100.0, rel=1e-8)


def test_fit_kappa_scale_invariance():
    # kappa is intensive: rescaling N0 at fixed filling leaves it unchanged
    ts = np.linspace(0.0, 0.1, 30)
    k1 = kinetics.fit_kappa(
        kinetics.LossCurve(ts, kinetics.re_solution(10.0, 4.0, ts))).kappa
    k2 = kinetics.fit_kappa(
        kinetics.LossCurve(ts, kinetics.re_solution(1000.0, 4.0, ts))).kappa
    assert k1 == pytest.approx(k2, rel=1e-9)


def test_fit_kappa_window_on_saturating_curve():
    # two-site product-pair closed form: saturates at half the molecules,
    # which the rate equation cannot represent
    g = 1.0
    ts = np.linspace(0.0, 6.0, 2000)
    n = 100.0 * (0.5 + 0.5 * np.exp(-8.0 * g * ts))
    curve = kinetics.LossCurve(ts, n)
    k25 = kinetics.fit_kappa(curve, fraction=0.25).kappa
    k10 = kinetics.fit_kappa(curve, fraction=0.10).kappa
    kfull = kinetics.fit_kappa(curve, fraction=0.51).kappa
    assert abs(k25 - k10) / k10 < 0.10
    assert abs(kfull - k10) / k10 > 0.25


def test_fit_kappa_noise_recovery():
    rng = np.random.default_rng(42)
    ts = np.linspace(0.0, 0.15, 60)
    clean = kinetics.re_solution(100.0, 3.0, ts)
    hits = 0
    for _ in range(100):
        noisy = clean * (1.0 + 0.05 * rng.normal(size=len(ts)))
        fit = kinetics.fit_kappa(kinetics.LossCurve(ts, noisy))
        if abs(fit.kappa - 3.0) <= 2.0 * fit.kappa_err:
            hits += 1
    assert hits >= 85


def test_fit_kappa_errors():
    ts = np.linspace(0.0, 1.0, 3)
    with pytest.raises(kinetics.InsufficientDataError):
        kinetics.fit_kappa(kinetics.LossCurve(ts, kinetics.re_solution(10, 9.0, ts)))
    flat = kinetics.LossCurve(np.linspace(0, 1, 20), np.full(20, 5.0))
    with pytest.raises(kinetics.DegenerateFitError):
        kinetics.fit_kappa(flat)


def test_scaling_scan_exact_exponents():
    js = np.array([100.0, 200.0, 400.0, 800.0])
    g0 = 8.7e4
    j_pairs = [(kinetics.RateSet(J=j, gamma0=g0),
                kinetics.kappa_from_filling(0.1, kinetics.gamma_eff(j, g0)))
               for j in js]
    g0s = np.array([2e4, 4e4, 8e4, 1.6e5])
    g_pairs = [(kinetics.RateSet(J=570.0, gamma0=g),
                kinetics.kappa_from_filling(0.1, kinetics.gamma_eff(570.0, g)))
               for g in g0s]
    scan = kinetics.zeno_scaling_scan(j_pairs, g_pairs)
    assert scan.j_fit.exponent == pytest.approx(2.0, abs=1e-9)
    assert scan.gamma0_fit.exponent == pytest.approx(-1.0, abs=1e-9)
    assert scan.chi2_ratio_linear_over_quadratic > 3.0


def test_scaling_scan_needs_points():
    pair = (kinetics.RateSet(J=100.0, gamma0=1e4), 1.0)
    with pytest.raises(kinetics.InsufficientDataError):
        kinetics.zeno_scaling_scan([pair] * 3, [pair] * 4)


def test_loss_curve_validation():
    with pytest.raises(ValueError):
        kinetics.LossCurve(np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        kinetics.RateSet(J=-1.0, gamma0=1.0)
