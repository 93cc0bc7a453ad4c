import math
from dataclasses import replace

import numpy as np
import pytest

from zenogas import meanfield as mf


def tube(**kw):
    kw.setdefault("n_sites", 7)
    kw.setdefault("J", 500.0)
    kw.setdefault("gamma_eff_used", 20.0)
    return mf.TubeConfig(**kw)


def test_vacuum_is_fixed_point():
    cfg = tube()
    rho = mf.vacuum_state(cfg.n_sites)
    assert np.abs(mf.mf_rhs(rho, cfg)).max() == 0.0


def test_single_molecule_number_conserved():
    cfg = tube(omega_up=3.0, omega_down=3.3)
    rho = mf.vacuum_state(cfg.n_sites)
    rho[3] = 0.0
    rho[3, mf.UP, mf.UP] = 1.0
    rho[3, mf.UP, mf.VAC] = 0.5
    rho[3, mf.VAC, mf.UP] = 0.5
    t = np.linspace(0.0, 0.02, 15)
    res = mf.mf_evolve(rho, cfg, t)
    ntot = mf.n_total(res.states)
    assert np.abs(ntot - ntot[0]).max() < 1e-9


def test_adjacent_pair_rate_matches_rate_equation_limit():
    cfg = tube(J=0.0, gamma_eff_used=13.0)
    rho = mf.vacuum_state(cfg.n_sites)
    rho[2] = 0.0
    rho[2, mf.UP, mf.UP] = 1.0
    rho[3] = 0.0
    rho[3, mf.DOWN, mf.DOWN] = 1.0
    d = mf.mf_rhs(rho, cfg)
    assert d[2, mf.UP, mf.UP] == pytest.approx(-4.0 * 13.0, rel=1e-12)
    assert d[3, mf.DOWN, mf.DOWN] == pytest.approx(-4.0 * 13.0, rel=1e-12)
    assert d[2, mf.VAC, mf.VAC] == pytest.approx(4.0 * 13.0, rel=1e-12)


def test_two_site_reduces_to_rate_equation():
    cfg = mf.TubeConfig(2, 0.0, 9.0)
    rho = mf.vacuum_state(2)
    rho[0] = 0.0
    rho[0, mf.UP, mf.UP] = 1.0
    rho[1] = 0.0
    rho[1, mf.DOWN, mf.DOWN] = 1.0
    t = np.linspace(0.0, 0.08, 25)
    res = mf.mf_evolve(rho, cfg, t, rtol=1e-11, atol=1e-13)
    n_up = np.real(res.states[:, 0, mf.UP, mf.UP])
    assert np.abs(n_up - 1.0 / (1.0 + 4.0 * 9.0 * t)).max() < 1e-8


def test_trace_conserved_and_hermitian():
    cfg = tube(omega_up=5.0, omega_down=6.0)
    dist = mf.ShellDistribution(0, 3, 0.8, rng_seed=5)
    rho = mf.shell_init(dist, cfg)
    t = np.linspace(0.0, 0.05, 20)
    res = mf.mf_evolve(rho, cfg, t)
    tr = np.einsum("tsii->ts", res.states).real
    assert np.abs(tr - 1.0).max() < 1e-8
    herm = np.abs(res.states - np.conj(np.swapaxes(res.states, -1, -2))).max()
    assert herm < 1e-12


def test_molecule_number_monotone():
    cfg = tube()
    dist = mf.ShellDistribution(0, 3, 1.0, rng_seed=1)
    rho = mf.shell_init(dist, cfg)
    t = np.linspace(0.0, 0.1, 40)
    res = mf.mf_evolve(rho, cfg, t)
    assert np.all(np.diff(mf.n_total(res.states)) <= 1e-9)


def test_unitary_limit_conserves_and_spreads():
    cfg = tube(gamma_eff_used=0.0)
    rho = mf.vacuum_state(cfg.n_sites)
    rho[3] = 0.0
    rho[3, mf.DOWN, mf.DOWN] = 1.0
    rho[3, mf.DOWN, mf.VAC] = 0.5
    rho[3, mf.VAC, mf.DOWN] = 0.5
    t = np.linspace(0.0, 0.002, 10)
    res = mf.mf_evolve(rho, cfg, t)
    dens = np.real(res.states[..., mf.DOWN, mf.DOWN])
    assert np.abs(dens.sum(axis=1) - 1.0).max() < 1e-9
    js = cfg.site_indices().astype(float)
    var = (dens * js**2).sum(axis=1) - ((dens * js).sum(axis=1)) ** 2
    assert var[-1] > var[0] + 1e-4


def test_dephasing_keeps_spin_coherences_zero():
    cfg = tube(dephase=True, omega_up=2.0, omega_down=2.4)
    rho = mf.vacuum_state(cfg.n_sites)
    for i, s in ((2, mf.UP), (3, mf.DOWN), (4, mf.UP)):
        rho[i] = 0.0
        rho[i, s, s] = 1.0
        rho[i, s, mf.VAC] = 0.5
        rho[i, mf.VAC, s] = 0.5
    t = np.linspace(0.0, 0.03, 12)
    res = mf.mf_evolve(rho, cfg, t)
    assert np.abs(res.states[:, :, mf.UP, mf.DOWN]).max() < 1e-12
    assert np.abs(res.states[:, :, mf.DOWN, mf.UP]).max() < 1e-12


def test_shell_init_edge_cases():
    cfg = tube(n_sites=101)
    empty = mf.shell_init(mf.ShellDistribution(20, 50, 0.0), cfg)
    assert np.allclose(empty[:, mf.VAC, mf.VAC], 1.0)
    full = mf.shell_init(mf.ShellDistribution(0, 50, 1.0, rng_seed=2), cfg)
    js = cfg.site_indices()
    occ = np.real(full[:, mf.UP, mf.UP] + full[:, mf.DOWN, mf.DOWN])
    assert np.all(occ[np.abs(js) <= 50] == 1.0)
    # N_down averages to half the shell sites
    n_dn = [mf.n_down(mf.shell_init(mf.ShellDistribution(0, 50, 1.0), cfg,
                                    seed=s)) for s in range(40)]
    n_shell = int((np.abs(js) <= 50).sum())
    assert np.mean(n_dn) == pytest.approx(n_shell / 2, abs=3 *
                                          0.5 * math.sqrt(n_shell / 40))


def test_shell_init_coherence_and_counts():
    cfg = tube(n_sites=121)
    dist = mf.ShellDistribution(20, 50, 0.09, rng_seed=0)
    counts = []
    for s in range(200):
        rho = mf.shell_init(dist, cfg, seed=s)
        counts.append(mf.n_total(rho))
        occ = np.real(rho[:, mf.UP, mf.UP] + rho[:, mf.DOWN, mf.DOWN]) > 0.5
        coh = np.abs(rho[occ][:, :2, mf.VAC]).max(axis=1)
        if occ.any():
            assert np.allclose(coh, 0.5)
    # about 0.09 * 62 sites ~ 5.6 molecules per tube
    n_shell = 62
    expect = 0.09 * n_shell
    sd = math.sqrt(n_shell * 0.09 * 0.91 / 200)
    assert np.mean(counts) == pytest.approx(expect, abs=4 * sd)


def test_shell_invariants():
    with pytest.raises(Exception):
        mf.ShellDistribution(5, 5, 0.1)
    with pytest.raises(Exception):
        mf.ShellDistribution(0, 10, 1.5)
    cfg = tube(n_sites=7)
    with pytest.raises(Exception):
        mf.shell_init(mf.ShellDistribution(0, 10, 0.5), cfg)


def test_site_matrix_checks():
    cfg = tube(n_sites=3)
    rho = mf.vacuum_state(3)
    mf.check_site_matrices(rho)
    seeded = mf.shell_init(mf.ShellDistribution(0, 1, 1.0, rng_seed=0),
                           mf.TubeConfig(3, 100.0, 1.0))
    # the tunneling seed is deliberately not positive semidefinite
    mf.check_site_matrices(seeded, require_psd=False)
    with pytest.raises(ValueError):
        bad = rho.copy()
        bad[0, mf.UP, mf.UP] = 0.2
        mf.check_site_matrices(bad)


def test_positivity_preserved_from_physical_states():
    cfg = tube(dephase=True)
    rho = mf.vacuum_state(cfg.n_sites)
    rho[2] = 0.0
    rho[2, mf.UP, mf.UP] = 0.5
    rho[2, mf.UP, mf.VAC] = 0.5
    rho[2, mf.VAC, mf.UP] = 0.5
    rho[2, mf.VAC, mf.VAC] = 0.5
    rho[3] = 0.0
    rho[3, mf.DOWN, mf.DOWN] = 1.0
    t = np.linspace(0.0, 0.05, 15)
    res = mf.mf_evolve(rho, cfg, t)
    for state in res.states:
        mf.check_site_matrices(state, require_psd=True)


def test_ensemble_identical_seeds_zero_stderr():
    cfg = tube(n_sites=21)
    dist = mf.ShellDistribution(2, 8, 0.5)
    t = np.linspace(0.0, 0.01, 6)
    curve, _ = mf.ensemble_average(dist, cfg, t, seeds=[7, 7, 7])
    assert np.abs(curve.stderr).max() < 1e-12


def test_ensemble_stderr_scaling_with_seeds():
    cfg = tube(n_sites=31)
    dist = mf.ShellDistribution(2, 12, 0.4)
    t = np.linspace(0.0, 0.02, 5)
    c32, _ = mf.ensemble_average(dist, cfg, t, seeds=range(32))
    c128, _ = mf.ensemble_average(dist, cfg, t, seeds=range(128))
    ratio = c32.stderr[-1] / c128.stderr[-1]
    assert 1.4 < ratio < 2.9          # ideal 2 with sampling noise


def test_coherence_phase_leaves_ndown_invariant():
    t = np.linspace(0.0, 0.02, 10)
    curves = []
    for phase in (0.0, 1.3):
        cfg = tube(n_sites=11, coherence_phase=phase, omega_up=2.0,
                   omega_down=2.2)
        dist = mf.ShellDistribution(1, 4, 0.7, rng_seed=9)
        rho = mf.shell_init(dist, cfg)
        res = mf.mf_evolve(rho, cfg, t)
        curves.append(np.real(res.states[..., mf.DOWN, mf.DOWN]).sum(axis=1))
    assert np.abs(curves[0] - curves[1]).max() < 1e-9


def test_fit_filling_recovers_planted_value():
    gam = 15.0
    t1 = mf.TubeConfig(31, 400.0, gam, dephase=True)
    t2 = mf.TubeConfig(31, 400.0, 2.0 * gam, dephase=True)
    shell = mf.ShellDistribution(2, 10, 0.12)
    seeds = range(8)
    points = []
    grids = []
    from zenogas import kinetics
    for tube in (t1, t2):
        tg = np.linspace(0.0, 0.6 / (4 * 0.12 * tube.gamma_eff_used), 25)
        curve, _ = mf.ensemble_average(shell, tube, tg, seeds, rtol=1e-7)
        points.append((tube, kinetics.fit_kappa(curve).kappa))
        grids.append(tg)
    fit = mf.fit_filling(points, shell, seeds, t_grids=grids, width_delta=4)
    assert abs(fit.filling - 0.12) < 0.01
    assert fit.filling_range < 0.05
    with pytest.raises(Exception):
        mf.fit_filling(points[:1], shell, seeds)
