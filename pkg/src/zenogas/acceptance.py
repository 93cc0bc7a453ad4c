"""Acceptance suite: paper-number regression at desk scale plus property
checks, one entry per criterion.  Used by both pytest and the CLI
`acceptance` scenario.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import bands, contact, exact, kinetics, meanfield, scenarios
from .config import RunConfig
from .scenarios import (FILLING_MULTIBAND_RE, FILLING_SINGLE_BAND, GammaCache,
                        gamma0_of, invert_gamma0_for_depth, lattice_for,
                        mf_kappa, rate_set_for, tube_for)
from .units import LatticeConfig

GAMMA0_SCAN_VPERP = (20.0, 25.0, 32.0, 40.0)
JSCAN_VY = (5.0, 8.0, 11.0, 16.0)
RATIO_VPERP = (20.0, 30.0, 40.0)
J_TARGET = 570.0
GAMMA0_TARGET = 8.7e4


@dataclass
class CheckResult:
    cid: str
    description: str
    passed: bool
    detail: str
    seconds: float


def _base_cfg(**kw) -> RunConfig:
    kw.setdefault("scenario", "acceptance")
    return RunConfig(**kw)


def check_tunneling_number(cache, fast=False) -> tuple[bool, str]:
    cfg = LatticeConfig(5.0, 25.0)
    j = bands.tunneling(5.0, 0, cfg)
    dev = abs(j - J_TARGET) / J_TARGET
    return dev < 0.05, f"J(5 E_R) = {j:.1f} s^-1, dev {dev:.1%} (tol 5%)"


def check_onsite_rate(cache, fast=False) -> tuple[bool, str]:
    cfg = LatticeConfig(5.0, 25.0)
    g0 = bands.onsite_loss_rate(cfg)
    dev = abs(g0 - GAMMA0_TARGET) / GAMMA0_TARGET
    return dev < 0.25, f"Gamma0(5,25) = {g0:.3e} s^-1, dev {dev:.1%} (tol 25%)"


def check_multiband_renormalization(cache, fast=False) -> tuple[bool, str]:
    run_cfg = _base_cfg()
    vps = (25.0,) if fast else RATIO_VPERP
    ratios = []
    rates_list = []
    for vp in vps:
        rs = rate_set_for(run_cfg, cache, 5.0, vp)
        rates_list.append(rs)
        ratios.append(rs.gamma_eff_mb / rs.gamma_eff)
    ok_ratio = all(3.5 <= r <= 7.0 for r in ratios)
    # identical synthetic kappa data fitted under each rate model
    kappas = np.array([kinetics.kappa_from_filling(FILLING_MULTIBAND_RE,
                                                   r.gamma_eff_mb)
                       for r in rates_list])
    g_sb = np.array([4.0 * r.gamma_eff for r in rates_list])
    g_mb = np.array([4.0 * r.gamma_eff_mb for r in rates_list])
    f_sb = float(np.dot(g_sb, kappas) / np.dot(g_sb, g_sb))
    f_mb = float(np.dot(g_mb, kappas) / np.dot(g_mb, g_mb))
    fratio = f_mb / f_sb
    ok_f = (1.0 / 7.0) <= fratio <= (1.0 / 3.5)
    detail = (f"Gamma_mb/Gamma_eff = {[round(float(r), 2) for r in ratios]} "
              f"(window [3.5, 7]); f_mb/f_sb = {fratio:.3f} "
              f"(window [{1/7:.3f}, {1/3.5:.3f}])")
    return ok_ratio and ok_f, detail


def check_s1b_structure(cache, fast=False) -> tuple[bool, str]:
    run_cfg = _base_cfg()
    vps = RATIO_VPERP
    single = [cache.gamma_eff_mb(lattice_for(run_cfg, 5.0, vp), ny=1, nt=1)
              for vp in vps]
    multi2 = [cache.gamma_eff_mb(lattice_for(run_cfg, 5.0, vp), ny=6, nt=2)
              for vp in vps]
    inc = all(b > a for a, b in zip(single, single[1:]))
    dec = all(b < a for a, b in zip(multi2, multi2[1:]))
    if fast:
        g5 = cache.gamma_eff_mb(lattice_for(run_cfg, 5.0, 20.0), ny=4, nt=4)
        g6 = cache.gamma_eff_mb(lattice_for(run_cfg, 5.0, 20.0), ny=5, nt=5)
    else:
        g5 = cache.gamma_eff_mb(lattice_for(run_cfg, 5.0, 20.0), ny=5, nt=5)
        g6 = cache.gamma_eff_mb(lattice_for(run_cfg, 5.0, 20.0), ny=6, nt=6)
    conv = abs(g6 - g5) / g6
    detail = (f"1-transverse-band rates {[round(float(x), 1) for x in single]} rising={inc}; "
              f"2-transverse-band {[round(float(x), 1) for x in multi2]} falling={dec}; "
              f"5->6 bands/axis change {conv:.1%} (tol 5%)")
    return inc and dec and conv < 0.05, detail


def check_s1a_nonmonotonic(cache, fast=False) -> tuple[bool, str]:
    alphas = (0.25, 0.5, 1.0, 1.5, 2.25, 3.0)
    nb = 4 if fast else 6
    swc: dict = {}
    sb = [contact.single_well_rate(50.0, a, 1, check_convergence=False,
                                   _problem_cache=swc) for a in alphas]
    mb = [contact.single_well_rate(50.0, a, nb, check_convergence=False,
                                   _problem_cache=swc) for a in alphas]
    sb_monotone = all(b > a for a, b in zip(sb, sb[1:]))
    imax = int(np.argmax(mb))
    interior = 0 < imax < len(alphas) - 1
    near_one = 0.4 <= alphas[imax] <= 2.0
    detail = (f"single-band rising={sb_monotone}; multiband({nb} bands) max at "
              f"|a_s|/a_ho = {alphas[imax]} with rates "
              f"{[round(float(x), 3) for x in mb]}")
    return sb_monotone and interior and near_one, detail


def _scaling_rate_sets(cache, run_cfg):
    g0_scan = [(vp, rate_set_for(run_cfg, cache, 5.0, vp))
               for vp in GAMMA0_SCAN_VPERP]
    # the J scan holds the bare rate at the quoted 8.7e4 s^-1, which puts the
    # inverted transverse depths inside the experimental 20..40 E_R window
    j_scan = []
    for vy in JSCAN_VY:
        vp = invert_gamma0_for_depth(GAMMA0_TARGET, vy, run_cfg)
        j_scan.append((vy, vp, rate_set_for(run_cfg, cache, vy, vp)))
    return g0_scan, j_scan


def check_zeno_scaling(cache, fast=False) -> tuple[bool, str]:
    run_cfg = _base_cfg(seeds=16, n_times=40)
    g0_scan, j_scan = _scaling_rate_sets(cache, run_cfg)
    # multiband rate-equation kappas
    j_pairs = [(r, kinetics.kappa_from_filling(FILLING_MULTIBAND_RE,
                                               r.gamma_eff_mb))
               for _, _, r in j_scan]
    g_pairs = [(r, kinetics.kappa_from_filling(FILLING_MULTIBAND_RE,
                                               r.gamma_eff_mb))
               for _, r in g0_scan]
    re_scan = kinetics.zeno_scaling_scan(j_pairs, g_pairs)
    results = {
        "re_j_expo": re_scan.j_fit.exponent,
        "re_g0_expo": re_scan.gamma0_fit.exponent,
        "re_chi2_ratio": re_scan.chi2_ratio_linear_over_quadratic,
    }
    ok = (1.8 <= results["re_j_expo"] <= 2.2
          and -1.2 <= results["re_g0_expo"] <= -0.8
          and results["re_chi2_ratio"] > 3.0)
    if not fast:
        jmf = []
        for vy, vp, rates in j_scan:
            tube = tube_for(run_cfg, rates, vp)
            _, fit = mf_kappa(run_cfg, tube)
            jmf.append((rates, fit.kappa))
        gmf = []
        for vp, rates in g0_scan:
            tube = tube_for(run_cfg, rates, vp)
            _, fit = mf_kappa(run_cfg, tube)
            gmf.append((rates, fit.kappa))
        mf_scan = kinetics.zeno_scaling_scan(jmf, gmf)
        results["mf_j_expo"] = mf_scan.j_fit.exponent
        results["mf_g0_expo"] = mf_scan.gamma0_fit.exponent
        results["mf_chi2_ratio"] = mf_scan.chi2_ratio_linear_over_quadratic
        ok = ok and (1.8 <= results["mf_j_expo"] <= 2.2
                     and -1.2 <= results["mf_g0_expo"] <= -0.8
                     and results["mf_chi2_ratio"] > 3.0)
    detail = ", ".join(f"{k}={v:.3g}" for k, v in results.items())
    return ok, detail


def check_mf_structure(cache, fast=False) -> tuple[bool, str]:
    tube = meanfield.TubeConfig.from_trap_frequencies(
        25, 576.0, 35.0, 2.0 * math.pi * 34.2, 2.0 * math.pi * 38.0,
        dephase=False)
    dist = meanfield.ShellDistribution(2, 9, 0.5, rng_seed=3)
    init = meanfield.shell_init(dist, tube)
    kappa = 4.0 * 0.5 * tube.gamma_eff_used
    t_grid = np.linspace(0.0, 0.6 / kappa, 25)
    res = meanfield.mf_evolve(init, tube, t_grid)
    traces = np.einsum("tsii->ts", res.states).real
    trace_dev = float(np.abs(traces - 1.0).max())
    herm_dev = float(np.abs(res.states
                            - np.conj(np.swapaxes(res.states, -1, -2))).max())
    ntot = meanfield.n_total(res.states)
    mono = bool(np.all(np.diff(ntot) <= 1e-8))
    # two-site J = 0 reduction to the rate equation
    tube2 = meanfield.TubeConfig(3, 0.0, 11.0)
    init2 = meanfield.vacuum_state(3)
    init2[0] = 0.0
    init2[0, meanfield.UP, meanfield.UP] = 1.0
    init2[1] = 0.0
    init2[1, meanfield.DOWN, meanfield.DOWN] = 1.0
    tg = np.linspace(0.0, 0.05, 30)
    res2 = meanfield.mf_evolve(init2, tube2, tg, rtol=1e-11, atol=1e-13)
    n_up = np.real(res2.states[:, 0, meanfield.UP, meanfield.UP])
    re_exact = 1.0 / (1.0 + 4.0 * tube2.gamma_eff_used * tg)
    re_dev = float(np.abs(n_up - re_exact).max())
    ok = trace_dev < 1e-8 and herm_dev < 1e-10 and mono and re_dev < 1e-8
    return ok, (f"trace dev {trace_dev:.1e}, herm dev {herm_dev:.1e}, "
                f"monotone={mono}, two-site RE dev {re_dev:.1e}")


def check_exact_oracle(cache, fast=False) -> tuple[bool, str]:
    tube = meanfield.TubeConfig(5, 300.0, 40.0, 2.0, 2.2)
    basis = exact.ProjectedFockBasis(5)
    config = (0, exact.SPIN_UP, 0, exact.SPIN_DOWN, 0)
    rho0 = np.outer(exact.fock_state(basis, config),
                    exact.fock_state(basis, config).conj())
    t_grid = np.linspace(0.0, 0.008, 25)
    li_curve, _ = exact.liouville_evolve(rho0, tube, t_grid, basis=basis)
    n_traj = 500 if fast else 2000
    tr_curve, _ = exact.trajectory_evolve(config, tube, t_grid, n_traj, seed=11)
    stderr = np.where(tr_curve.stderr > 0, tr_curve.stderr, np.inf)
    dev_sigmas = np.abs(tr_curve.n_down - li_curve.n_down) / (2.0 * stderr)
    within = bool(np.all(dev_sigmas <= 1.0))
    # 1/sqrt(n) error scaling, averaged over independent batches to tame the
    # variance of the rms-deviation estimator (time samples are correlated)
    n_batches = 4 if fast else 8
    errs = []
    for n in (250, 1000, 4000):
        sq = 0.0
        for b in range(n_batches):
            c, _ = exact.trajectory_evolve(config, tube, t_grid, n,
                                           seed=1000 * (b + 1))
            sq += float(np.mean((c.n_down - li_curve.n_down) ** 2))
        errs.append(math.sqrt(sq / n_batches))
    dec = errs[0] > errs[1] > errs[2]
    ratio = errs[0] / errs[2]
    scaling_ok = dec and 2.3 <= ratio <= 7.0
    detail = (f"max dev {float(np.nanmax(dev_sigmas)):.2f} x 2sigma; "
              f"batch-averaged rms errs {[f'{e:.2e}' for e in errs]} "
              f"ratio(250/4000)={ratio:.1f} (ideal 4)")
    return within and scaling_ok, detail


def check_two_body_analytic(cache, fast=False) -> tuple[bool, str]:
    g = 7.5
    tube2 = meanfield.TubeConfig(2, 0.0, g)
    basis2 = exact.ProjectedFockBasis(2)
    jumps = exact.build_jumps(tube2, basis2)
    up_dn = exact.fock_state(basis2, (exact.SPIN_UP, exact.SPIN_DOWN))
    dn_up = exact.fock_state(basis2, (exact.SPIN_DOWN, exact.SPIN_UP))
    singlet = (up_dn - dn_up) / math.sqrt(2.0)
    triplet = (up_dn + dn_up) / math.sqrt(2.0)
    per_op = [float(np.vdot(A @ singlet, A @ singlet).real) for A in jumps]
    op_ok = abs(per_op[0] - 4.0 * g) < 1e-9 and abs(per_op[1] - 4.0 * g) < 1e-9
    dark = max(float(np.vdot(A @ triplet, A @ triplet).real) for A in jumps)
    rho0 = np.outer(singlet, singlet.conj())
    t_grid = np.linspace(0.0, 0.25 / g, 20)
    curve, _ = exact.liouville_evolve(rho0, tube2, t_grid, basis=basis2)
    analytic = 2.0 * np.exp(-8.0 * g * t_grid)
    li_dev = float(np.abs(curve.n_down * 2.0 - analytic).max())
    rho_t = np.outer(triplet, triplet.conj())
    curve_t, _ = exact.liouville_evolve(rho_t, tube2, t_grid, basis=basis2)
    tri_rate = abs(math.log(curve_t.n_down[-1] / curve_t.n_down[0])
                   / t_grid[-1])
    cfgp = LatticeConfig(5.0, 25.0)
    tri_dw = contact.triplet_decay_rate(cfgp)
    g0 = bands.onsite_loss_rate(cfgp)
    ok = (op_ok and dark < 1e-12 and li_dev < 1e-6
          and tri_rate < 1e-6 * g0 and tri_dw < 1e-6 * g0)
    return ok, (f"per-operator singlet rate {per_op[0]:.3f} (=4*Gamma_eff); "
                f"total decay 8*Gamma_eff matches analytic to {li_dev:.1e}; "
                f"triplet rates {tri_rate:.2e} (chain), {tri_dw:.2e} (double well)")


def check_mf_vs_exact(cache, fast=False) -> tuple[bool, str]:
    # Fig. 3(b) conditions: V_perp = 80 E_R, V_y = 5 E_R, trap pair
    # 34.2/38 Hz, rescaled onto the small chain by the edge-suppression
    # heuristic of mf_exact_benchmark
    run_cfg = _base_cfg(n_traj=400 if fast else 1600, n_times=30, seeds=5,
                        omega_mean_hz=(38.0 + 34.2) / 2.0,
                        omega_ratio=34.2 / 38.0)
    rates = rate_set_for(run_cfg, cache, 5.0, 80.0)
    mf_c, ex_c, tube = scenarios.mf_exact_benchmark(
        run_cfg, rates, 80.0, equal_trap=False,
        n_configs=8 if fast else 16)
    n0 = ex_c.n_down[0]
    upto = ex_c.n_down >= 0.8 * n0
    rel = np.abs(mf_c.n_down[upto] - ex_c.n_down[upto]) / n0
    early_ok = float(rel.max()) <= 0.05
    mf_e, ex_e, _ = scenarios.mf_exact_benchmark(
        run_cfg, rates, 80.0, equal_trap=True,
        n_configs=8 if fast else 16)
    sep = float(ex_e.n_down[-1] - mf_e.n_down[-1])
    sig = float(ex_e.stderr[-1]) if ex_e.stderr is not None else 0.0
    sat_ok = sep > 2.0 * sig and sep > 0.0
    return early_ok and sat_ok, (
        f"differential trap: max |MF-exact|/N0 = {float(rel.max()):.3f} up to "
        f"20% loss (tol 0.05); equal trap: exact-MF final gap {sep:.3f} "
        f"(> {2*sig:.3f})")


def check_saturation(cache, fast=False) -> tuple[bool, str]:
    run_cfg = _base_cfg(n_traj=400 if fast else 1000, n_times=40)
    rates = rate_set_for(run_cfg, cache, 5.0, 25.0)
    curve, tube = scenarios.saturation_run(run_cfg, rates)
    fit = kinetics.fit_kappa(curve)
    re = kinetics.re_solution(fit.n0, fit.kappa, curve.times)
    k, _ = kinetics.loss_window(curve)
    early = np.abs(re[:k] - curve.n_down[:k]) / curve.n_down[0]
    early_ok = float(early.max()) <= 0.10
    plateau = float(curve.n_down[-1])
    late_flat = abs(curve.n_down[-1] - curve.n_down[3 * len(curve.times) // 4])
    sigma_end = float(curve.stderr[-1]) if curve.stderr is not None else 0.0
    plateau_ok = plateau > 3.0 * sigma_end and plateau > 0.05 * curve.n_down[0]
    overest = float(re[-1]) < plateau
    return early_ok and plateau_ok and overest, (
        f"early RE dev {float(early.max()):.3f} (tol 0.10); plateau "
        f"{plateau:.2f} molecules (flat to {late_flat:.3f}); RE late value "
        f"{float(re[-1]):.2f} underestimates survivors")


def check_filling_pipeline(cache, fast=False) -> tuple[bool, str]:
    run_cfg = _base_cfg(seeds=12 if fast else 20, n_times=32)
    f_plant = 0.09
    shell = meanfield.ShellDistribution(run_cfg.shell_inner,
                                        run_cfg.shell_outer, f_plant)
    seeds = range(run_cfg.seeds)
    points = []
    t_grids = []
    for vp in ((25.0,) if fast else (25.0, 40.0)):
        rates = rate_set_for(run_cfg, cache, 5.0, vp)
        tube = tube_for(run_cfg, rates, vp)
        kappa_scale = kinetics.kappa_from_filling(f_plant, tube.gamma_eff_used)
        tg = np.linspace(0.0, 0.6 / kappa_scale, run_cfg.n_times)
        curve, _ = meanfield.ensemble_average(shell, tube, tg, seeds,
                                              rtol=1e-7)
        kap = kinetics.fit_kappa(curve).kappa
        points.append((tube, kap))
        t_grids.append(tg)
    fit = meanfield.fit_filling(points, shell, seeds, t_grids=t_grids)
    rec_ok = abs(fit.filling - f_plant) < 0.005
    range_ok = fit.filling_range <= 0.02
    return rec_ok and range_ok, (
        f"recovered f = {fit.filling:.4f} (planted {f_plant}); shell-width "
        f"sensitivity {fit.filling_range:.4f} (tol 0.02); variants {fit.variants}")


CHECKS = [
    ("1", "tunneling number J(V_y=5) ~ 570 s^-1 within 5%",
     check_tunneling_number),
    ("2", "on-site rate Gamma0(5,25) ~ 8.7e4 s^-1 within 25%",
     check_onsite_rate),
    ("3", "multiband renormalization ratio in [3.5, 7] and filling ratio",
     check_multiband_renormalization),
    ("4", "transverse-band structure of the double-well rate and 5->6 "
     "convergence", check_s1b_structure),
    ("5", "single-well rate non-monotonic (multiband) vs monotone "
     "(single band)", check_s1a_nonmonotonic),
    ("6", "kappa scaling exponents (J^2, 1/Gamma0) and chi2 ratio",
     check_zeno_scaling),
    ("7", "mean-field structure: trace, monotone number, two-site RE limit",
     check_mf_structure),
    ("8", "trajectory-vs-Liouville agreement and 1/sqrt(n) error scaling",
     check_exact_oracle),
    ("9", "two-site analytic decay rates and dark triplet",
     check_two_body_analytic),
    ("10", "MF vs exact: 5% agreement with differential trap; saturation "
     "above MF with equal traps", check_mf_vs_exact),
    ("11", "finite-number saturation vs rate-equation fit window",
     check_saturation),
    ("12", "filling-fraction pipeline recovers planted f = 0.09",
     check_filling_pipeline),
]


def run_all(cache: GammaCache | None = None, fast: bool = False,
            only=None, verbose: bool = True) -> list[CheckResult]:
    cache = cache if cache is not None else GammaCache(".zenogas-cache")
    results = []
    for cid, desc, fn in CHECKS:
        if only is not None and cid not in only:
            continue
        t0 = time.time()
        try:
            passed, detail = fn(cache, fast=fast)
        except Exception as err:   # noqa: BLE001 - a crash is a failed check
            passed, detail = False, f"{type(err).__name__}: {err}"
        dt = time.time() - t0
        results.append(CheckResult(cid, desc, passed, detail, dt))
        if verbose:
            mark = "PASS" if passed else "FAIL"
            print(f"[{mark}] criterion {cid}: {desc} ({dt:.1f} s)\n"
                  f"       {detail}")
    return results
