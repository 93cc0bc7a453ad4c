"""Scenario pipelines: lattice inputs -> multiband rates -> dynamics -> fits.

Each scenario writes one or more versioned CSVs plus a manifest.  Expensive
multiband double-well rates are cached on disk keyed by a hash of the lattice
parameters, so sweeps and reruns reuse converged values.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import bands, contact, csvio, kinetics, meanfield, exact
from .config import RunConfig, trap_frequency_map
from .manifest import RunManifest
from .units import LatticeConfig

FILLING_SINGLE_BAND = 0.25
FILLING_MULTIBAND_RE = 0.06


class OutOfRangeError(ValueError):
    pass


def lattice_for(run_cfg: RunConfig, v_y: float, v_perp: float) -> LatticeConfig:
    return LatticeConfig(v_y, v_perp, run_cfg.spacing_a, run_cfg.beta_3d,
                         run_cfg.n_bands)


class GammaCache:
    """Disk cache of multiband double-well rates keyed by lattice parameters."""

    def __init__(self, cache_dir):
        self.dir = Path(cache_dir)
        self.dir.mkdir(parents=True, exist_ok=True)

    def _key(self, cfg: LatticeConfig, ny: int, nt: int) -> str:
        parts = (round(cfg.depth_y, 10), round(cfg.depth_perp, 10),
                 cfg.spacing_a, cfg.beta_3d, ny, nt)
        return hashlib.sha256(repr(parts).encode()).hexdigest()[:24]

    def gamma_eff_mb(self, cfg: LatticeConfig, ny: int | None = None,
                     nt: int | None = None) -> float:
        ny = ny if ny is not None else cfg.n_bands_per_axis
        nt = nt if nt is not None else cfg.n_bands_per_axis
        path = self.dir / f"dw-{self._key(cfg, ny, nt)}.json"
        if path.exists():
            return json.loads(path.read_text())["gamma_eff_mb"]
        res = contact.effective_loss_rate_dw(cfg, n_bands_y=ny, n_bands_perp=nt)
        path.write_text(json.dumps({
            "gamma_eff_mb": res.gamma_eff_mb, "gamma0": res.gamma0,
            "fit_residual": res.fit.fit_residual,
            "model_error": res.model_error,
            "v_y": cfg.depth_y, "v_perp": cfg.depth_perp,
            "n_bands_y": ny, "n_bands_perp": nt}))
        return res.gamma_eff_mb


_QUARTIC_MEMO: dict = {}


def _quartic(depth: float, run_cfg: RunConfig) -> float:
    key = (round(depth, 10), run_cfg.spacing_a)
    if key not in _QUARTIC_MEMO:
        cfg = lattice_for(run_cfg, 5.0, 25.0)
        _QUARTIC_MEMO[key] = bands.wannier(depth, 0, cfg=cfg).quartic_integral()
    return _QUARTIC_MEMO[key]


def gamma0_of(run_cfg: RunConfig, v_y: float, v_perp: float) -> float:
    u_y = _quartic(v_y, run_cfg)
    u_p = _quartic(v_perp, run_cfg)
    return run_cfg.beta_3d * u_y * u_p * u_p


def invert_gamma0_for_depth(target: float, v_y: float, run_cfg: RunConfig,
                            lo: float = 5.0, hi: float = 120.0,
                            rel_tol: float = 1e-3) -> float:
    """Transverse depth giving the target bare on-site rate at fixed V_y."""
    g_lo = gamma0_of(run_cfg, v_y, lo)
    g_hi = gamma0_of(run_cfg, v_y, hi)
    if not g_lo <= target <= g_hi:
        raise OutOfRangeError(
            f"Gamma0 target {target:.3e} outside [{g_lo:.3e}, {g_hi:.3e}] "
            f"for V_perp in [{lo}, {hi}] E_R")
    return brentq(lambda vp: gamma0_of(run_cfg, v_y, vp) - target, lo, hi,
                  rtol=rel_tol * 0.1)


def rate_set_for(run_cfg: RunConfig, cache: GammaCache, v_y: float,
                 v_perp: float) -> kinetics.RateSet:
    cfg = lattice_for(run_cfg, v_y, v_perp)
    J = bands.tunneling(v_y, 0, cfg)
    g0 = gamma0_of(run_cfg, v_y, v_perp)
    ge = kinetics.gamma_eff(J, g0)
    gmb = cache.gamma_eff_mb(cfg)
    return kinetics.RateSet(J=J, gamma0=g0, gamma_eff=ge, gamma_eff_mb=gmb)


def tube_for(run_cfg: RunConfig, rates: kinetics.RateSet, v_perp: float,
             n_sites: int | None = None, omega_scale: float = 1.0,
             equal_trap: bool = False) -> meanfield.TubeConfig:
    wmean = (run_cfg.omega_mean_hz * 2.0 * math.pi
             if run_cfg.omega_mean_hz is not None
             else trap_frequency_map(v_perp))
    wmean *= omega_scale
    ratio = 1.0 if equal_trap else run_cfg.omega_ratio
    w_dn = 2.0 * wmean / (1.0 + ratio)
    w_up = ratio * w_dn
    return meanfield.TubeConfig.from_trap_frequencies(
        n_sites if n_sites is not None else run_cfg.n_sites,
        rates.J, rates.gamma_eff_mb, w_up, w_dn,
        spacing_a=run_cfg.spacing_a, dephase=run_cfg.dephase)


def mf_kappa(run_cfg: RunConfig, tube: meanfield.TubeConfig,
             filling: float | None = None, rtol: float = 1e-7):
    """Ensemble-averaged MF loss curve and its fitted kappa."""
    f = filling if filling is not None else run_cfg.filling
    shell = meanfield.ShellDistribution(run_cfg.shell_inner,
                                        run_cfg.shell_outer, f)
    kappa_scale = kinetics.kappa_from_filling(f, tube.gamma_eff_used)
    t_max = run_cfg.t_max_s if run_cfg.t_max_s else 0.6 / max(kappa_scale, 1e-9)
    t_grid = np.linspace(0.0, t_max, run_cfg.n_times)
    curve, _ = meanfield.ensemble_average(shell, tube, t_grid,
                                          seeds=range(run_cfg.seeds), rtol=rtol)
    fit = kinetics.fit_kappa(curve)
    return curve, fit


def _map_points(run_cfg: RunConfig, fn, items):
    if run_cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=run_cfg.threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


RATES_HEADER = ["v_y_er", "v_perp_er", "j_rad_s", "gamma0_rad_s",
                "gamma_eff_sb_rad_s", "gamma_eff_mb_rad_s",
                "kappa_re_sb_rad_s", "kappa_re_mb_rad_s",
                "kappa_mf_rad_s", "kappa_mf_err_rad_s"]


def _rates_row(v_y, v_perp, rates, kappa_mf=None, kappa_mf_err=None):
    return [v_y, v_perp, rates.J, rates.gamma0, rates.gamma_eff,
            rates.gamma_eff_mb,
            kinetics.kappa_from_filling(FILLING_SINGLE_BAND, rates.gamma_eff),
            kinetics.kappa_from_filling(FILLING_MULTIBAND_RE, rates.gamma_eff_mb),
            kappa_mf if kappa_mf is not None else "",
            kappa_mf_err if kappa_mf_err is not None else ""]


def scenario_kappa_vs_gamma0(run_cfg: RunConfig, out: Path, man: RunManifest,
                             cache: GammaCache):
    v_y = run_cfg.v_y[0]
    rate_sets = _map_points(
        run_cfg, lambda vp: rate_set_for(run_cfg, cache, v_y, vp),
        run_cfg.v_perp)
    rows = []
    for vp, rates in zip(run_cfg.v_perp, rate_sets):
        kmf = kerr = None
        if run_cfg.solver == "MF":
            tube = tube_for(run_cfg, rates, vp)
            _, fit = mf_kappa(run_cfg, tube)
            kmf, kerr = fit.kappa, fit.kappa_err
        rows.append(_rates_row(v_y, vp, rates, kmf, kerr))
        man.note("point", v_y=v_y, v_perp=vp, gamma_eff_mb=rates.gamma_eff_mb)
    man.add_file(csvio.write_csv(out / "kappa_vs_gamma0.csv", "rates_scan",
                                 RATES_HEADER, rows))


GAMMA0_JSCAN_TARGET = 8.7e4   # the J scan holds Gamma0 at this angular rate


def scenario_kappa_vs_j(run_cfg: RunConfig, out: Path, man: RunManifest,
                        cache: GammaCache):
    target = GAMMA0_JSCAN_TARGET
    man.note("gamma0_target", value=target)

    def solve_point(v_y):
        vp = invert_gamma0_for_depth(target, v_y, run_cfg)
        return vp, rate_set_for(run_cfg, cache, v_y, vp)

    points = _map_points(run_cfg, solve_point, run_cfg.v_y)
    rows = []
    for v_y, (vp, rates) in zip(run_cfg.v_y, points):
        kmf = kerr = None
        if run_cfg.solver == "MF":
            tube = tube_for(run_cfg, rates, vp)
            _, fit = mf_kappa(run_cfg, tube)
            kmf, kerr = fit.kappa, fit.kappa_err
        rows.append(_rates_row(v_y, vp, rates, kmf, kerr))
    man.add_file(csvio.write_csv(out / "kappa_vs_j.csv", "rates_scan",
                                 RATES_HEADER, rows))
    js = [abs(r.J) for _, r in points]
    ks = [kinetics.kappa_from_filling(FILLING_MULTIBAND_RE, r.gamma_eff_mb)
          for _, r in points]
    if len(js) >= 2:
        expo, _ = kinetics.fit_power_law(js, ks)
        man.note("kappa_vs_j_exponent", value=expo)


def _loss_curve_rows(curve: kinetics.LossCurve):
    rows = []
    for i, t in enumerate(curve.times):
        err = curve.stderr[i] if curve.stderr is not None else ""
        rows.append([float(t), float(curve.n_down[i]), err, curve.source])
    return rows


LOSS_HEADER = ["t_s", "n_down", "n_down_err", "source"]


def scenario_deep_lattice_dynamics(run_cfg: RunConfig, out: Path,
                                   man: RunManifest, cache: GammaCache):
    v_y, v_perp = run_cfg.v_y[0], max(run_cfg.v_perp)
    rates = rate_set_for(run_cfg, cache, v_y, v_perp)
    tube = tube_for(run_cfg, rates, v_perp)
    curve, fit = mf_kappa(run_cfg, tube)
    man.note("mf_fit", kappa=fit.kappa, kappa_err=fit.kappa_err,
             window_s=fit.t_window)
    re_curve = kinetics.LossCurve(
        curve.times, kinetics.re_solution(fit.n0, fit.kappa, curve.times),
        source="RE-fit")
    man.add_file(csvio.write_csv(out / "mf_curve.csv", "loss_curve",
                                 LOSS_HEADER, _loss_curve_rows(curve)))
    man.add_file(csvio.write_csv(out / "re_fit_curve.csv", "loss_curve",
                                 LOSS_HEADER, _loss_curve_rows(re_curve)))


def mf_exact_benchmark(run_cfg: RunConfig, rates: kinetics.RateSet,
                       v_perp: float, equal_trap: bool, n_sites: int = 9,
                       occupied_band=(1, 4), n_configs: int = 16,
                       omega_scale: float | None = None):
    """Matched MF and trajectory runs on one small tube ensemble.

    The trap curvature is rescaled so the edge-site energy mismatch relative
    to J reproduces the shell-edge suppression of the full-size system.
    """
    if omega_scale is None:
        omega_scale = (run_cfg.shell_outer + run_cfg.shell_inner) / 2.0 / occupied_band[1]
    tube = tube_for(run_cfg, rates, v_perp, n_sites=n_sites,
                    omega_scale=omega_scale, equal_trap=equal_trap)
    rng = np.random.Generator(np.random.Philox(key=12345))
    js = tube.site_indices()
    allowed = np.nonzero((np.abs(js) >= occupied_band[0])
                         & (np.abs(js) <= occupied_band[1]))[0]
    configs = []
    for _ in range(n_configs):
        sites = rng.choice(allowed, size=4, replace=False)
        spins = [exact.SPIN_UP, exact.SPIN_UP, exact.SPIN_DOWN, exact.SPIN_DOWN]
        c = [exact.EMPTY] * n_sites
        for s, sp in zip(sites, spins):
            c[int(s)] = sp
        configs.append(tuple(c))
    kappa_scale = 4.0 * tube.gamma_eff_used
    t_max = run_cfg.t_max_s if run_cfg.t_max_s else 1.2 / kappa_scale
    t_grid = np.linspace(0.0, t_max, run_cfg.n_times)
    n_traj = run_cfg.n_traj
    ex_curve, _ = exact.trajectory_evolve(configs, tube, t_grid, n_traj,
                                          seed=run_cfg.seeds)
    init = np.stack([_mf_state_from_config(c, tube) for c in configs])
    res = meanfield.mf_evolve(init, tube, t_grid, rtol=1e-8)
    nd = np.real(res.states[..., meanfield.DOWN, meanfield.DOWN]).sum(axis=-1)
    mf_curve = kinetics.LossCurve(t_grid, nd.mean(axis=1), source="MF")
    return mf_curve, ex_curve, tube


def _mf_state_from_config(config, tube: meanfield.TubeConfig) -> np.ndarray:
    rho = meanfield.vacuum_state(tube.n_sites)
    c = tube.initial_coherence
    spin_map = {exact.SPIN_UP: meanfield.UP, exact.SPIN_DOWN: meanfield.DOWN}
    for i, s in enumerate(config):
        if s != exact.EMPTY:
            m = spin_map[s]
            rho[i] = 0.0
            rho[i, m, m] = 1.0
            rho[i, m, meanfield.VAC] = c
            rho[i, meanfield.VAC, m] = c
    return rho


def scenario_mf_vs_exact(run_cfg: RunConfig, out: Path, man: RunManifest,
                         cache: GammaCache):
    v_y, v_perp = run_cfg.v_y[0], max(run_cfg.v_perp)
    rates = rate_set_for(run_cfg, cache, v_y, v_perp)
    for tag, equal in (("differential", False), ("equal", True)):
        mf_curve, ex_curve, _ = mf_exact_benchmark(run_cfg, rates, v_perp,
                                                   equal_trap=equal)
        man.add_file(csvio.write_csv(out / f"mf_{tag}.csv", "loss_curve",
                                     LOSS_HEADER, _loss_curve_rows(mf_curve)))
        man.add_file(csvio.write_csv(out / f"exact_{tag}.csv", "loss_curve",
                                     LOSS_HEADER, _loss_curve_rows(ex_curve)))
        man.note("mf_vs_exact", trap=tag,
                 final_exact=float(ex_curve.n_down[-1]),
                 final_mf=float(mf_curve.n_down[-1]))


def scenario_s1_renormalization(run_cfg: RunConfig, out: Path,
                                man: RunManifest, cache: GammaCache):
    alphas = (0.25, 0.5, 0.75, 1.0, 1.5, 2.25, 3.0)
    nb = run_cfg.n_bands
    swc: dict = {}
    rows = []
    for n_bands in (1, nb):
        for a in alphas:
            r = contact.single_well_rate(50.0, a, n_bands,
                                         check_convergence=False,
                                         _problem_cache=swc)
            rows.append([a, n_bands, r])
    man.add_file(csvio.write_csv(out / "single_well_rates.csv", "single_well",
                                 ["a_s_over_aho", "n_bands", "rate_over_omega"],
                                 rows))
    fam_rows = []
    v_perps = run_cfg.v_perp if not run_cfg.fast else run_cfg.v_perp[:2]
    v_y = run_cfg.v_y[0]
    for vp in v_perps:
        cfg = lattice_for(run_cfg, v_y, vp)
        for ny in range(1, nb + 1):
            g = cache.gamma_eff_mb(cfg, ny=ny, nt=1)
            fam_rows.append([vp, ny, 1, g])
        for nt in range(2, nb + 1):
            g = cache.gamma_eff_mb(cfg, ny=nb, nt=nt)
            fam_rows.append([vp, nb, nt, g])
    man.add_file(csvio.write_csv(
        out / "band_families.csv", "band_family",
        ["v_perp_er", "n_bands_y", "n_bands_perp", "gamma_eff_mb_rad_s"],
        fam_rows))


def saturation_run(run_cfg: RunConfig, rates: kinetics.RateSet,
                   n_sites: int = 9, n_particles: int = 6):
    """Densely filled single tube: exact curve with late-time plateau."""
    tube = tube_for(run_cfg, rates, run_cfg.v_perp[0], n_sites=n_sites,
                    omega_scale=0.0)
    rng = np.random.Generator(np.random.Philox(key=777))
    sites = rng.choice(n_sites, size=n_particles, replace=False)
    spins = ([exact.SPIN_UP] * (n_particles // 2)
             + [exact.SPIN_DOWN] * (n_particles - n_particles // 2))
    config = [exact.EMPTY] * n_sites
    for s, sp in zip(sites, spins):
        config[int(s)] = sp
    kappa_scale = 4.0 * tube.gamma_eff_used
    t_max = run_cfg.t_max_s if run_cfg.t_max_s else 8.0 / kappa_scale
    # dense early segment: the packed tube loses its first 25% much faster
    # than the dilute kappa scale suggests
    n_half = run_cfg.n_times // 2
    t_grid = np.concatenate([
        np.linspace(0.0, t_max / 16.0, n_half + 1),
        np.linspace(t_max / 16.0, t_max, run_cfg.n_times - n_half)[1:]])
    curve, _ = exact.trajectory_evolve([tuple(config)], tube, t_grid,
                                       run_cfg.n_traj, seed=run_cfg.seeds)
    return curve, tube


def scenario_saturation(run_cfg: RunConfig, out: Path, man: RunManifest,
                        cache: GammaCache):
    v_y, v_perp = run_cfg.v_y[0], run_cfg.v_perp[0]
    rates = rate_set_for(run_cfg, cache, v_y, v_perp)
    curve, _ = saturation_run(run_cfg, rates)
    fit = kinetics.fit_kappa(curve)
    re_curve = kinetics.LossCurve(
        curve.times, kinetics.re_solution(fit.n0, fit.kappa, curve.times),
        source="RE-fit")
    man.note("saturation", kappa=fit.kappa, window_s=fit.t_window,
             plateau=float(curve.n_down[-1]))
    man.add_file(csvio.write_csv(out / "exact_curve.csv", "loss_curve",
                                 LOSS_HEADER, _loss_curve_rows(curve)))
    man.add_file(csvio.write_csv(out / "re_fit_curve.csv", "loss_curve",
                                 LOSS_HEADER, _loss_curve_rows(re_curve)))


def scenario_acceptance(run_cfg: RunConfig, out: Path, man: RunManifest,
                        cache: GammaCache):
    from . import acceptance
    results = acceptance.run_all(cache=cache, fast=run_cfg.fast)
    rows = [[r.cid, r.description, r.passed, r.detail, round(r.seconds, 2)]
            for r in results]
    man.add_file(csvio.write_csv(out / "acceptance.csv", "acceptance",
                                 ["id", "description", "passed", "detail",
                                  "seconds"], rows))
    for r in results:
        man.note("acceptance", id=r.cid, passed=r.passed)
    if not all(r.passed for r in results):
        failed = [r.cid for r in results if not r.passed]
        raise RuntimeError(f"acceptance criteria failed: {failed}")


_SCENARIOS = {
    "kappa_vs_gamma0": scenario_kappa_vs_gamma0,
    "kappa_vs_j": scenario_kappa_vs_j,
    "deep_lattice_dynamics": scenario_deep_lattice_dynamics,
    "mf_vs_exact": scenario_mf_vs_exact,
    "s1_renormalization": scenario_s1_renormalization,
    "saturation": scenario_saturation,
    "acceptance": scenario_acceptance,
}


def run_scenario(run_cfg: RunConfig) -> tuple[RunManifest, bool]:
    out = Path(run_cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = GammaCache(run_cfg.cache_dir)
    man = RunManifest(run_cfg.scenario, run_cfg.as_dict())
    ok = True
    try:
        _SCENARIOS[run_cfg.scenario](run_cfg, out, man, cache)
    except Exception as err:   # noqa: BLE001 - reported through the manifest
        man.error = f"{type(err).__name__}: {err}"
        ok = False
    man.finish()
    man.write(out)
    return man, ok
