"""Mean-field solver for the projected loss master equation.

Each site carries a 3x3 reduced density matrix over {up, down, vacuum}.  The
equations of motion couple nearest neighbors through mean-field factorized
tunneling and pair-loss terms at rates 2*Gamma and 4*Gamma; the vacuum gain
term carries the sign assignment that conserves the per-site trace exactly
(positive for diagonal pairs, negative for spin-coherence pairs).

The trap enters the coherence equations as site-dependent phase rotations
Omega_sigma j^2 with Omega_sigma = m omega_sigma^2 a^2 / (2 hbar).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .kinetics import LossCurve, fit_kappa
from .units import PhysicalConstants, KRB, InvalidConfigError

UP, DOWN, VAC = 0, 1, 2
TRACE_TOL = 1e-8
PSD_TOL = 1e-8


@dataclass(frozen=True)
class TubeConfig:
    """One 1D tube: site count, rates, trap curvatures, dephasing switch.

    omega_up/omega_down are the trap curvature energies over hbar,
    Omega_sigma = m omega_sigma^2 a^2 / (2 hbar), in s^-1.
    """

    n_sites: int
    J: float
    gamma_eff_used: float
    omega_up: float = 0.0
    omega_down: float = 0.0
    dephase: bool = False
    initial_coherence: float = 0.5
    coherence_phase: float = 0.0

    def __post_init__(self):
        if self.n_sites < 1:
            raise InvalidConfigError("n_sites must be positive")
        if self.omega_up < 0 or self.omega_down < 0:
            raise InvalidConfigError("trap curvatures must be non-negative")
        if (self.omega_up > 0 or self.omega_down > 0) and self.n_sites % 2 == 0:
            raise InvalidConfigError("a trapped tube needs an odd n_sites "
                                     "(trap symmetric about the center site)")

    @classmethod
    def from_trap_frequencies(cls, n_sites: int, J: float, gamma_eff_used: float,
                              omega_up_rad: float, omega_down_rad: float,
                              spacing_a: float = 532e-9,
                              constants: PhysicalConstants = KRB,
                              **kw) -> "TubeConfig":
        """Build from angular trap frequencies omega_sigma (rad/s)."""
        m, hbar, a = constants.molecule_mass, constants.hbar, spacing_a
        cup = m * omega_up_rad**2 * a**2 / (2.0 * hbar)
        cdn = m * omega_down_rad**2 * a**2 / (2.0 * hbar)
        return cls(n_sites, J, gamma_eff_used, cup, cdn, **kw)

    def site_indices(self) -> np.ndarray:
        return np.arange(self.n_sites) - self.n_sites // 2


@dataclass(frozen=True)
class ShellDistribution:
    """Annular initial placement: sites with inner <= |j| <= outer are
    occupied with probability `filling`."""

    inner_radius: int
    outer_radius: int
    filling: float
    rng_seed: int = 0

    def __post_init__(self):
        if not (0 <= self.inner_radius < self.outer_radius):
            raise InvalidConfigError("need 0 <= inner < outer")
        if not 0.0 <= self.filling <= 1.0:
            raise InvalidConfigError("filling must lie in [0, 1]")


def vacuum_state(n_sites: int) -> np.ndarray:
    rho = np.zeros((n_sites, 3, 3), dtype=complex)
    rho[:, VAC, VAC] = 1.0
    return rho


def shell_init(dist: ShellDistribution, cfg: TubeConfig,
               seed: int | None = None) -> np.ndarray:
    """Random shell configuration with seeded particle/hole coherence.

    Occupied sites get rho[sigma,sigma] = 1 and |rho[sigma,vac]| = 1/2 with
    phase zero, the mean-field tunneling seed.  The seeded coherence is not a
    physical single-site state (a definite occupancy admits none), so the
    positivity check is waived at t = 0 by construction.
    """
    if dist.outer_radius > cfg.n_sites // 2:
        raise InvalidConfigError("shell does not fit inside the tube")
    rng = np.random.Generator(np.random.Philox(
        key=dist.rng_seed if seed is None else seed))
    rho = vacuum_state(cfg.n_sites)
    js = cfg.site_indices()
    in_shell = (np.abs(js) >= dist.inner_radius) & (np.abs(js) <= dist.outer_radius)
    occupied = in_shell & (rng.random(cfg.n_sites) < dist.filling)
    spins = np.where(rng.random(cfg.n_sites) < 0.5, UP, DOWN)
    c = cfg.initial_coherence * np.exp(1j * cfg.coherence_phase)
    for i in np.nonzero(occupied)[0]:
        s = spins[i]
        rho[i] = 0.0
        rho[i, s, s] = 1.0
        rho[i, s, VAC] = c
        rho[i, VAC, s] = np.conj(c)
    return rho


def mf_rhs(rho: np.ndarray, cfg: TubeConfig) -> np.ndarray:
    """Time derivative of the per-site density matrices.

    State layout ([batch,] n_sites, 3, 3); batch axes are carried through.
    """
    return _rhs_site_first(np.asarray(rho, dtype=complex), cfg)


def _nbsite(x: np.ndarray) -> np.ndarray:
    """Nearest-neighbor sum over the trailing site axis."""
    out = np.zeros_like(x)
    out[..., :-1] += x[..., 1:]
    out[..., 1:] += x[..., :-1]
    return out


@dataclass(frozen=True)
class MFResult:
    curve: LossCurve
    states: np.ndarray           # (n_times, [batch,] n_sites, 3, 3)


def n_down(rho: np.ndarray) -> float | np.ndarray:
    return np.real(rho[..., DOWN, DOWN]).sum(axis=-1)


def n_total(rho: np.ndarray) -> float | np.ndarray:
    return np.real(rho[..., UP, UP] + rho[..., DOWN, DOWN]).sum(axis=-1)


def mf_evolve(init: np.ndarray, cfg: TubeConfig, t_grid,
              rtol: float = 1e-9, atol: float = 1e-12) -> MFResult:
    """Integrate the mean-field equations with an adaptive high-order
    explicit method (DOP853), recording states on t_grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    shape = init.shape
    init = init.astype(complex)
    if cfg.dephase:
        init = init.copy()
        init[..., UP, DOWN] = 0.0
        init[..., DOWN, UP] = 0.0
    # the rhs moves site axis last internally; reorder here once
    def rhs(_t, y):
        rho = y.reshape(shape)
        return _rhs_site_first(rho, cfg).reshape(-1)

    sol = solve_ivp(rhs, (0.0, float(t_grid[-1])), init.reshape(-1),
                    t_eval=t_grid, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"mean-field integration failed: {sol.message}")
    states = sol.y.T.reshape((len(t_grid),) + shape)
    nd = np.real(states[..., DOWN, DOWN]).sum(axis=-1)
    curve = LossCurve(t_grid, nd if nd.ndim == 1 else nd.mean(axis=-1),
                      source="MF")
    return MFResult(curve, states)


def _rhs_site_first(rho: np.ndarray, cfg: TubeConfig) -> np.ndarray:
    """mf_rhs for state layout ([batch,] n_sites, 3, 3)."""
    moved = np.moveaxis(rho, -3, -1)      # components (..., 3, 3, n_sites)
    out = _rhs_components(moved, cfg)
    return np.moveaxis(out, -1, -3)


def _rhs_components(r: np.ndarray, cfg: TubeConfig) -> np.ndarray:
    J, g = cfg.J, cfg.gamma_eff_used
    j2 = cfg.site_indices().astype(float) ** 2
    om = {UP: cfg.omega_up, DOWN: cfg.omega_down}
    if cfg.dephase:
        r = r.copy()
        r[..., UP, DOWN, :] = 0.0
        r[..., DOWN, UP, :] = 0.0
    out = np.zeros_like(r)
    dens = {s: r[..., s, s, :] for s in (UP, DOWN)}
    nbd = {s: _nbsite(dens[s]) for s in (UP, DOWN)}
    for s, sp in ((UP, DOWN), (DOWN, UP)):
        out[..., s, s, :] = (
            1j * J * (_nbsite(r[..., s, VAC, :]) * r[..., VAC, s, :]
                      - _nbsite(r[..., VAC, s, :]) * r[..., s, VAC, :])
            + 2.0 * g * (_nbsite(r[..., sp, s, :]) * r[..., s, sp, :]
                         + _nbsite(r[..., s, sp, :]) * r[..., sp, s, :])
            - 4.0 * g * nbd[sp] * dens[s])
    if not cfg.dephase:
        s, sp = UP, DOWN
        tot = dens[UP] + dens[DOWN]
        nbtot = nbd[UP] + nbd[DOWN]
        dcoh = (1j * (om[s] - om[sp]) * j2 * r[..., s, sp, :]
                + 1j * J * (_nbsite(r[..., s, VAC, :]) * r[..., VAC, sp, :]
                            - _nbsite(r[..., VAC, sp, :]) * r[..., s, VAC, :])
                + 2.0 * g * (_nbsite(r[..., s, sp, :]) * tot
                             - nbtot * r[..., s, sp, :]))
        out[..., UP, DOWN, :] = dcoh
        out[..., DOWN, UP, :] = np.conj(dcoh)
    for s, sp in ((UP, DOWN), (DOWN, UP)):
        dvs = (1j * om[s] * j2 * r[..., VAC, s, :]
               + 1j * J * (_nbsite(r[..., VAC, UP, :]) * r[..., UP, s, :]
                           + _nbsite(r[..., VAC, DOWN, :]) * r[..., DOWN, s, :]
                           - _nbsite(r[..., VAC, s, :]) * r[..., VAC, VAC, :])
               + 2.0 * g * (_nbsite(r[..., sp, s, :]) * r[..., VAC, sp, :]
                            - nbd[sp] * r[..., VAC, s, :]))
        out[..., VAC, s, :] = dvs
        out[..., s, VAC, :] = np.conj(dvs)
    hopv = np.zeros_like(out[..., VAC, VAC, :])
    for a in (UP, DOWN):
        hopv += 1j * J * (_nbsite(r[..., VAC, a, :]) * r[..., a, VAC, :]
                          - _nbsite(r[..., a, VAC, :]) * r[..., VAC, a, :])
    out[..., VAC, VAC, :] = hopv + 4.0 * g * (
        nbd[UP] * dens[DOWN] + nbd[DOWN] * dens[UP]
        - _nbsite(r[..., UP, DOWN, :]) * r[..., DOWN, UP, :]
        - _nbsite(r[..., DOWN, UP, :]) * r[..., UP, DOWN, :])
    return out


def ensemble_average(dist: ShellDistribution, cfg: TubeConfig, t_grid,
                     seeds, rtol: float = 1e-9) -> tuple[LossCurve, MFResult]:
    """Mean and standard error of N_down(t) over random shell configurations.

    All seeds are integrated as one batched system so the ensemble shares one
    adaptive time base; the reduction order is fixed by the seed list.
    """
    seeds = list(seeds)
    if len(seeds) < 2:
        raise InvalidConfigError("ensemble needs >= 2 seeds")
    init = np.stack([shell_init(dist, cfg, seed=s) for s in seeds])
    res = mf_evolve(init, cfg, t_grid, rtol=rtol)
    nd = np.real(res.states[..., DOWN, DOWN]).sum(axis=-1)   # (t, seeds)
    mean = nd.mean(axis=1)
    stderr = nd.std(axis=1, ddof=1) / math.sqrt(len(seeds))
    curve = LossCurve(np.asarray(t_grid, float), mean, source="MF",
                      stderr=stderr)
    return curve, res


def check_site_matrices(rho: np.ndarray, require_psd: bool = True) -> None:
    """Raise if any site matrix violates Hermiticity, unit trace, or
    positivity (tolerance 1e-8).  Seeded initial states are exempt from the
    positivity requirement by construction; pass require_psd=False for them."""
    flat = rho.reshape(-1, 3, 3)
    herm = np.abs(flat - np.conj(np.swapaxes(flat, -1, -2))).max()
    if herm > 1e-10:
        raise ValueError(f"site matrix not Hermitian (dev {herm:.1e})")
    tr = np.abs(np.einsum("...ii", flat) - 1.0).max()
    if tr > TRACE_TOL:
        raise ValueError(f"site trace deviates by {tr:.1e}")
    if require_psd:
        evs = np.linalg.eigvalsh(flat)
        if evs.min() < -PSD_TOL:
            raise ValueError(f"site matrix has eigenvalue {evs.min():.1e}")


@dataclass(frozen=True)
class FillingFit:
    filling: float
    filling_range: float
    variants: dict


def fit_filling(points, shell: ShellDistribution, seeds, t_grids=None,
                f_bounds=(0.005, 0.3), width_delta: int = 10,
                rtol: float = 1e-7, n_grid: int = 7) -> FillingFit:
    """Filling fraction that best reproduces target loss rates.

    `points` is a sequence of (TubeConfig, kappa_target) pairs; each tube
    config already carries the lattice point's J and multiband effective rate.
    With common random seeds kappa(f) is a deterministic staircase (each
    shell site switches on as f crosses its uniform draw), so blind scalar
    minimization can lodge on a step.  Instead kappa(f) is sampled on a
    filling grid, modeled linearly per scan point, and the squared-residual
    minimum taken in closed form, with one narrowed refinement pass.  The fit
    is repeated with the shell outer radius varied by +-width_delta sites to
    report the sensitivity range.
    """
    points = list(points)
    if len(points) < 2:
        raise InvalidConfigError("fit_filling needs >= 2 scan points")

    def kappa_of(f: float, sh: ShellDistribution, idx: int) -> float:
        tube, target = points[idx]
        d = replace(sh, filling=f)
        if t_grids is not None:
            tg = t_grids[idx]
        else:
            tg = np.linspace(0.0, 0.6 / max(target, 1e-12), 40)
        curve, _ = ensemble_average(d, tube, tg, seeds, rtol=rtol)
        return fit_kappa(curve).kappa

    targets = np.array([k for _, k in points])

    def regress(sh: ShellDistribution, lo: float, hi: float) -> float:
        fs = np.linspace(lo, hi, n_grid)
        kaps = np.array([[kappa_of(f, sh, i) for i in range(len(points))]
                         for f in fs])
        design = np.vstack([np.ones(n_grid), fs]).T
        coef, *_ = np.linalg.lstsq(design, kaps, rcond=None)
        a, b = coef[0], coef[1]
        # argmin_f sum_i (a_i + b_i f - kappa*_i)^2
        f_star = float(np.dot(b, targets - a) / np.dot(b, b))
        return min(max(f_star, f_bounds[0]), f_bounds[1])

    def best(sh: ShellDistribution) -> float:
        f1 = regress(sh, f_bounds[0], f_bounds[1])
        w = (f_bounds[1] - f_bounds[0]) / (n_grid - 1)
        lo = max(f_bounds[0], f1 - w)
        hi = min(f_bounds[1], f1 + w)
        return regress(sh, lo, hi)

    f0 = best(shell)
    variants = {"base": f0}
    for delta in (-width_delta, width_delta):
        outer = shell.outer_radius + delta
        if outer <= shell.inner_radius:
            continue
        variants[f"outer{delta:+d}"] = best(replace(shell, outer_radius=outer))
    spread = max(abs(v - f0) for v in variants.values())
    return FillingFit(f0, spread, variants)
