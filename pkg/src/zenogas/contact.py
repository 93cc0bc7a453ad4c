"""Multiband two-body solver for a purely imaginary (reactive) contact
interaction in a single lattice well and in a double well along the shallow
axis.

The two-particle problem is expanded in products of per-axis Wannier orbitals.
The contact interaction contributes -i hbar beta_3d delta(r)/2; on a finite
smooth basis the regularizing operator of the pseudopotential acts as the
identity, so plain four-orbital overlap integrals enter the anti-Hermitian
part.  Loss rates are read off the decay of <psi|psi>, fitted to
exp(-4 Gamma_eff_mb t) for the double well per the renormalized single-band
prescription.

The double-well generator is applied as a structured tensor operator
(well-band pair factor times two transverse even-parity pair factors), which
keeps six bands per axis tractable; slow decays are fitted on the exact
spectral extrapolation of the propagated state (see krylov.RitzExtrapolation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import gamma as _gamma_fn

from . import bands
from .krylov import RitzExtrapolation, expv_norms
from .units import LatticeConfig, InvalidConfigError

SINGLE_WELL_CONVERGENCE_TOL = 0.05
FIT_RESIDUAL_TOL = 1e-2
MODEL_ERROR_TOL = 5e-3


class GridMismatchError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    pass


class FitResidualError(RuntimeError):
    pass


@dataclass(frozen=True)
class NormDecayFit:
    times: np.ndarray
    norms: np.ndarray            # <psi|psi> samples on the fit window
    fitted_rate: float           # decay rate of <psi|psi> in s^-1 (or 1/time unit)
    fit_residual: float          # relative rms of the exponential fit

    def __post_init__(self):
        if self.fitted_rate < -1e-12:
            raise ValueError("fitted_rate must be non-negative")


def contact_matrix_elements(orbitals) -> np.ndarray:
    """Four-orbital overlap tensor int W_a W_b W_c W_d dx for one axis.

    All orbitals must share one grid; the tensor is fully symmetric and in
    units of inverse length (the grid unit).
    """
    grids = [np.asarray(o.grid) for o in orbitals]
    for g in grids[1:]:
        if g.shape != grids[0].shape or not np.allclose(g, grids[0]):
            raise GridMismatchError("orbitals must share a common grid")
    amps = np.array([np.asarray(o.amplitudes) for o in orbitals])
    return _quartic_tensor(grids[0], amps)


def _quartic_tensor(grid: np.ndarray, amps: np.ndarray) -> np.ndarray:
    dx = grid[1] - grid[0]
    wts = np.full(len(grid), dx)
    wts[0] *= 0.5
    wts[-1] *= 0.5
    pair = np.einsum("ag,bg->abg", amps, amps)
    flat = pair.reshape(-1, len(grid))
    tensor = (flat * wts) @ flat.T
    n = amps.shape[0]
    return tensor.reshape(n, n, n, n)


def even_band_pairs(n_bands: int):
    """Ordered band pairs (m, n) whose parity sum is even (the reachable sector)."""
    return [(m, n) for m in range(n_bands) for n in range(n_bands)
            if (m + n) % 2 == 0]


def _wannier_set_relaxed(depth: float, n_bands: int, cfg: LatticeConfig,
                         tail_tol: float = 5e-3, spans=(10, 14, 18, 24, 30)):
    """All orbitals of the lowest n_bands on one grid, widening the span until
    every band's leakage estimate is acceptable (above-barrier bands localize
    weakly)."""
    last = None
    for span in spans:
        try:
            return [bands.wannier(depth, b, grid_span=span, cfg=cfg,
                                  tail_tol=tail_tol) for b in range(n_bands)]
        except bands.GridTooSmallError as err:
            last = err
    raise last


def _axis_pair_blocks(depth: float, n_bands: int, cfg: LatticeConfig):
    """Even-sector pair interaction matrix (1/m) and pair energies (angular s^-1)."""
    table = bands.hopping_table(depth, n_bands, cfg=cfg)
    orbs = _wannier_set_relaxed(depth, n_bands, cfg)
    j4 = contact_matrix_elements(orbs)
    pairs = even_band_pairs(n_bands)
    np_ = len(pairs)
    D = np.empty((np_, np_))
    for i, (a, b) in enumerate(pairs):
        for j, (c, d) in enumerate(pairs):
            D[i, j] = j4[a, b, c, d]
    centers = table.band_centers * cfg.recoil_energy_w
    e_pair = np.array([centers[a] + centers[b] for (a, b) in pairs])
    return D, e_pair, pairs


@dataclass
class SingleWellProblem:
    """Two particles in one site of an isotropic lattice of a given depth."""

    depth: float
    n_bands: int
    cfg: LatticeConfig = field(default_factory=lambda: LatticeConfig(5.0, 25.0))

    def __post_init__(self):
        self.D, self.e_pair, self.pairs = _axis_pair_blocks(
            self.depth, self.n_bands, self.cfg)
        self.omega = 2.0 * math.sqrt(self.depth) * self.cfg.recoil_energy_w
        self.a_ho = (self.cfg.spacing_a / math.pi) * self.depth**-0.25
        self.npair = len(self.pairs)
        e3 = (self.e_pair[:, None, None] + self.e_pair[None, :, None]
              + self.e_pair[None, None, :])
        self._e3 = e3 - e3.mean()
        self._i0 = self.pairs.index((0, 0))

    def ground_state(self) -> np.ndarray:
        psi = np.zeros((self.npair,) * 3, dtype=complex)
        psi[self._i0, self._i0, self._i0] = 1.0
        return psi.reshape(-1)

    def generator(self, a_s_over_aho: float):
        """A = -i H / hbar for the reactive coupling at |a_s| in oscillator units."""
        beta = self.beta_from_alpha(a_s_over_aho)
        c = beta / 2.0
        D, e3, np_ = self.D, self._e3, self.npair

        def apply_a(vf):
            ps = vf.reshape(np_, np_, np_)
            out = -1j * (e3 * ps)
            t1 = np.tensordot(D, ps, axes=(1, 0))
            t1 = np.tensordot(D, t1, axes=(1, 1)).transpose(1, 0, 2)
            t1 = np.tensordot(D, t1, axes=(1, 2)).transpose(1, 2, 0)
            out -= c * t1
            return out.reshape(-1)

        return apply_a

    def beta_from_alpha(self, alpha: float) -> float:
        """Loss coefficient for |a_s| = alpha a_ho via hbar beta = 4 pi hbar^2 a_s / m."""
        return 4.0 * math.pi * self.cfg.constants.hbar * (alpha * self.a_ho) \
            / self.cfg.constants.molecule_mass

    def first_order_rate(self, alpha: float) -> float:
        """Lowest-band rate beta int |W_3d|^4, in units of omega."""
        u = self.D[self._i0, self._i0]
        return self.beta_from_alpha(alpha) * u**3 / self.omega


def single_well_rate(depth: float, a_s_over_aho: float, n_bands: int,
                     cfg: LatticeConfig | None = None,
                     check_convergence: bool = True,
                     _problem_cache: dict | None = None) -> float:
    """Norm decay rate of the ground pair state in units of hbar*omega.

    The rate is the late-window slope of -ln<psi|psi>; with one band it is
    exactly beta int |W|^4.  If the rate moves by more than 5% from
    n_bands - 1 to n_bands the truncation has not converged and
    NonConvergenceError is raised.
    """
    cfg = cfg if cfg is not None else LatticeConfig(depth, depth)
    if a_s_over_aho < 0:
        raise InvalidConfigError("a_s magnitude must be non-negative")
    if a_s_over_aho == 0.0:
        return 0.0
    rate = _single_well_rate_once(depth, a_s_over_aho, n_bands, cfg, _problem_cache)
    if check_convergence and n_bands > 1:
        prev = _single_well_rate_once(depth, a_s_over_aho, n_bands - 1, cfg,
                                      _problem_cache)
        if abs(rate - prev) > SINGLE_WELL_CONVERGENCE_TOL * abs(rate):
            raise NonConvergenceError(
                f"single-well rate changed {abs(rate - prev) / abs(rate):.1%} "
                f"from {n_bands - 1} to {n_bands} bands")
    return rate


def _single_well_rate_once(depth, alpha, n_bands, cfg, cache=None) -> float:
    key = (depth, n_bands, cfg)
    if cache is not None and key in cache:
        prob = cache[key]
    else:
        prob = SingleWellProblem(depth, n_bands, cfg)
        if cache is not None:
            cache[key] = prob
    apply_a = prob.generator(alpha)
    psi0 = prob.ground_state()
    guess = prob.first_order_rate(alpha) * prob.omega
    t_end = 2.0 / guess
    for _ in range(10):
        ts = np.linspace(0.0, t_end, 200)[1:]
        norms, _ = expv_norms(apply_a, psi0, ts)
        n2 = norms**2
        if n2[-1] < 0.29:
            break
        t_end *= 2.5
    lo = int(np.searchsorted(-n2, -0.6))
    hi = int(np.searchsorted(-n2, -0.3))
    if hi - lo < 4:
        lo = max(0, hi - 8)
    slope = np.polyfit(ts[lo:hi], np.log(n2[lo:hi]), 1)[0]
    return -slope / prob.omega


@dataclass
class DoubleWellProblem:
    """Two molecules in two adjacent sites along y, full 3D multiband basis.

    The two wells are two sites of the infinite lattice: per-band on-site
    energies are band centers and per-band tunneling comes from the dispersion
    Fourier coefficient.  Transverse axes carry no hopping.  Only the
    even-parity transverse sector reachable from the ground pair is built.
    """

    cfg: LatticeConfig
    n_bands_y: int | None = None
    n_bands_perp: int | None = None

    def __post_init__(self):
        nb = self.cfg.n_bands_per_axis
        self.ny = self.n_bands_y if self.n_bands_y is not None else nb
        self.nt = self.n_bands_perp if self.n_bands_perp is not None else nb
        cfg = self.cfg
        table = bands.hopping_table(cfg.depth_y, self.ny, cfg=cfg)
        centers_y = table.band_centers * cfg.recoil_energy_w
        hop = -table.tunneling        # NN matrix element t_n = -J_n
        M = 2 * self.ny
        h1 = np.zeros((M, M))
        for m in range(self.ny):
            h1[m, m] = h1[self.ny + m, self.ny + m] = centers_y[m]
            h1[m, self.ny + m] = h1[self.ny + m, m] = hop[m]
        # y orbitals of both wells on one grid
        base = _wannier_set_relaxed(cfg.depth_y, self.ny, cfg,
                                    spans=(16, 20, 26, 32))
        grid = base[0].grid
        a = cfg.spacing_a
        amps = np.empty((M, len(grid)))
        for m in range(self.ny):
            amps[m] = base[m].amplitudes
            amps[self.ny + m] = np.interp(grid - a, grid, base[m].amplitudes,
                                          left=0.0, right=0.0)
        j4y = _quartic_tensor(grid, amps)
        self.Dy = j4y.reshape(M * M, M * M)
        Dt, e_t, pairs_t = _axis_pair_blocks(cfg.depth_perp, self.nt, cfg)
        self.Dt, self.e_t, self.pairs_t = Dt, e_t, pairs_t
        eye = np.eye(M)
        self.Hwy = np.kron(h1, eye) + np.kron(eye, h1)
        self.M = M
        self.npt = len(pairs_t)
        diag = (np.diag(self.Hwy)[:, None, None] + e_t[None, :, None]
                + e_t[None, None, :])
        self._shift = 0.5 * (diag.max() + diag.min())
        self.gamma0 = bands.onsite_loss_rate(cfg)

    @property
    def dim(self) -> int:
        return self.M * self.M * self.npt * self.npt

    def generator(self):
        c = self.cfg.beta_3d / 2.0
        Hwy = self.Hwy - self._shift * np.eye(self.M * self.M)
        Dy, Dt, e_t = self.Dy, self.Dt, self.e_t
        m2, npt = self.M * self.M, self.npt

        def apply_a(vf):
            ps = vf.reshape(m2, npt, npt)
            herm = np.tensordot(Hwy, ps, axes=(1, 0))
            herm += ps * e_t[None, :, None]
            herm += ps * e_t[None, None, :]
            t1 = np.tensordot(Dy, ps, axes=(1, 0))
            t1 = np.tensordot(Dt, t1, axes=(1, 1)).transpose(1, 0, 2)
            t1 = np.tensordot(Dt, t1, axes=(1, 2)).transpose(1, 2, 0)
            return (-1j * herm - c * t1).reshape(-1)

        return apply_a

    def initial_state(self, symmetric: bool = True) -> np.ndarray:
        """Spatially symmetric (spin-singlet) pair, one molecule per well,
        lowest band; symmetric=False builds the spatially antisymmetric
        (spin-triplet) combination instead."""
        psi = np.zeros((self.M * self.M, self.npt, self.npt), dtype=complex)
        iL, iR = 0, self.ny
        it = self.pairs_t.index((0, 0))
        s = 1.0 if symmetric else -1.0
        psi[iL * self.M + iR, it, it] = 1.0 / math.sqrt(2.0)
        psi[iR * self.M + iL, it, it] = s / math.sqrt(2.0)
        return psi.reshape(-1)

    def dense_hamiltonian(self, max_dim: int = 5000) -> np.ndarray:
        """Explicit complex-symmetric H/hbar (angular s^-1), for small bases."""
        if self.dim > max_dim:
            raise MemoryError(f"dense Hamiltonian of dim {self.dim} over budget")
        apply_a = self.generator()
        n = self.dim
        A = np.empty((n, n), dtype=complex)
        e = np.zeros(n, dtype=complex)
        for i in range(n):
            e[i] = 1.0
            A[:, i] = apply_a(e)
            e[i] = 0.0
        return 1j * A + self._shift * np.eye(n)


@dataclass(frozen=True)
class DoubleWellRate:
    gamma_eff_mb: float          # renormalized effective rate, angular s^-1
    gamma0: float                # bare on-site rate used for the window start
    fit: NormDecayFit
    model_error: float
    slow_eigenvalue: complex     # generator eigenvalue (s^-1), Im(lambda)/hbar view

    @property
    def norm_rate(self) -> float:
        """Decay rate of <psi|psi>, equal to 4 Gamma_eff_mb."""
        return 4.0 * self.gamma_eff_mb


def effective_loss_rate_dw(cfg: LatticeConfig, n_bands_y: int | None = None,
                           n_bands_perp: int | None = None,
                           method: str = "auto",
                           n_model_steps: int = 24) -> DoubleWellRate:
    """Renormalized effective loss rate from the double-well norm decay.

    The spin-singlet ground pair is evolved under the reactive Hamiltonian and
    <psi|psi> is fitted to exp(-4 Gamma t) on the window from 3/Gamma0 until
    the norm has halved, skipping the transient decay of admixed
    doubly occupied components.
    """
    if cfg.beta_3d <= 0.0:
        raise InvalidConfigError("double-well rate needs beta_3d > 0")
    prob = DoubleWellProblem(cfg, n_bands_y, n_bands_perp)
    apply_a = prob.generator()
    psi0 = prob.initial_state()
    t0 = 3.0 / prob.gamma0
    if method not in ("auto", "ritz", "direct"):
        raise ValueError(f"unknown method {method!r}")
    if method == "direct":
        return _dw_rate_direct(prob, apply_a, psi0, t0)
    model = RitzExtrapolation(apply_a, psi0, t0, n_steps=n_model_steps)
    if model.model_error > MODEL_ERROR_TOL:
        model = RitzExtrapolation(apply_a, psi0, t0, n_steps=max(40, n_model_steps))
        if model.model_error > MODEL_ERROR_TOL:
            raise NonConvergenceError(
                f"spectral model error {model.model_error:.1e} exceeds "
                f"{MODEL_ERROR_TOL}")
    target = math.sqrt(0.5)
    t_hi = 2.0 * t0
    while model.norm_at(t_hi) > target and t_hi < 1e9 * t0:
        t_hi *= 2.0
    t_half = brentq(lambda t: model.norm_at(t) - target, t0, t_hi,
                    xtol=1e-8 * t_hi)
    times = np.linspace(t0, t_half, 200)
    n2 = np.array([model.norm_at(t) for t in times]) ** 2
    return _finish_fit(times, n2, prob, model.model_error,
                       model.slowest_eigenvalue())


def _dw_rate_direct(prob, apply_a, psi0, t0) -> DoubleWellRate:
    """Plain propagation through the whole fit window (validation path)."""
    guess = 8.0 * 576.0**2 / prob.gamma0
    t_end = max(4.0 * t0, 2.0 * math.log(2.0) / guess)
    v = psi0
    for _ in range(14):
        times = np.linspace(t0, t_end, 120)
        norms, _ = expv_norms(apply_a, psi0, times)
        if norms[-1] ** 2 <= 0.5:
            break
        sl = (math.log(norms[-1]) - math.log(norms[-20])) / (times[-1] - times[-20])
        t_end = times[-1] + 1.2 * (math.log(math.sqrt(0.5)) - math.log(norms[-1])) / sl
    n2 = norms**2
    mask = n2 >= 0.5
    return _finish_fit(times[mask], n2[mask], prob, 0.0, None)


def _finish_fit(times, n2, prob, model_error, slow_eig) -> DoubleWellRate:
    slope, intercept = np.polyfit(times, np.log(n2), 1)
    fit_curve = np.exp(slope * times + intercept)
    resid = float(np.sqrt(np.mean(((n2 - fit_curve) / fit_curve) ** 2)))
    if resid > FIT_RESIDUAL_TOL:
        raise FitResidualError(
            f"norm decay is not exponential on the fit window (rms {resid:.1e})")
    rate = max(-slope, 0.0)
    fit = NormDecayFit(times, n2, rate, resid)
    if slow_eig is None:
        slow_eig = complex(-0.25 * rate, 0.0)
    return DoubleWellRate(rate / 4.0, prob.gamma0, fit, model_error, slow_eig)


def triplet_decay_rate(cfg: LatticeConfig, n_bands_y: int = 2,
                       n_bands_perp: int = 1) -> float:
    """Fitted norm rate of the spatially antisymmetric pair (dark state)."""
    prob = DoubleWellProblem(cfg, n_bands_y, n_bands_perp)
    apply_a = prob.generator()
    psi0 = prob.initial_state(symmetric=False)
    t0 = 3.0 / prob.gamma0
    times = np.linspace(t0, 50.0 * t0, 40)
    norms, _ = expv_norms(apply_a, psi0, times)
    slope = np.polyfit(times, np.log(norms**2), 1)[0]
    return abs(slope)


def band_convergence_scan(cfg: LatticeConfig, max_bands: int,
                          transverse_depths=None, memory_budget: int = 250_000):
    """Gamma_eff_mb families: y-band count at one transverse band, and
    transverse-band count at max_bands along y, per transverse depth.

    Returns a list of dict rows (v_perp, n_bands_y, n_bands_perp, rate).
    """
    if max_bands < 2:
        raise InvalidConfigError("max_bands must be >= 2")
    depths = (tuple(transverse_depths) if transverse_depths is not None
              else (cfg.depth_perp,))
    rows = []
    for vp in depths:
        c = LatticeConfig(cfg.depth_y, vp, cfg.spacing_a, cfg.beta_3d,
                          cfg.n_bands_per_axis, cfg.constants)
        for ny in range(1, max_bands + 1):
            _check_budget(ny, 1, memory_budget)
            r = effective_loss_rate_dw(c, n_bands_y=ny, n_bands_perp=1)
            rows.append({"v_perp": vp, "n_bands_y": ny, "n_bands_perp": 1,
                         "rate": r.gamma_eff_mb})
        for nt in range(2, max_bands + 1):
            _check_budget(max_bands, nt, memory_budget)
            r = effective_loss_rate_dw(c, n_bands_y=max_bands, n_bands_perp=nt)
            rows.append({"v_perp": vp, "n_bands_y": max_bands,
                         "n_bands_perp": nt, "rate": r.gamma_eff_mb})
    return rows


def _check_budget(ny, nt, budget):
    dim = (2 * ny) ** 2 * len(even_band_pairs(nt)) ** 2
    if dim > budget:
        raise MemoryError(
            f"two-body basis of dimension {dim} exceeds budget {budget}; "
            f"reduce bands (ny={ny}, nt={nt})")


def busch_relative_energy(a_over_aho):
    """Relative-motion energy (hbar omega units) of two harmonically trapped
    particles with contact interactions, on the branch connected to 3/2.

    Solves sqrt(2) Gamma(-nu)/Gamma(-nu - 1/2) = a_ho/a_s with
    E = 2 nu + 3/2, a_ho the single-particle oscillator length.
    """
    a = complex(a_over_aho)
    if a == 0:
        return 1.5

    def f(E):
        nu = (E - 1.5) / 2.0
        return math.sqrt(2.0) * _gamma_fn(-nu) / _gamma_fn(-nu - 0.5) - 1.0 / a

    if abs(a.imag) < 1e-300 and a.real > 0:
        return brentq(lambda E: f(E).real, 1.5 + 1e-12, 3.5 - 1e-9, xtol=1e-13)
    if abs(a.imag) < 1e-300 and a.real < 0:
        return brentq(lambda E: f(E).real, 0.5 + 1e-9, 1.5 - 1e-12, xtol=1e-13)
    # complex scattering length: Newton from the perturbative shift
    E = 1.5 + math.sqrt(2.0 / math.pi) * a
    for _ in range(60):
        h = 1e-7
        df = (f(E + h) - f(E - h)) / (2.0 * h)
        step = f(E) / df
        E = E - step
        if abs(step) < 1e-12:
            break
    return E


@dataclass(frozen=True)
class BuschComparison:
    solver_shift: complex        # (lowest eigenvalue - noninteracting), hbar omega
    analytic_shift: complex      # Busch E_rel - 3/2, hbar omega
    discrepancy: float           # relative magnitude of the difference


def validate_against_busch(depth: float, a_s_over_aho, n_bands: int = 6,
                           cfg: LatticeConfig | None = None) -> BuschComparison:
    """Compare the Wannier-basis two-body ground eigenvalue against the
    analytic harmonic-trap solution at the same (complex) scattering length.

    The well should be deep (>= 30 E_R) for the harmonic reference to be
    meaningful; the returned discrepancy quantifies both the residual
    anharmonicity and the finite-basis treatment of the contact interaction.
    """
    cfg = cfg if cfg is not None else LatticeConfig(depth, depth)
    prob = SingleWellProblem(depth, n_bands, cfg)
    a = complex(a_s_over_aho)
    if a == 0:
        return BuschComparison(0.0, 0.0, 0.0)
    g_w = 4.0 * math.pi * (cfg.constants.hbar / cfg.constants.molecule_mass) \
        * (a * prob.a_ho)
    e3 = (prob.e_pair[:, None, None] + prob.e_pair[None, :, None]
          + prob.e_pair[None, None, :]).reshape(-1)
    if abs(a.imag) < 1e-300:
        lam = _lowest_real_eigenvalue(prob, e3, g_w.real)
    else:
        lam = _ground_complex_eigenvalue(prob, e3, g_w)
    shift = (lam - e3.min()) / prob.omega
    ana = busch_relative_energy(a) - 1.5
    disc = abs(shift - ana) / abs(ana)
    return BuschComparison(shift, ana, disc)


def _lowest_real_eigenvalue(prob, e3, g_w):
    from scipy.sparse.linalg import LinearOperator, eigsh
    np_ = prob.npair
    D = prob.D
    shift = e3.mean()

    def mv(vf):
        ps = vf.reshape(np_, np_, np_)
        out = (e3.reshape(np_, np_, np_) - shift) * ps
        t1 = np.tensordot(D, ps, axes=(1, 0))
        t1 = np.tensordot(D, t1, axes=(1, 1)).transpose(1, 0, 2)
        t1 = np.tensordot(D, t1, axes=(1, 2)).transpose(1, 2, 0)
        return (out + g_w * t1).reshape(-1)

    op = LinearOperator((np_**3, np_**3), matvec=mv, dtype=float)
    w = eigsh(op, k=1, which="SA", return_eigenvectors=False, maxiter=5000)
    return float(w[0]) + shift


def _ground_complex_eigenvalue(prob, e3, g_w):
    if prob.npair**3 > 1500:
        raise MemoryError("complex scattering length supported for <= 4 bands")
    np_ = prob.npair
    K = np.einsum("ij,kl,mn->ikmjln", prob.D, prob.D, prob.D) \
        .reshape(np_**3, np_**3)
    H = np.diag(e3.astype(complex)) + g_w * K
    w = np.linalg.eigvals(H)
    return w[np.argmin(w.real)]
