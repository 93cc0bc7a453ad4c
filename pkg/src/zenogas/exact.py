"""Numerically exact benchmarks on small chains: direct Liouville integration
and quantum-trajectory Monte Carlo for the projected loss master equation.

Sites carry three states {up, down, vacuum}; the basis is the full 3^L
configuration space (at most one molecule per site by construction).  The
hardcore fermions are represented as hardcore spin-1/2 bosons, which is exact
for nearest-neighbor hopping and adjacent-pair jumps in 1D;
representation_check validates this against an explicitly antisymmetrized
fermionic construction with Jordan-Wigner sign bookkeeping.

Jump operators remove nearest-neighbor spin-singlet pairs:
A_j = sqrt(2 Gamma) [ (c_{j,up} c_{j+1,dn} + c_{j,up} c_{j-1,dn})
                      - (c_{j,dn} c_{j+1,up} + c_{j,dn} c_{j-1,up}) ],
with one-sided terms at the open edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .kinetics import LossCurve
from .krylov import expv_sequence
from .meanfield import TubeConfig
from .units import InvalidConfigError

EMPTY, SPIN_UP, SPIN_DOWN = 0, 1, 2
DEFAULT_SIZE_CAP = 12
LIOUVILLE_CAP = 7
DENSE_SECTOR_CAP = 2200


class SizeCapError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectedFockBasis:
    """All 3^L configurations of {vacuum, up, down} per site."""

    n_sites: int

    @property
    def dim(self) -> int:
        return 3**self.n_sites

    def occupations(self) -> np.ndarray:
        """Array [state, site] with values EMPTY/SPIN_UP/SPIN_DOWN."""
        states = np.arange(self.dim)
        occ = np.empty((self.dim, self.n_sites), dtype=np.int8)
        for j in range(self.n_sites):
            occ[:, j] = (states // 3**j) % 3
        return occ

    def index_of(self, config) -> int:
        return int(sum(int(c) * 3**j for j, c in enumerate(config)))

    def config_of(self, index: int):
        return tuple((index // 3**j) % 3 for j in range(self.n_sites))


def _check_cap(n_sites: int, cap: int):
    if n_sites > cap:
        raise SizeCapError(f"{n_sites} sites exceeds the cap of {cap}")


def number_operators(basis: ProjectedFockBasis):
    occ = basis.occupations()
    return ((occ == SPIN_UP).sum(axis=1).astype(float),
            (occ == SPIN_DOWN).sum(axis=1).astype(float))


def build_hamiltonian(cfg: TubeConfig, basis: ProjectedFockBasis,
                      size_cap: int = DEFAULT_SIZE_CAP) -> sp.csr_matrix:
    """Nearest-neighbor hopping plus the site-diagonal trap, H/hbar in s^-1."""
    _check_cap(basis.n_sites, size_cap)
    L = basis.n_sites
    if cfg.n_sites != L:
        raise InvalidConfigError("basis and tube config disagree on n_sites")
    occ = basis.occupations()
    js = cfg.site_indices()
    dim = basis.dim
    states = np.arange(dim)
    diag = np.zeros(dim)
    for j in range(L):
        diag += cfg.omega_up * js[j] ** 2 * (occ[:, j] == SPIN_UP)
        diag += cfg.omega_down * js[j] ** 2 * (occ[:, j] == SPIN_DOWN)
    rows, cols, vals = [list(states)], [list(states)], [list(diag)]
    for j in range(L - 1):
        p3j, p3j1 = 3**j, 3 ** (j + 1)
        for s in (SPIN_UP, SPIN_DOWN):
            src = np.nonzero((occ[:, j] == s) & (occ[:, j + 1] == EMPTY))[0]
            dst = src - s * p3j + s * p3j1
            rows.append(list(dst))
            cols.append(list(src))
            vals.append([-cfg.J] * len(src))
            rows.append(list(src))
            cols.append(list(dst))
            vals.append([-cfg.J] * len(src))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))


def build_jumps(cfg: TubeConfig, basis: ProjectedFockBasis,
                size_cap: int = DEFAULT_SIZE_CAP) -> list[sp.csr_matrix]:
    """One jump operator per site, both-neighbor singlet terms, open edges.

    The hardcore-boson amplitudes carry the fermionic channel signs: under
    canonical (site-major) ordering the right-neighbor pair annihilator picks
    up a minus sign relative to the left-neighbor one.  The hardcore
    projection makes these signs configuration independent, which is why the
    spin representation stays exact (see representation_check).
    """
    _check_cap(basis.n_sites, size_cap)
    L = basis.n_sites
    occ = basis.occupations()
    amp = math.sqrt(2.0 * cfg.gamma_eff_used)
    ops = []
    for j in range(L):
        rows, cols, vals = [], [], []
        for ell, channel in (((j - 1), +1.0), ((j + 1), -1.0)):
            if not 0 <= ell < L:
                continue
            for (s_j, s_l, sgn) in ((SPIN_UP, SPIN_DOWN, +1.0),
                                    (SPIN_DOWN, SPIN_UP, -1.0)):
                src = np.nonzero((occ[:, j] == s_j) & (occ[:, ell] == s_l))[0]
                dst = src - s_j * 3**j - s_l * 3**ell
                rows.extend(dst)
                cols.extend(src)
                vals.extend([channel * sgn * amp] * len(src))
        ops.append(sp.csr_matrix((vals, (rows, cols)),
                                 shape=(basis.dim, basis.dim)))
    return ops


def fock_state(basis: ProjectedFockBasis, config) -> np.ndarray:
    psi = np.zeros(basis.dim, dtype=complex)
    psi[basis.index_of(config)] = 1.0
    return psi


def liouville_evolve(rho0: np.ndarray, cfg: TubeConfig, t_grid,
                     basis: ProjectedFockBasis | None = None,
                     rtol: float = 1e-9, atol: float = 1e-12):
    """Integrate the full Lindblad equation; L <= 7 (density-matrix memory).

    Returns (LossCurve, rho_history).  The update is symmetrized so the
    density operator stays exactly Hermitian.
    """
    if basis is None:
        basis = ProjectedFockBasis(cfg.n_sites)
    _check_cap(basis.n_sites, LIOUVILLE_CAP)
    H = build_hamiltonian(cfg, basis)
    jumps = build_jumps(cfg, basis)
    jdag = [A.conj().T.tocsr() for A in jumps]
    jsq = sum((Ad @ A for Ad, A in zip(jdag, jumps)),
              sp.csr_matrix((basis.dim, basis.dim)))
    dim = basis.dim

    def rhs(_t, y):
        rho = y.reshape(dim, dim)
        drho = -1j * (H @ rho - rho @ H)
        drho -= 0.5 * (jsq @ rho + rho @ jsq)
        for A, Ad in zip(jumps, jdag):
            drho += A @ (rho @ Ad)
        drho = 0.5 * (drho + drho.conj().T)
        return drho.reshape(-1)

    t_grid = np.asarray(t_grid, dtype=float)
    sol = solve_ivp(rhs, (0.0, float(t_grid[-1])), rho0.astype(complex).reshape(-1),
                    t_eval=t_grid, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"Liouville integration failed: {sol.message}")
    rhos = sol.y.T.reshape(len(t_grid), dim, dim)
    _, ndown_diag = number_operators(basis)
    nd = np.real(np.einsum("tii,i->t", rhos, ndown_diag))
    return LossCurve(t_grid, nd, source="exact"), rhos


# ---------------------------------------------------------------------------
# sector-resolved trajectory machinery

@dataclass(frozen=True)
class _Sector:
    n_up: int
    n_down: int
    states: np.ndarray           # full-basis indices
    lookup: dict


def _sectors_reachable(basis: ProjectedFockBasis, n_up: int, n_down: int):
    occ = basis.occupations()
    ups = (occ == SPIN_UP).sum(axis=1)
    dns = (occ == SPIN_DOWN).sum(axis=1)
    secs = {}
    nu, nd = n_up, n_down
    while nu >= 0 and nd >= 0:
        mask = (ups == nu) & (dns == nd)
        states = np.nonzero(mask)[0]
        secs[(nu, nd)] = _Sector(nu, nd, states,
                                 {int(s): i for i, s in enumerate(states)})
        nu -= 1
        nd -= 1
    return secs


class _SectorPropagator:
    """exp(-i H_eff t) within one (N_up, N_down) sector.

    Dense eigendecomposition when the sector is small enough (reused across
    trajectories), Krylov stepping otherwise.  `prepare` factors the state
    once per coherent segment so every later evaluation costs one
    back-transform.
    """

    def __init__(self, h_eff: sp.csr_matrix, states: np.ndarray):
        self.h = h_eff[states][:, states].tocsr()
        self.dim = len(states)
        self.dense = self.dim <= DENSE_SECTOR_CAP
        if self.dense:
            hm = self.h.toarray()
            self.evals, self.V = np.linalg.eig(hm)
            self.Vinv = np.linalg.inv(self.V)
        else:
            self._apply = lambda v: -1j * (self.h @ v)

    def prepare(self, psi: np.ndarray) -> np.ndarray:
        return (self.Vinv @ psi) if self.dense else psi

    def state_at(self, prepared: np.ndarray, dt: float) -> np.ndarray:
        if self.dense:
            return self.V @ (np.exp(-1j * self.evals * dt) * prepared)
        if dt == 0.0:
            return prepared.copy()
        _, states = expv_sequence(self._apply, prepared, np.array([dt]))
        return states[0]

    def advance(self, psi: np.ndarray, dt: float) -> np.ndarray:
        return self.state_at(self.prepare(psi), dt)


def trajectory_evolve(init_config, cfg: TubeConfig, t_grid, n_traj: int,
                      seed: int = 0, size_cap: int = DEFAULT_SIZE_CAP,
                      bisect_tol: float = 1e-10):
    """Quantum-trajectory average of N_down(t) with exact waiting times.

    Between jumps the state evolves under H_eff = H - (i/2) sum A^dag A; jump
    times are resolved by bisection of the squared norm against a uniform
    deviate, the channel is drawn proportionally to ||A_j psi||^2, and each
    trajectory uses an independent counter-based random stream so any
    execution order reproduces the same ensemble.

    init_config is either one configuration tuple or a sequence of them
    (trajectory i then starts from init_config[i % len(init_config)]).
    """
    basis = ProjectedFockBasis(cfg.n_sites)
    _check_cap(cfg.n_sites, size_cap)
    if n_traj < 1:
        raise InvalidConfigError("n_traj must be >= 1")
    t_grid = np.asarray(t_grid, dtype=float)
    configs = init_config
    if isinstance(configs[0], (int, np.integer)):
        configs = [tuple(configs)]
    configs = [tuple(c) for c in configs]
    H = build_hamiltonian(cfg, basis)
    jumps = build_jumps(cfg, basis)
    jsq = sum((A.conj().T @ A for A in jumps),
              sp.csr_matrix((basis.dim, basis.dim)))
    h_eff = (H - 0.5j * jsq).tocsr()
    n_up0 = max(c.count(SPIN_UP) for c in configs)
    n_dn0 = max(c.count(SPIN_DOWN) for c in configs)
    sectors = _sectors_reachable(basis, n_up0, n_dn0)
    props: dict[tuple, _SectorPropagator] = {}
    sector_jumps: dict[tuple, list] = {}
    _, ndown_full = number_operators(basis)

    def get_prop(key):
        if key not in props:
            props[key] = _SectorPropagator(h_eff, sectors[key].states)
        return props[key]

    def get_jumps(key):
        if key not in sector_jumps:
            lo = sectors[(key[0] - 1, key[1] - 1)]
            hi = sectors[key]
            sector_jumps[key] = [A[lo.states][:, hi.states].tocsr()
                                 for A in jumps]
        return sector_jumps[key]

    nd_traj = np.empty((n_traj, len(t_grid)))
    for itraj in range(n_traj):
        rng = np.random.Generator(np.random.Philox(key=[seed, itraj]))
        config = configs[itraj % len(configs)]
        key = (config.count(SPIN_UP), config.count(SPIN_DOWN))
        sec = sectors[key]
        psi = np.zeros(len(sec.states), dtype=complex)
        psi[sec.lookup[basis.index_of(config)]] = 1.0
        nd_traj[itraj] = _one_trajectory(
            psi, key, t_grid, rng, sectors, get_prop, get_jumps, ndown_full,
            bisect_tol)
    mean = nd_traj.mean(axis=0)
    stderr = (nd_traj.std(axis=0, ddof=1) / math.sqrt(n_traj)
              if n_traj > 1 else np.zeros(len(t_grid)))
    curve = LossCurve(t_grid, mean, source="trajectory", stderr=stderr)
    return curve, nd_traj


def _one_trajectory(psi, key, t_grid, rng, sectors, get_prop, get_jumps,
                    ndown_full, bisect_tol):
    out = np.empty(len(t_grid))
    t_seg = 0.0                 # start time of the current coherent segment
    gi = 0
    threshold = rng.random()
    while gi < len(t_grid):
        if key[0] == 0 or key[1] == 0:
            # no opposite-spin pairs left: evolution is norm-preserving
            out[gi:] = _ndown_expect(psi, sectors[key], ndown_full)
            break
        prop = get_prop(key)
        w = prop.prepare(psi)
        dt_ok = 0.0             # largest dt known to stay above threshold
        jumped = False
        while gi < len(t_grid):
            dt = t_grid[gi] - t_seg
            cand = prop.state_at(w, dt)
            n2 = float(np.vdot(cand, cand).real)
            if n2 > threshold:
                out[gi] = _ndown_expect(cand, sectors[key], ndown_full)
                dt_ok = dt
                gi += 1
                continue
            # a jump occurs in (dt_ok, dt): bisect the norm crossing
            lo, hi = dt_ok, dt
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                nm = prop.state_at(w, mid)
                if float(np.vdot(nm, nm).real) > threshold:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < bisect_tol * max(t_grid[-1], 1e-300):
                    break
            t_jump = 0.5 * (lo + hi)
            at_jump = prop.state_at(w, t_jump)
            ops = get_jumps(key)
            branches = [A @ at_jump for A in ops]
            weights = np.array([float(np.vdot(b, b).real) for b in branches])
            total = weights.sum()
            t_seg += t_jump
            if total <= 0.0:
                # numerically dark despite spins remaining; continue coherently
                psi = at_jump / np.linalg.norm(at_jump)
            else:
                pick = rng.choice(len(ops), p=weights / total)
                psi = branches[pick] / math.sqrt(weights[pick])
                key = (key[0] - 1, key[1] - 1)
            threshold = rng.random()
            jumped = True
            break
        if not jumped and gi >= len(t_grid):
            break
    return out


def _ndown_expect(psi, sector: _Sector, ndown_full) -> float:
    w = np.abs(psi) ** 2
    return float(np.dot(w, ndown_full[sector.states]) / w.sum())


# ---------------------------------------------------------------------------
# fermionic cross-check

def _fermion_operators(L: int):
    """Jordan-Wigner annihilation matrices for 2L modes (site-major,
    up before down), restricted to at most one molecule per site."""
    n_modes = 2 * L
    full = []
    for mode in range(n_modes):
        dims_before = mode
        # operators built on the unrestricted 2^(2L) space via kron strings
        z = np.array([[1.0, 0.0], [0.0, -1.0]])
        s = np.array([[0.0, 1.0], [0.0, 0.0]])       # annihilates occupied
        eye = np.eye(2)
        op = np.array([[1.0]])
        for m in range(n_modes):
            if m < mode:
                op = np.kron(op, z)
            elif m == mode:
                op = np.kron(op, s)
            else:
                op = np.kron(op, eye)
        full.append(op)
    # projector onto the hardcore subspace (no site with both spins)
    dim = 2**n_modes
    keep = []
    for state in range(dim):
        ok = True
        for j in range(L):
            up = (state >> (n_modes - 1 - 2 * j)) & 1
            dn = (state >> (n_modes - 1 - (2 * j + 1))) & 1
            if up and dn:
                ok = False
                break
        if ok:
            keep.append(state)
    keep = np.array(keep)
    ops = [f[np.ix_(keep, keep)] for f in full]
    return ops, keep, n_modes


def representation_check(cfg: TubeConfig, init_config, t_grid,
                         max_sites: int = 4) -> float:
    """Max |N_down(t)| deviation between the hardcore-spin solver and an
    explicitly antisymmetrized fermionic construction (Jordan-Wigner signs).
    """
    L = cfg.n_sites
    if L > max_sites:
        raise SizeCapError(f"representation check capped at {max_sites} sites")
    ops, keep, n_modes = _fermion_operators(L)

    def c(j, spin):
        return ops[2 * j + (0 if spin == SPIN_UP else 1)]

    dim = len(keep)
    js = cfg.site_indices()
    H = np.zeros((dim, dim), dtype=complex)
    for j in range(L - 1):
        for spin in (SPIN_UP, SPIN_DOWN):
            hop = c(j, spin).conj().T @ c(j + 1, spin)
            H += -cfg.J * (hop + hop.conj().T)
    for j in range(L):
        H += cfg.omega_up * js[j] ** 2 * (c(j, SPIN_UP).conj().T @ c(j, SPIN_UP))
        H += cfg.omega_down * js[j] ** 2 * (c(j, SPIN_DOWN).conj().T @ c(j, SPIN_DOWN))
    amp = math.sqrt(2.0 * cfg.gamma_eff_used)
    jumps_f = []
    for j in range(L):
        A = np.zeros((dim, dim), dtype=complex)
        for ell in (j + 1, j - 1):
            if not 0 <= ell < L:
                continue
            A += amp * (c(j, SPIN_UP) @ c(ell, SPIN_DOWN)
                        - c(j, SPIN_DOWN) @ c(ell, SPIN_UP))
        jumps_f.append(A)
    n_dn_f = sum(c(j, SPIN_DOWN).conj().T @ c(j, SPIN_DOWN) for j in range(L))
    # fermionic initial state: apply creation operators in site order
    psi = np.zeros(dim, dtype=complex)
    vac_state = 0
    psi[int(np.nonzero(keep == vac_state)[0][0])] = 1.0
    for j, s in enumerate(init_config):
        if s != EMPTY:
            psi = c(j, s).conj().T @ psi
    rho = np.outer(psi, psi.conj())
    nd_f = _dense_lindblad_ndown(rho, H, jumps_f, n_dn_f, t_grid)
    basis = ProjectedFockBasis(L)
    rho0 = np.outer(fock_state(basis, init_config),
                    fock_state(basis, init_config).conj())
    curve, _ = liouville_evolve(rho0, cfg, t_grid, basis=basis,
                                rtol=1e-11, atol=1e-13)
    return float(np.max(np.abs(nd_f - curve.n_down)))


def _dense_lindblad_ndown(rho, H, jumps, n_op, t_grid):
    dim = rho.shape[0]
    jsq = sum(A.conj().T @ A for A in jumps)

    def rhs(_t, y):
        r = y.reshape(dim, dim)
        dr = -1j * (H @ r - r @ H) - 0.5 * (jsq @ r + r @ jsq)
        for A in jumps:
            dr += A @ r @ A.conj().T
        dr = 0.5 * (dr + dr.conj().T)
        return dr.reshape(-1)

    sol = solve_ivp(rhs, (0.0, float(t_grid[-1])), rho.reshape(-1),
                    t_eval=np.asarray(t_grid, float), method="DOP853",
                    rtol=1e-11, atol=1e-13)
    rhos = sol.y.T.reshape(len(t_grid), dim, dim)
    return np.real(np.einsum("tij,ji->t", rhos, n_op))
