import math

import numpy as np
import pytest

from zenogas import exact
from zenogas.meanfield import TubeConfig

UP, DN, E = exact.SPIN_UP, exact.SPIN_DOWN, exact.EMPTY


def test_basis_dim_and_roundtrip():
    b = exact.ProjectedFockBasis(4)
    assert b.dim == 81
    for idx in (0, 17, 80):
        assert b.index_of(b.config_of(idx)) == idx


def test_two_site_single_particle_hopping_block():
    cfg = TubeConfig(2, 123.0, 0.0)
    b = exact.ProjectedFockBasis(2)
    h = exact.build_hamiltonian(cfg, b).toarray()
    i1 = b.index_of((UP, E))
    i2 = b.index_of((E, UP))
    assert h[i1, i2] == pytest.approx(-123.0)
    assert h[i2, i1] == pytest.approx(-123.0)
    assert h[i1, i1] == 0.0


def test_zero_hopping_diagonal_trap():
    cfg = TubeConfig(3, 0.0, 0.0, omega_up=7.0, omega_down=11.0)
    b = exact.ProjectedFockBasis(3)
    h = exact.build_hamiltonian(cfg, b).toarray()
    assert np.abs(h - np.diag(np.diag(h))).max() == 0.0
    idx = b.index_of((UP, E, DN))
    assert h[idx, idx] == pytest.approx(7.0 * 1 + 11.0 * 1)
    idx2 = b.index_of((E, DN, E))
    assert h[idx2, idx2] == 0.0


def test_two_particle_spectrum_matches_free_fermion_pairs():
    # hardcore particles on an open chain: each sector maps to free fermions,
    # so the two-particle spectrum is every pair sum e_i + e_j (i < j), twice
    L = 5
    cfg = TubeConfig(L, 77.0, 0.0, omega_up=3.0, omega_down=3.0)
    b = exact.ProjectedFockBasis(L)
    h = exact.build_hamiltonian(cfg, b).toarray()
    occ = b.occupations()
    sector = ((occ == UP).sum(axis=1) == 1) & ((occ == DN).sum(axis=1) == 1)
    hs = h[np.ix_(np.nonzero(sector)[0], np.nonzero(sector)[0])]
    evals = np.sort(np.linalg.eigvalsh(hs))
    js = cfg.site_indices().astype(float)
    h1 = -77.0 * (np.eye(L, k=1) + np.eye(L, k=-1)) + np.diag(3.0 * js**2)
    e1 = np.linalg.eigvalsh(h1)
    pairs = sorted(e1[i] + e1[j] for i in range(L) for j in range(i + 1, L))
    expected = np.sort(np.repeat(pairs, 2))
    assert np.allclose(evals, expected, atol=1e-9)


def test_jump_operator_singlet_and_triplet():
    g = 4.2
    cfg = TubeConfig(2, 0.0, g)
    b = exact.ProjectedFockBasis(2)
    jumps = exact.build_jumps(cfg, b)
    s = (exact.fock_state(b, (UP, DN)) - exact.fock_state(b, (DN, UP)))
    s /= math.sqrt(2)
    t = (exact.fock_state(b, (UP, DN)) + exact.fock_state(b, (DN, UP)))
    t /= math.sqrt(2)
    vac = exact.fock_state(b, (E, E))
    for A in jumps:
        assert np.vdot(A @ s, A @ s).real == pytest.approx(4.0 * g, rel=1e-12)
        assert np.linalg.norm(A @ t) < 1e-14
        assert np.linalg.norm(A @ vac) == 0.0
        assert np.linalg.norm(A @ exact.fock_state(b, (UP, UP))) == 0.0


def test_jump_sum_matches_dense_oracle():
    L = 4
    cfg = TubeConfig(L, 50.0, 3.0)
    b = exact.ProjectedFockBasis(L)
    jumps = exact.build_jumps(cfg, b)
    jsq = sum(A.conj().T @ A for A in jumps).toarray()
    # brute-force: sum over basis transitions of each operator
    dense = np.zeros_like(jsq)
    for A in jumps:
        Ad = A.toarray()
        dense += Ad.conj().T @ Ad
    rng = np.random.default_rng(3)
    psi = rng.normal(size=b.dim) + 1j * rng.normal(size=b.dim)
    psi /= np.linalg.norm(psi)
    assert np.vdot(psi, jsq @ psi) == pytest.approx(
        np.vdot(psi, dense @ psi), rel=1e-12)


def test_liouville_two_site_singlet_and_triplet():
    g = 6.0
    cfg = TubeConfig(2, 0.0, g)
    b = exact.ProjectedFockBasis(2)
    s = (exact.fock_state(b, (UP, DN)) - exact.fock_state(b, (DN, UP)))
    s /= math.sqrt(2)
    t_grid = np.linspace(0.0, 0.3 / g, 12)
    curve, rhos = exact.liouville_evolve(np.outer(s, s.conj()), cfg, t_grid,
                                         basis=b)
    # both bond operators cover the singlet: total molecule number decays at
    # 8 Gamma_eff (4 per operator)
    assert np.allclose(2 * curve.n_down, 2.0 * np.exp(-8.0 * g * t_grid),
                       atol=1e-8)
    tr = (exact.fock_state(b, (UP, DN)) + exact.fock_state(b, (DN, UP)))
    tr /= math.sqrt(2)
    curve_t, _ = exact.liouville_evolve(np.outer(tr, tr.conj()), cfg, t_grid,
                                        basis=b)
    assert np.abs(curve_t.n_down - 1.0).max() < 1e-9


def test_liouville_preserves_trace_and_hermiticity():
    cfg = TubeConfig(3, 40.0, 5.0, omega_up=2.0, omega_down=2.1)
    b = exact.ProjectedFockBasis(3)
    psi = exact.fock_state(b, (UP, DN, UP))
    t_grid = np.linspace(0.0, 0.05, 8)
    _, rhos = exact.liouville_evolve(np.outer(psi, psi.conj()), cfg, t_grid,
                                     basis=b)
    for r in rhos:
        assert abs(np.trace(r).real - 1.0) < 1e-8
        assert np.abs(r - r.conj().T).max() < 1e-12
        assert np.linalg.eigvalsh(r).min() > -1e-8


def test_spin_z_conserved():
    cfg = TubeConfig(4, 30.0, 2.5)
    b = exact.ProjectedFockBasis(4)
    psi = exact.fock_state(b, (UP, DN, UP, E))
    t_grid = np.linspace(0.0, 0.2, 6)
    _, rhos = exact.liouville_evolve(np.outer(psi, psi.conj()), cfg, t_grid,
                                     basis=b)
    nu, nd = exact.number_operators(b)
    sz = np.real(np.einsum("tii,i->t", rhos, nu - nd))
    assert np.abs(sz - 1.0).max() < 1e-9


def test_trajectory_matches_liouville():
    cfg = TubeConfig(5, 200.0, 30.0, omega_up=1.0, omega_down=1.2)
    b = exact.ProjectedFockBasis(5)
    config = (UP, E, DN, E, E)
    psi = exact.fock_state(b, config)
    t_grid = np.linspace(0.0, 0.01, 12)
    li, _ = exact.liouville_evolve(np.outer(psi, psi.conj()), cfg, t_grid,
                                   basis=b)
    tr, _ = exact.trajectory_evolve(config, cfg, t_grid, 600, seed=4)
    sig = np.where(tr.stderr > 0, tr.stderr, np.inf)
    assert np.all(np.abs(tr.n_down - li.n_down) <= 3.0 * sig)


def test_trajectory_without_loss_is_deterministic():
    cfg = TubeConfig(4, 150.0, 0.0)
    config = (E, UP, DN, E)
    t_grid = np.linspace(0.0, 0.01, 7)
    curve, alltraj = exact.trajectory_evolve(config, cfg, t_grid, 24, seed=8)
    assert np.abs(alltraj.std(axis=0)).max() < 1e-12


def test_representation_check_small_chains():
    cfg2 = TubeConfig(2, 80.0, 7.0)
    dev2 = exact.representation_check(cfg2, (UP, DN),
                                      np.linspace(0.0, 0.02, 6))
    assert dev2 < 1e-10
    cfg3 = TubeConfig(3, 60.0, 5.0, omega_up=1.0, omega_down=1.3)
    dev3 = exact.representation_check(cfg3, (UP, DN, UP),
                                      np.linspace(0.0, 0.015, 5))
    assert dev3 < 1e-10
    cfg4 = TubeConfig(4, 60.0, 5.0)
    dev4 = exact.representation_check(cfg4, (UP, DN, E, UP),
                                      np.linspace(0.0, 0.015, 5))
    assert dev4 < 1e-10
    dev4b = exact.representation_check(cfg4, (DN, UP, DN, E),
                                       np.linspace(0.0, 0.015, 5))
    assert dev4b < 1e-10


def test_size_caps():
    cfg = TubeConfig(13, 1.0, 1.0)
    with pytest.raises(exact.SizeCapError):
        exact.build_hamiltonian(cfg, exact.ProjectedFockBasis(13))
    cfg8 = TubeConfig(8, 1.0, 1.0)
    with pytest.raises(exact.SizeCapError):
        exact.liouville_evolve(np.eye(3**8) / 3**8, cfg8,
                               np.linspace(0, 1, 3))
    with pytest.raises(exact.SizeCapError):
        exact.representation_check(TubeConfig(5, 1.0, 1.0), (UP,) * 5,
                                   np.linspace(0, 1, 3))
