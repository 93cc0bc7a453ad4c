import numpy as np
import pytest
from scipy.linalg import expm

from zenogas.krylov import RitzExtrapolation, expv_norms, expv_sequence


def random_decaying_generator(rng, n):
    """A = -i(S - iK) with S real symmetric, K PSD: all modes decay."""
    s = rng.normal(size=(n, n))
    s = 0.5 * (s + s.T)
    k = rng.normal(size=(n, n))
    k = k @ k.T / n
    return -1j * (s - 1j * k), s, k


def test_expv_matches_dense_expm():
    rng = np.random.default_rng(5)
    a, _, _ = random_decaying_generator(rng, 40)
    v0 = rng.normal(size=40) + 1j * rng.normal(size=40)
    ts = np.array([0.0, 0.3, 1.1, 2.7])
    norms, states = expv_sequence(lambda v: a @ v, v0, ts, m=20, tol=1e-12)
    for t, st in zip(ts, states):
        ref = expm(a * t) @ v0
        assert np.linalg.norm(st - ref) < 1e-8 * np.linalg.norm(ref)


def test_expv_norms_sequence():
    rng = np.random.default_rng(7)
    a, _, _ = random_decaying_generator(rng, 25)
    v0 = rng.normal(size=25) + 0j
    ts = np.linspace(0.0, 2.0, 9)
    norms, final = expv_norms(lambda v: a @ v, v0, ts)
    ref = np.array([np.linalg.norm(expm(a * t) @ v0) for t in ts])
    assert np.allclose(norms, ref, rtol=1e-8)


def test_expv_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        expv_sequence(lambda v: v, np.ones(3, complex), np.array([1.0, 0.5]))


def test_ritz_extrapolation_reproduces_slow_decay():
    rng = np.random.default_rng(11)
    n = 60
    # one slow mode, the rest fast: mimic the Zeno separation; the fast
    # residue in the first snapshot bounds the model error at ~1e-4
    decays = np.concatenate([[0.01], rng.uniform(5.0, 20.0, n - 1)])
    freqs = rng.normal(scale=3.0, size=n)
    theta = -decays + 1j * freqs
    V = rng.normal(size=(n, n)) + 0.05j * rng.normal(size=(n, n))
    A = V @ np.diag(theta) @ np.linalg.inv(V)
    psi0 = V[:, 0] + 0.05 * V[:, 1:].sum(axis=1)
    psi0 = psi0 / np.linalg.norm(psi0)
    model = RitzExtrapolation(lambda v: A @ v, psi0, t0=1.0, n_steps=16)
    assert model.model_error < 1e-3
    for t in (5.0, 40.0, 200.0):
        ref = np.linalg.norm(expm(A * t) @ psi0)
        assert model.norm_at(t) == pytest.approx(ref, rel=1e-3)
    slow = model.slowest_eigenvalue()
    assert slow.real == pytest.approx(-0.01, rel=1e-4)
