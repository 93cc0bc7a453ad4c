"""Arnoldi propagator for non-Hermitian generators.

Propagates dpsi/dt = A psi (A = -i H / hbar, possibly non-normal) with an
adaptive-step Krylov approximation of the matrix exponential.  The local error
per step is estimated from the augmented Hessenberg exponential (the standard
Expokit estimate) and kept below `tol` times the current norm.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm


class PropagationError(RuntimeError):
    pass


def expv_sequence(apply_a, v0: np.ndarray, t_grid, m: int = 36, tol: float = 1e-10):
    """States exp(A t) v0 at the (sorted, non-negative) times in t_grid.

    Returns (norms, states) where states[i] is the vector at t_grid[i].
    apply_a maps a complex vector to A times that vector.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be non-decreasing")
    n = v0.size
    out = np.empty((len(t_grid), n), dtype=complex)
    norms = np.empty(len(t_grid))
    v = v0.astype(complex).copy()
    t_now = 0.0
    dt_try = None
    gi = 0
    while gi < len(t_grid) and t_grid[gi] <= t_now + 1e-300:
        out[gi] = v
        norms[gi] = np.linalg.norm(v)
        gi += 1
    guard = 0
    while gi < len(t_grid):
        guard += 1
        if guard > 2_000_000:
            raise PropagationError("step limit exceeded")
        t_target = t_grid[gi]
        beta = np.linalg.norm(v)
        if beta == 0.0:
            out[gi:] = 0.0
            norms[gi:] = 0.0
            break
        Q = np.empty((m + 1, n), dtype=complex)
        H = np.zeros((m + 1, m), dtype=complex)
        Q[0] = v / beta
        k_eff = m
        breakdown = False
        for k in range(m):
            w = apply_a(Q[k])
            for i in range(k + 1):
                h = np.vdot(Q[i], w)
                H[i, k] += h
                w -= h * Q[i]
            for i in range(k + 1):   # single reorthogonalization pass
                c = np.vdot(Q[i], w)
                H[i, k] += c
                w -= c * Q[i]
            hk = np.linalg.norm(w)
            H[k + 1, k] = hk
            if hk < 1e-12 * beta:
                k_eff = k + 1
                breakdown = True
                break
            Q[k + 1] = w / hk
        Hm = H[:k_eff, :k_eff]
        hnext = 0.0 if breakdown else abs(H[k_eff, k_eff - 1])
        if dt_try is None:
            dt_try = max((t_target - t_now) / 16.0, 1e-300)
        while True:
            dt = min(dt_try, t_target - t_now)
            Ha = np.zeros((k_eff + 1, k_eff + 1), dtype=complex)
            Ha[:k_eff, :k_eff] = Hm * dt
            Ha[k_eff, k_eff - 1] = hnext * dt
            Ea = expm(Ha)
            err = beta * abs(Ea[k_eff, 0])
            if err <= tol * beta or dt <= 1e-16 * max(t_target, 1e-300):
                v = Q[:k_eff].T @ (beta * Ea[:k_eff, 0])
                t_now += dt
                if err == 0.0:
                    dt_try = dt * 2.0
                else:
                    dt_try = dt * min(2.0, max(0.3, 0.9 * (tol * beta / err) ** (1.0 / k_eff)))
                break
            dt_try = dt * max(0.2, 0.9 * (tol * beta / err) ** (1.0 / k_eff))
        if t_now >= t_target - 1e-12 * max(t_target, 1e-300):
            out[gi] = v
            norms[gi] = np.linalg.norm(v)
            gi += 1
    return norms, out


def expv_norms(apply_a, v0, t_grid, m: int = 36, tol: float = 1e-10):
    """Norms of exp(A t) v0 along t_grid (states discarded to save memory)."""
    t_grid = np.asarray(t_grid, dtype=float)
    norms = np.empty(len(t_grid))
    v = v0
    t_prev = 0.0
    for i, t in enumerate(t_grid):
        if t > t_prev:
            _, states = expv_sequence(apply_a, v, np.array([t - t_prev]), m=m, tol=tol)
            v = states[0]
            t_prev = t
        norms[i] = np.linalg.norm(v)
    return norms, v


class RitzExtrapolation:
    """Spectral model of a slowly decaying state built from propagated snapshots.

    Snapshots w_i = psi((i+1) T0) span a power-filtered subspace in which fast
    components are damped by repeated application of the short-time propagator.
    Rayleigh-Ritz projection of the generator onto that subspace gives an
    analytic continuation of the norm decay to arbitrary times, so slow decays
    can be fitted on windows far beyond the directly propagated horizon.
    """

    def __init__(self, apply_a, psi0: np.ndarray, t0: float, n_steps: int = 24,
                 m: int = 40, tol: float = 1e-11):
        self.t0 = t0
        snaps = np.empty((n_steps, psi0.size), dtype=complex)
        v = psi0.astype(complex)
        meas = np.empty(n_steps)
        for i in range(n_steps):
            _, states = expv_sequence(apply_a, v, np.array([t0]), m=m, tol=tol)
            v = states[0]
            snaps[i] = v
            meas[i] = np.linalg.norm(v)
        self.measured = meas
        U, s, _ = np.linalg.svd(snaps.T, full_matrices=False)
        keep = s > s[0] * 1e-13
        Q = U[:, keep]
        AQ = np.empty_like(Q)
        for i in range(Q.shape[1]):
            AQ[:, i] = apply_a(np.ascontiguousarray(Q[:, i]))
        M = Q.conj().T @ AQ
        theta, Y = np.linalg.eig(M)
        self.theta = theta
        self.Y = Y
        self.coef = np.linalg.solve(Y, Q.conj().T @ snaps[0])
        pred = np.array([self.norm_at((i + 1) * t0) for i in range(n_steps)])
        half = n_steps // 2
        self.model_error = float(np.max(np.abs(pred[half:] - meas[half:]))
                                 / np.max(meas[half:]))

    def norm_at(self, t: float) -> float:
        """Norm of the modeled state at time t >= t0 (t measured from psi0)."""
        z = self.Y @ (np.exp(self.theta * (t - self.t0)) * self.coef)
        return float(np.linalg.norm(z))

    def slowest_eigenvalue(self, min_weight: float = 1e-8) -> complex:
        """Ritz generator eigenvalue with the largest real part (slowest decay).

        Eigenvalues whose contribution to the initial state is negligible are
        ignored so that spurious subspace directions cannot win.
        """
        w = np.abs(self.coef) * np.linalg.norm(self.Y, axis=0)
        mask = w > min_weight * w.max()
        cands = self.theta[mask]
        return complex(cands[np.argmax(cands.real)])
