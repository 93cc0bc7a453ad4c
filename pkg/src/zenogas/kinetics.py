"""Single-band Zeno rate algebra and the two-body loss rate equation.

The number-loss rate equation dN/dt = -(kappa/N0) N^2 has the closed form
N0/(1 + kappa t); kappa is extracted from loss curves by least squares on the
window up to 25% loss, which avoids the finite-number saturation that the
rate equation cannot describe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

LOSS_FIT_FRACTION = 0.25


class InsufficientDataError(ValueError):
    pass


class DegenerateFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class RateSet:
    """Derived rates for one lattice configuration, all angular s^-1."""

    J: float
    gamma0: float
    gamma_eff: float = 0.0
    gamma_eff_mb: float = 0.0
    q_neighbors: int = 2

    def __post_init__(self):
        for name in ("J", "gamma0", "gamma_eff", "gamma_eff_mb"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class LossCurve:
    """N_down(t) samples from any of the solvers (or synthetic data)."""

    times: np.ndarray
    n_down: np.ndarray
    source: str = "synthetic"
    stderr: np.ndarray | None = None

    def __post_init__(self):
        if len(self.times) != len(self.n_down):
            raise ValueError("times and n_down must have equal length")


@dataclass(frozen=True)
class KappaFit:
    kappa: float
    kappa_err: float
    n0: float
    t_window: float
    n_points: int


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    chi2_linear: float
    chi2_quadratic: float


def gamma_eff(J: float, gamma0: float) -> float:
    """Second-order Zeno rate 2 J^2 / Gamma0 (J stored as J/hbar in s^-1)."""
    if gamma0 <= 0:
        raise ZeroDivisionError("gamma_eff needs Gamma0 > 0")
    return 2.0 * J * J / gamma0


def re_solution(n0: float, kappa: float, t) -> np.ndarray | float:
    """Closed-form rate-equation solution N0 / (1 + kappa t)."""
    if n0 <= 0:
        raise ValueError("initial number must be positive")
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    return n0 / (1.0 + kappa * np.asarray(t, dtype=float))


def kappa_from_filling(f: float, gamma_rate: float) -> float:
    """kappa = 8 Gamma n_down(0) with n_down(0) = f/2, i.e. 4 f Gamma.

    gamma_rate is either the single-band or the multiband effective rate.
    """
    if not 0.0 <= f <= 1.0:
        raise ValueError("filling fraction must lie in [0, 1]")
    return 4.0 * f * gamma_rate


def loss_window(curve: LossCurve, fraction: float = LOSS_FIT_FRACTION):
    """Index range and cutoff time covering losses up to `fraction` of N(0).

    The cutoff is interpolated linearly between samples.
    """
    n0 = curve.n_down[0]
    target = (1.0 - fraction) * n0
    below = np.nonzero(curve.n_down < target)[0]
    if len(below) == 0:
        return len(curve.times), curve.times[-1]
    k = below[0]
    if k == 0:
        return 1, curve.times[0]
    t0, t1 = curve.times[k - 1], curve.times[k]
    y0, y1 = curve.n_down[k - 1], curve.n_down[k]
    t_cut = t0 + (target - y0) * (t1 - t0) / (y1 - y0)
    return k, t_cut


def fit_kappa(curve: LossCurve, fraction: float = LOSS_FIT_FRACTION) -> KappaFit:
    """Least-squares fit of the RE solution on the sub-window up to 25% loss.

    Returns kappa with the standard error from the linearized fit covariance.
    """
    k, t_cut = loss_window(curve, fraction)
    ts = curve.times[:k]
    ys = curve.n_down[:k]
    if len(ts) < 5:
        raise InsufficientDataError(
            f"only {len(ts)} samples before {fraction:.0%} loss; need >= 5")
    if np.ptp(ys) < 1e-12 * abs(ys[0]):
        raise DegenerateFitError("loss curve is flat; kappa is unconstrained")
    n0_guess = float(ys[0])
    drop = max(ys[0] / max(ys[-1], 1e-300) - 1.0, 1e-6)
    kappa_guess = drop / max(ts[-1], 1e-300)

    def model(t, n0, kappa):
        return n0 / (1.0 + kappa * t)

    popt, pcov = curve_fit(model, ts, ys, p0=(n0_guess, kappa_guess),
                           maxfev=20000)
    err = float(np.sqrt(pcov[1, 1])) if np.isfinite(pcov[1, 1]) else float("nan")
    return KappaFit(float(popt[1]), err, float(popt[0]), float(t_cut), len(ts))


def fit_power_law(x, y) -> tuple[float, float]:
    """Exponent and prefactor of y = c x^p by log-log linear regression."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise InsufficientDataError("power-law fit needs >= 2 points")
    p, logc = np.polyfit(np.log(x), np.log(y), 1)
    return float(p), float(np.exp(logc))


def _chi2_one_parameter(x, y, power: float) -> float:
    """Sum of squared residuals of the best fit y = c x^power."""
    basis = x**power
    c = float(np.dot(basis, y) / np.dot(basis, basis))
    return float(np.sum((y - c * basis) ** 2))


@dataclass(frozen=True)
class ScalingScan:
    j_fit: PowerLawFit
    gamma0_fit: PowerLawFit

    @property
    def chi2_ratio_linear_over_quadratic(self) -> float:
        if self.j_fit.chi2_quadratic == 0.0:
            return float("inf")
        return self.j_fit.chi2_linear / self.j_fit.chi2_quadratic


def zeno_scaling_scan(j_scan, gamma0_scan) -> ScalingScan:
    """Power-law structure of kappa against J (fixed Gamma0) and against
    Gamma0 (fixed J).

    Each scan is a sequence of (RateSet, kappa) pairs with >= 4 points. The
    J fit also reports the chi-squared of one-parameter linear and quadratic
    models, whose ratio is the Zeno discriminator.
    """
    j_scan = list(j_scan)
    gamma0_scan = list(gamma0_scan)
    if len(j_scan) < 4 or len(gamma0_scan) < 4:
        raise InsufficientDataError("scans need >= 4 points each")
    jx = np.array([abs(r.J) for r, _ in j_scan])
    jy = np.array([k for _, k in j_scan])
    gx = np.array([r.gamma0 for r, _ in gamma0_scan])
    gy = np.array([k for _, k in gamma0_scan])
    pj, cj = fit_power_law(jx, jy)
    pg, cg = fit_power_law(gx, gy)
    j_fit = PowerLawFit(pj, cj, _chi2_one_parameter(jx, jy, 1.0),
                        _chi2_one_parameter(jx, jy, 2.0))
    g_fit = PowerLawFit(pg, cg, _chi2_one_parameter(gx, gy, 1.0),
                        _chi2_one_parameter(gx, gy, 2.0))
    return ScalingScan(j_fit, g_fit)
