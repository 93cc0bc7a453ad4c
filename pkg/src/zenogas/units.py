"""Physical constants, unit conventions, and the shared lattice configuration.

Every rate in this package (J/hbar, Gamma0, Gamma_eff, kappa, trap omegas) is
stored as an angular frequency in s^-1.  Conversion to ordinary frequency
(divide by 2*pi) happens only at I/O boundaries.  This convention makes the
quoted numbers self-consistent: the V_y = 5 E_R band structure of KRb at
a = 532 nm gives J/hbar ~ 570 s^-1, not 570 Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

HBAR = 1.054571817e-34        # J s (CODATA 2018)
ATOMIC_MASS_UNIT = 1.66053906892e-27   # kg
M_K40 = 39.963998166 * ATOMIC_MASS_UNIT
M_RB87 = 86.909180531 * ATOMIC_MASS_UNIT

RATE_UNIT = "angular s^-1"
UNIT_CONVENTION = (
    "All rates are angular frequencies in s^-1; divide by 2*pi for Hz. "
    "Energies divided by hbar share the same unit."
)


def unit_convention() -> str:
    """Return the package-wide rate unit declaration."""
    return UNIT_CONVENTION


def hz_to_angular(f_hz: float) -> float:
    return 2.0 * math.pi * f_hz


def angular_to_hz(w: float) -> float:
    return w / (2.0 * math.pi)


class InvalidConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalConstants:
    """hbar, the atomic mass unit, and the molecule mass (default: fermionic KRb)."""

    hbar: float = HBAR
    atomic_mass_unit: float = ATOMIC_MASS_UNIT
    molecule_mass: float = M_K40 + M_RB87

    def __post_init__(self):
        if self.hbar <= 0 or self.atomic_mass_unit <= 0 or self.molecule_mass <= 0:
            raise InvalidConfigError("all physical constants must be strictly positive")


KRB = PhysicalConstants()


@dataclass(frozen=True)
class LatticeConfig:
    """Cubic lattice: axial depth along y, common transverse depth, spacing, loss coefficient.

    Depths are in recoil units E_R = hbar^2 pi^2 / (2 m a^2); beta_3d is the
    two-body loss coefficient in m^3/s.
    """

    depth_y: float
    depth_perp: float
    spacing_a: float = 532e-9
    beta_3d: float = 9.0e-16
    n_bands_per_axis: int = 6
    constants: PhysicalConstants = field(default=KRB)

    def __post_init__(self):
        if self.spacing_a <= 0:
            raise InvalidConfigError("lattice spacing must be positive")
        if self.depth_y < 0 or self.depth_perp < 0:
            raise InvalidConfigError("lattice depths must be non-negative")
        if self.beta_3d < 0:
            raise InvalidConfigError("beta_3d must be non-negative")
        if self.n_bands_per_axis < 1:
            raise InvalidConfigError("need at least one band per axis")

    @property
    def recoil_energy_j(self) -> float:
        return recoil_energy(self)

    @property
    def recoil_energy_w(self) -> float:
        """Recoil energy as an angular frequency, E_R/hbar in s^-1."""
        return recoil_energy(self) / self.constants.hbar


def recoil_energy(cfg: LatticeConfig, consts: PhysicalConstants | None = None) -> float:
    """E_R = hbar^2 pi^2 / (2 m a^2) in joules."""
    c = consts if consts is not None else cfg.constants
    if c.molecule_mass <= 0 or cfg.spacing_a <= 0:
        raise InvalidConfigError("mass and spacing must be positive")
    return c.hbar**2 * math.pi**2 / (2.0 * c.molecule_mass * cfg.spacing_a**2)
