"""zenogas: loss dynamics of strongly reactive lattice gases.

Band-structure and Wannier inputs feed multiband effective loss rates, which
drive rate-equation, mean-field, and exact quantum-trajectory solvers of the
projected loss master equation; a CLI regenerates the headline parameter
scans as CSV artifacts.
"""

__version__ = "0.1.0"

from .units import (PhysicalConstants, LatticeConfig, KRB, recoil_energy,
                    unit_convention, hz_to_angular, angular_to_hz)
from .bands import (band_structure, tunneling, hopping_table, wannier,
                    onsite_loss_rate, BandData, WannierOrbital, HoppingTable)
from .contact import (single_well_rate, effective_loss_rate_dw,
                      band_convergence_scan, validate_against_busch,
                      contact_matrix_elements, busch_relative_energy)
from .kinetics import (RateSet, LossCurve, gamma_eff, re_solution,
                       kappa_from_filling, fit_kappa, zeno_scaling_scan)
from .meanfield import (TubeConfig, ShellDistribution, mf_rhs, mf_evolve,
                        shell_init, ensemble_average, fit_filling)
from .exact import (ProjectedFockBasis, build_hamiltonian, build_jumps,
                    liouville_evolve, trajectory_evolve, representation_check)

__all__ = [
    "PhysicalConstants", "LatticeConfig", "KRB", "recoil_energy",
    "unit_convention", "hz_to_angular", "angular_to_hz",
    "band_structure", "tunneling", "hopping_table", "wannier",
    "onsite_loss_rate", "BandData", "WannierOrbital", "HoppingTable",
    "single_well_rate", "effective_loss_rate_dw", "band_convergence_scan",
    "validate_against_busch", "contact_matrix_elements",
    "busch_relative_energy",
    "RateSet", "LossCurve", "gamma_eff", "re_solution", "kappa_from_filling",
    "fit_kappa", "zeno_scaling_scan",
    "TubeConfig", "ShellDistribution", "mf_rhs", "mf_evolve", "shell_init",
    "ensemble_average", "fit_filling",
    "ProjectedFockBasis", "build_hamiltonian", "build_jumps",
    "liouville_evolve", "trajectory_evolve", "representation_check",
]
