"""Run configuration: TOML parsing and defaults for the scenario runner."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .units import InvalidConfigError

SCENARIOS = ("kappa_vs_gamma0", "kappa_vs_j", "deep_lattice_dynamics",
             "mf_vs_exact", "s1_renormalization", "saturation", "acceptance")


@dataclass
class RunConfig:
    scenario: str
    out_dir: str = "out"
    cache_dir: str = ".zenogas-cache"
    seeds: int = 32
    threads: int = 1
    # lattice sweep
    v_y: list = field(default_factory=lambda: [5.0])
    v_perp: list = field(default_factory=lambda: [20.0, 25.0, 32.0, 40.0])
    n_bands: int = 6
    beta_3d: float = 9.0e-16
    spacing_a: float = 532e-9
    # tube / trap
    n_sites: int = 121
    dephase: bool = True
    omega_mean_hz: float | None = None    # ordinary Hz; None = map from v_perp
    omega_ratio: float = 0.9              # omega_up / omega_down
    # shell
    shell_inner: int = 20
    shell_outer: int = 50
    filling: float = 0.09
    # solver
    solver: str = "MF"                    # RE | MF | exact
    n_traj: int = 2000
    n_times: int = 48
    t_max_s: float | None = None
    fast: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidConfigError(
                f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.solver not in ("RE", "MF", "exact"):
            raise InvalidConfigError("solver must be RE, MF, or exact")
        if not self.v_y or not self.v_perp:
            raise InvalidConfigError("sweep lists must be non-empty")

    def as_dict(self) -> dict:
        return asdict(self)


_SECTION_FIELDS = {
    "run": ("scenario", "out_dir", "cache_dir", "seeds", "threads", "fast"),
    "lattice": ("v_y", "v_perp", "n_bands", "beta_3d", "spacing_a"),
    "tube": ("n_sites", "dephase", "omega_mean_hz", "omega_ratio"),
    "shell": ("shell_inner", "shell_outer", "filling"),
    "solver": ("solver", "n_traj", "n_times", "t_max_s"),
}


def load_config(path) -> RunConfig:
    raw = _toml.loads(Path(path).read_text(encoding="utf-8"))
    kwargs = {}
    for section, names in _SECTION_FIELDS.items():
        table = raw.get(section, {})
        for key, val in table.items():
            if key not in names:
                raise InvalidConfigError(
                    f"unknown key {key!r} in [{section}] of {path}")
            kwargs[key] = val
    if "scenario" not in kwargs:
        raise InvalidConfigError(f"{path}: [run].scenario is required")
    return RunConfig(**kwargs)


def trap_frequency_map(v_perp: float) -> float:
    """Mean angular trap frequency for a transverse depth.

    Linear stand-in mapping V_perp in [20, 80] E_R onto mean trap frequencies
    2*pi*(15..40) Hz; the true dependence is configuration-specific and can be
    overridden per run.
    """
    frac = min(max((v_perp - 20.0) / 60.0, 0.0), 1.0)
    return 2.0 * math.pi * (15.0 + 25.0 * frac)
