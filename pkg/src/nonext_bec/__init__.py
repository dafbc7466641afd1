"""Exact finite-volume statistics and infinite-volume limits of diagonal Bose gases."""

from .analysis import (
    ScalingReport,
    SolvedState,
    SweepConfig,
    fixed_mu_state,
    pressure_point,
    run_fixture_audits,
    run_point_audits,
    scaling_sweep,
    solve_mu,
    state_moments,
)
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    DivergenceError,
    DomainError,
    NonextBecError,
    SizingError,
    TruncationError,
)
from .modes import BoxSpec, ModeShell, band_shells, enumerate_shells
from .partition import (
    EnsembleMoments,
    ModelParams,
    PartitionEngine,
    RestrictedPartition,
    Variant,
    adaptive_truncation,
    convolve,
    grand_sum,
    mode_weights,
    moments,
    shell_power,
)
from .thermolimit import (
    bose_density,
    bose_g,
    bose_pressure,
    critical_beta,
    critical_density,
    mf_pressure,
    thermal_wavelength,
    zeta,
)

__version__ = "0.1.0"

__all__ = [
    "BoxSpec",
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "EnsembleMoments",
    "ModeShell",
    "ModelParams",
    "NonextBecError",
    "PartitionEngine",
    "RestrictedPartition",
    "RunConfig",
    "ScalingReport",
    "SizingError",
    "SolvedState",
    "SweepConfig",
    "TruncationError",
    "Variant",
    "adaptive_truncation",
    "band_shells",
    "bose_density",
    "bose_g",
    "bose_pressure",
    "convolve",
    "critical_beta",
    "critical_density",
    "enumerate_shells",
    "fixed_mu_state",
    "grand_sum",
    "load_config",
    "mf_pressure",
    "mode_weights",
    "moments",
    "pressure_point",
    "run_fixture_audits",
    "run_point_audits",
    "scaling_sweep",
    "shell_power",
    "solve_mu",
    "state_moments",
    "thermal_wavelength",
    "zeta",
    "__version__",
]
