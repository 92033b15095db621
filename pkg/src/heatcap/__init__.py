"""Heat capacities and excited-state singularities of separable classical systems."""

from .canonical import (
    closed_form_Z_degenerate_double_well,
    config_moment,
    dC_dbeta,
    heat_capacity_canonical,
    heat_capacity_from_lnZ,
    partition_function,
)
from .density import (
    LevelDensity,
    PowerLawSpec,
    convolve_densities,
    density_1d_numeric,
    density_plateau,
    density_power_law,
    log_density_derivative,
    system_density,
)
from .esqpt import detect_nonanalyticity, enumerate_stationary_points, predict_singularities
from .microcanonical import (
    beta_mic,
    build_caloric_curve,
    heat_capacity_micro,
    micro_capacity_derivative,
    solve_caloric,
    thermal_distribution,
)
from .potential import (
    Kind,
    PotentialComponent1D,
    SeparableSystem,
    build_component,
    classify_well,
    stationary_points_1d,
)

__version__ = "0.1.0"

__all__ = [
    "Kind",
    "LevelDensity",
    "PotentialComponent1D",
    "PowerLawSpec",
    "SeparableSystem",
    "beta_mic",
    "build_caloric_curve",
    "build_component",
    "classify_well",
    "closed_form_Z_degenerate_double_well",
    "config_moment",
    "convolve_densities",
    "dC_dbeta",
    "density_1d_numeric",
    "density_plateau",
    "density_power_law",
    "detect_nonanalyticity",
    "enumerate_stationary_points",
    "heat_capacity_canonical",
    "heat_capacity_from_lnZ",
    "heat_capacity_micro",
    "log_density_derivative",
    "micro_capacity_derivative",
    "partition_function",
    "predict_singularities",
    "solve_caloric",
    "stationary_points_1d",
    "system_density",
    "thermal_distribution",
]
