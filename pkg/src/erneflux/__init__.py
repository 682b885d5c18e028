"""Diffusion-limited transport between two reservoirs through narrow junctions.

Predicts and simulates how luminal proteins equilibrate from the ER into the
nuclear envelope through sparse, nanometer-scale junctions: a closed-form
rate constant from the junction conductance, a conservative finite-volume
model of the coupled junction/reservoir dynamics, FRAP-style recovery-curve
fitting, a masked lattice-walk diffusion estimator, and parameter sweeps.
"""

__version__ = "0.1.0"

from .analytic import CellParams, RateResult, junction_flux, rate_constant, recovery_curve
from .errors import (
    ConfigError,
    DataError,
    DegenerateFitError,
    InfeasibleGeometryError,
)
from .frap2d import (
    DiffusionEstimate,
    LatticeMask,
    WalkConfig,
    estimate_D,
    msd_check,
    simulate_recovery,
)
from .frapfit import (
    ComparisonMetrics,
    FitResult,
    compare_model_data,
    fit_one_phase,
    normalize_recovery,
)
from .geometry import (
    Cone,
    EffectiveGeometry,
    JunctionGeometry,
    Reporter,
    Tabulated,
    area_at,
    asymptotic_conductance_limit,
    effective_geometry,
    harmonic_mean_area,
    load_profile_csv,
)
from .solver import (
    ConvergenceRow,
    DimensionlessNumbers,
    Grid,
    SimConfig,
    SimResult,
    SimState,
    build_grid,
    convergence_study,
    dimensionless_numbers,
    equilibrium_density,
    simulate,
    step,
)
from .sweep import SweepRow, SweepSpec, emit_figure_data, run_sweep, write_summary_csv
from .timeseries import TimeSeries, align_and_average

__all__ = [
    "__version__",
    "CellParams", "RateResult", "junction_flux", "rate_constant", "recovery_curve",
    "ConfigError", "DataError", "DegenerateFitError", "InfeasibleGeometryError",
    "DiffusionEstimate", "LatticeMask", "WalkConfig", "estimate_D", "msd_check",
    "simulate_recovery",
    "ComparisonMetrics", "FitResult", "compare_model_data", "fit_one_phase",
    "normalize_recovery",
    "Cone", "EffectiveGeometry", "JunctionGeometry", "Reporter", "Tabulated",
    "area_at", "asymptotic_conductance_limit", "effective_geometry",
    "harmonic_mean_area", "load_profile_csv",
    "ConvergenceRow", "DimensionlessNumbers", "Grid", "SimConfig", "SimResult",
    "SimState", "build_grid", "convergence_study", "dimensionless_numbers",
    "equilibrium_density", "simulate", "step",
    "SweepRow", "SweepSpec", "emit_figure_data", "run_sweep", "write_summary_csv",
    "TimeSeries", "align_and_average",
]
