"""Fixed pivot sectional solver for the aggregation population balance equation."""

__version__ = "0.1.0"

from .errors import (ConfigError, IntegrationFailure, InvalidArgument, NumericalFailure,
                     PivotLabError, StaleTableError, UndefinedRelativeError, UnsupportedCombination)
from .grid import (Grid, MeshFamily, build_geometric, build_uniform, refine_locally_uniform,
                   refine_oscillatory, refine_random)
from .kernel import KernelKind, KernelSpec, parse_kernel, sup_bound
from .initial_condition import DensityKind, DensitySpec, parse_density, project_to_cells
from .fixed_pivot import EventTable, StateVector, build_event_table, moments, rhs
from .integrator import IntegrationConfig, MonitorLog, integrate, rk4_step
from .convergence import StudyConfig, StudyReport, run_consistency, run_study, solve
from .config import RunConfig, load, preset_names

__all__ = [
    "ConfigError", "IntegrationFailure", "InvalidArgument", "NumericalFailure", "PivotLabError",
    "StaleTableError", "UndefinedRelativeError", "UnsupportedCombination",
    "Grid", "MeshFamily", "build_geometric", "build_uniform", "refine_locally_uniform",
    "refine_oscillatory", "refine_random",
    "KernelKind", "KernelSpec", "parse_kernel", "sup_bound",
    "DensityKind", "DensitySpec", "parse_density", "project_to_cells",
    "EventTable", "StateVector", "build_event_table", "moments", "rhs",
    "IntegrationConfig", "MonitorLog", "integrate", "rk4_step",
    "StudyConfig", "StudyReport", "run_consistency", "run_study", "solve",
    "RunConfig", "load", "preset_names",
]
