"""Kinetic slab simulator for shear-driven rarefied flow near a moving wall,
with a verification suite for its small-Knudsen-number fluid limit.

Subpackage map:
  velocity    velocity grid, Gaussian quadrature fidelity, macroscopic projection
  collision   linearized and bilinear collision operators (hard-sphere, BGK)
  rayleigh    self-similar shear profile and its closed-form norm oracles
  expansion   first- and second-order fluid correctors, sources, wall data
  solver      IMEX slab evolution in remainder and direct modes
  norms       energy/sup norm bookkeeping and the estimate monitor
  stationary  steady half-line shear check and far-field mismatch
  config      run configuration schema and parsing
  harness     sweeps, rate fitting, persistence
  cli         command-line entry point
"""

__version__ = "0.1.0"

from .errors import (
    RayslabError,
    ConfigurationError,
    GridMismatchError,
    DomainError,
    BackendUnsupportedError,
    NotMicroscopicError,
    MemoryBudgetError,
    CacheIntegrityError,
    CFLViolationError,
    NumericalAbortError,
    RealizabilityError,
    NegativeInitialDataError,
    InsufficientSnapshotsError,
)
from .velocity import VelocityGrid, Weight, build_grid, project_P
from .collision import CollisionOperator, GammaDictionary
from .rayleigh import RayleighProfile
from .expansion import (
    BurnettFields,
    KappaReport,
    WallData,
    build_burnett,
    compute_kappa,
    build_f1,
    build_f2,
    build_sources,
    build_wall_data,
)
from .norms import NormAccumulator, energy_norms, estimate_monitor
from .solver import SlabConfig, SlabSolver, SlabState, discrete_maxwellian
from .stationary import StationaryProblem, stationary_report
from .config import RunConfig, parse_config
from .harness import SweepResult, cmd_sweep, fit_rate, run_single

__all__ = [
    "__version__",
    "RayslabError", "ConfigurationError", "GridMismatchError", "DomainError",
    "BackendUnsupportedError", "NotMicroscopicError", "MemoryBudgetError",
    "CacheIntegrityError", "CFLViolationError", "NumericalAbortError",
    "RealizabilityError", "NegativeInitialDataError",
    "InsufficientSnapshotsError",
    "VelocityGrid", "Weight", "build_grid", "project_P",
    "CollisionOperator", "GammaDictionary",
    "RayleighProfile",
    "BurnettFields", "KappaReport", "WallData", "build_burnett",
    "compute_kappa", "build_f1", "build_f2", "build_sources",
    "build_wall_data",
    "NormAccumulator", "energy_norms", "estimate_monitor",
    "SlabConfig", "SlabSolver", "SlabState", "discrete_maxwellian",
    "StationaryProblem", "stationary_report",
    "RunConfig", "parse_config",
    "SweepResult", "cmd_sweep", "fit_rate", "run_single",
]
