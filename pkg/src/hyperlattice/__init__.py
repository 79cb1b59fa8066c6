"""Hyperlattice queueing model for service systems with overlapping regions."""
from .aggregate import AggregateModel, aggregate_distribution, truncation_mass
from .errors import *  # noqa: F401,F403
from .generator import REFLECTING, SUBGENERATOR, RateMatrix, build_generator
from .hypercube import build_hypercube, hypercube_report, hypercube_workloads
from .kernels import BACKEND
from .metrics import (
    PerformanceReport,
    aggregate_from_pi,
    dispatch_fractions,
    evaluate,
    workload_imbalance,
    workloads,
)
from .simulator import SimConfig, SimResult, compare, simulate
from .solver import SteadyState, solve, solve_direct, solve_power
from .states import StateIndexer, cumulative_size, level_size
from .system import (
    DefaultPolicy,
    FixedEtaPolicy,
    Geometry,
    IdlePreferencePolicy,
    ServiceSystem,
    TablePolicy,
    build_system,
    default_policy,
    eval_policy,
    load_config,
    system_from_config,
)

__version__ = "0.1.0"
