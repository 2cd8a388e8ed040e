"""Peak age of information for multi-class priority queues.

Exact chain analysis for exponential one-slot-buffer systems, analytic
upper bounds for general service, exact FCFS formulas, and a
discrete-event simulation oracle, all behind one system description.
"""

from .dist import (
    Deterministic,
    Exponential,
    Gamma,
    MixtureDistribution,
    ServiceDistribution,
    Uniform,
)
from .errors import (
    DivergenceError,
    InternalConsistencyError,
    NumericalError,
    PaoiError,
    ParameterError,
    StabilityError,
    UnsupportedModelError,
    ValidationError,
)
from .exact_mm import ClassSpec, PAoIComponents, SystemSpec, paoi_exact
from .bounds_mg import paoi_upper_bound, rejection_probs
from .infinite import (
    fcfs_average_paoi,
    fcfs_paoi,
    lcfs_paoi_upper_bound,
    optimal_priority_order,
)
from .sim import (
    ClassEstimate,
    Discipline,
    SimConfig,
    SimEstimate,
    occupancy_probe,
    run_simulation,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "ServiceDistribution",
    "Exponential",
    "Deterministic",
    "Uniform",
    "Gamma",
    "MixtureDistribution",
    "ClassSpec",
    "SystemSpec",
    "PAoIComponents",
    "paoi_exact",
    "rejection_probs",
    "paoi_upper_bound",
    "fcfs_paoi",
    "fcfs_average_paoi",
    "optimal_priority_order",
    "lcfs_paoi_upper_bound",
    "Discipline",
    "SimConfig",
    "ClassEstimate",
    "SimEstimate",
    "simulate",
    "run_simulation",
    "occupancy_probe",
    "PaoiError",
    "ValidationError",
    "ParameterError",
    "StabilityError",
    "UnsupportedModelError",
    "NumericalError",
    "DivergenceError",
    "InternalConsistencyError",
    "__version__",
]
