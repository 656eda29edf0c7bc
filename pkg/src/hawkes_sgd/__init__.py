"""Stochastic least-squares estimation of linear multivariate Hawkes processes.

The objective decomposes into sums of closed-form kernel functionals over
events and event pairs; stratified Monte Carlo estimates of those sums give
unbiased gradients whose cost is set by the sampling budgets, not the number
of observed events. Exact simulators, time-rescaling diagnostics and
parameter-space metrics close the loop.
"""

from .diagnostics import (
    MetricReport,
    ResidualSet,
    bridge_series,
    ks_statistic,
    l2_rel_err,
    metric_report,
    residuals,
    wass_err,
)
from .estimator import HawkesProcessEstimator
from .exceptions import CapabilityError, NumericalError, ParseError, PlanError, ValidationError
from .kernels import (
    DelayedExponentialKernel,
    ExponentialKernel,
    GaussianKernel,
    RayleighKernel,
    TriangularKernel,
    make_kernel,
)
from .lse import grad_lse_exact, lse_decomposed, lse_exact
from .model import HawkesModel
from .paths import EventPath
from .simulate import GroundTruth, compensator, simulate_cluster, simulate_thinning
from .solver import AdamState, FitRecord, SolverConfig, StrataConfig, adam_step, fit, gradient_estimate

__version__ = "0.1.0"

__all__ = [
    "EventPath",
    "HawkesModel",
    "HawkesProcessEstimator",
    "GroundTruth",
    "ExponentialKernel",
    "DelayedExponentialKernel",
    "GaussianKernel",
    "RayleighKernel",
    "TriangularKernel",
    "make_kernel",
    "fit",
    "gradient_estimate",
    "adam_step",
    "AdamState",
    "FitRecord",
    "SolverConfig",
    "StrataConfig",
    "lse_exact",
    "lse_decomposed",
    "grad_lse_exact",
    "simulate_cluster",
    "simulate_thinning",
    "compensator",
    "residuals",
    "ResidualSet",
    "ks_statistic",
    "bridge_series",
    "l2_rel_err",
    "wass_err",
    "metric_report",
    "MetricReport",
    "CapabilityError",
    "PlanError",
    "ValidationError",
    "ParseError",
    "NumericalError",
    "__version__",
]
