"""Heavy-tail class diagnostics, dependent products, risk simulation and multivariate tails."""

from .dependence import INDEPENDENT, DependenceKernel, fgm_kernel
from .dist_core import (
    DomainError,
    Exponential,
    Lognormal,
    Pareto,
    PointMass,
    StoppedSum,
    StoppingTime,
    UniformPos,
    Weibull,
    from_dict,
    mixture,
)
from .product_conv import ProductModel, verify_mixture_closure, verify_product_closure
from .risk_sim import RiskModelConfig, simulate_ruin, simulate_weighted_sums
from .rng import RngStream
from .tail_diagnostics import GridSpec, Tolerances, check_class, classify, matuszewska

__version__ = "0.1.0"

__all__ = [
    "INDEPENDENT",
    "DependenceKernel",
    "DomainError",
    "Exponential",
    "GridSpec",
    "Lognormal",
    "Pareto",
    "PointMass",
    "ProductModel",
    "RiskModelConfig",
    "RngStream",
    "StoppedSum",
    "StoppingTime",
    "Tolerances",
    "UniformPos",
    "Weibull",
    "check_class",
    "classify",
    "fgm_kernel",
    "from_dict",
    "matuszewska",
    "mixture",
    "simulate_ruin",
    "simulate_weighted_sums",
    "verify_mixture_closure",
    "verify_product_closure",
]
