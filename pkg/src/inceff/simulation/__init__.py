"""Simulation harness: synthetic processes, exact oracles, experiments."""

from .dgp import (
    BenchmarkDgp,
    ContinuousDgp,
    DiscreteDgp,
    benchmark_dgp,
    linear_effect_dgp,
    null_dgp,
    replicate_seed,
)
from .oracles import enumeration_oracle, quadrature_oracle, quadrature_vcide_truth

__all__ = [
    "BenchmarkDgp",
    "ContinuousDgp",
    "DiscreteDgp",
    "benchmark_dgp",
    "linear_effect_dgp",
    "null_dgp",
    "replicate_seed",
    "enumeration_oracle",
    "quadrature_oracle",
    "quadrature_vcide_truth",
]
