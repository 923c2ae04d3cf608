"""Weighted reference-point MMD two-sample testing toolkit."""

from .configs import (
    BoundCurveConfig,
    ConfigError,
    GeneratorConfig,
    KernelSpec,
    OptimizeConfig,
    PermTestConfig,
    PowerConfig,
    RunConfig,
    SelectConfig,
    SpectraConfig,
)
from .datagen import LabeledPool, PointCloud, generate, load_pool
from .kernel import (
    KernelStack,
    ReferenceColumns,
    build_base_kernel,
    build_kernel_stack,
    build_stack,
    estimate_degrees,
    reference_columns,
)
from .statistic import ReferenceSet, WitnessVector, mmd_full, mmd_reference, witness
from .spectral import SpectralBasis, decompose, energy_curve, project_witness
from .bound import BoundReport, bound_vs_size_curve, evaluate_bound
from .refselect import optimize_weights, select_random, select_with_coverage
from .permtest import permutation_test, power_curve

__version__ = "0.1.0"

__all__ = [
    "BoundCurveConfig",
    "BoundReport",
    "ConfigError",
    "GeneratorConfig",
    "KernelSpec",
    "KernelStack",
    "LabeledPool",
    "OptimizeConfig",
    "PermTestConfig",
    "PointCloud",
    "PowerConfig",
    "ReferenceColumns",
    "ReferenceSet",
    "RunConfig",
    "SelectConfig",
    "SpectraConfig",
    "SpectralBasis",
    "WitnessVector",
    "bound_vs_size_curve",
    "build_base_kernel",
    "build_kernel_stack",
    "build_stack",
    "decompose",
    "energy_curve",
    "estimate_degrees",
    "evaluate_bound",
    "generate",
    "load_pool",
    "mmd_full",
    "mmd_reference",
    "optimize_weights",
    "permutation_test",
    "power_curve",
    "project_witness",
    "reference_columns",
    "select_random",
    "select_with_coverage",
    "witness",
]
