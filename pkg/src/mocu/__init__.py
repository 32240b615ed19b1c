"""Objective-based uncertainty quantification with the multi-objective MOCU."""

from .core import (
    AnalyticOperatorClass,
    CostFunctionSet,
    FiniteOperatorClass,
    FiniteUncertaintyClass,
    FlatDirichlet,
    MocuReport,
    PointMass,
    SampledUncertaintyClass,
    UniformGrid2,
    WeightedGrid,
    as_weight_vector,
    combined_cost,
    default_weight_distribution,
    mocu_at_lambda,
    multi_objective_mocu,
    optimal_operator,
    robust_operator,
    sample_weight,
    single_objective_mocu,
    unit_vector,
)
from .errors import (
    ConvergenceError,
    EvaluationError,
    InvalidArgumentError,
    InvalidModelError,
    LoadError,
    MocuError,
)

__version__ = "0.1.0"
