"""Scenario synthesis: weight judgmental scenarios against a reference forecast."""

from .distributions import PercentilePoint, SkewTParams, fit_to_percentiles
from .errors import (
    ConstructionError,
    ConvergenceError,
    DegeneracyError,
    DomainError,
    FitError,
    InfeasibleSpecError,
    PipelineError,
    SynthesisError,
)
from .fixtures import get_fixture, list_fixtures
from .pipeline import DensitySpec, RunConfig, RunReport, ScenarioSpec, run, run_synthesis
from .sampling import WeightedSample
from .synthesis import ScenarioWeightMatrix, emr, optimize_map, optimize_mle, pairwise_emr
from .tilting import ScoreSpec, solve_tilt

__version__ = "0.1.0"

__all__ = [
    "ConstructionError",
    "ConvergenceError",
    "DegeneracyError",
    "DensitySpec",
    "DomainError",
    "FitError",
    "InfeasibleSpecError",
    "PercentilePoint",
    "PipelineError",
    "RunConfig",
    "RunReport",
    "ScenarioSpec",
    "ScenarioWeightMatrix",
    "ScoreSpec",
    "SkewTParams",
    "SynthesisError",
    "WeightedSample",
    "emr",
    "fit_to_percentiles",
    "get_fixture",
    "list_fixtures",
    "optimize_map",
    "optimize_mle",
    "pairwise_emr",
    "run",
    "run_synthesis",
    "solve_tilt",
]
