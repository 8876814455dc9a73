"""Evaluation protocol, metrics, and the synthetic scenario generator."""

from .metrics import ConfusionCounts, Metrics, compute_metrics
from .protocol import (
    ExperimentReport,
    RunResult,
    default_groups,
    run_group_experiment,
)
from .synth import (
    SCENARIO_SUITE,
    TEMPLATES,
    ScenarioTemplate,
    generate_scenario,
    generate_suite,
)

__all__ = [
    "ConfusionCounts",
    "Metrics",
    "compute_metrics",
    "ExperimentReport",
    "RunResult",
    "default_groups",
    "run_group_experiment",
    "SCENARIO_SUITE",
    "TEMPLATES",
    "ScenarioTemplate",
    "generate_scenario",
    "generate_suite",
]
