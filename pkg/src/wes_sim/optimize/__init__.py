"""Mechanism search: NSGA-II, episode fitness and co-evolution."""

from .coevolve import CoevolutionConfig, CoevolutionResult, RoundRecord, coevolve
from .evaluate import MechanismEvaluator, default_workers, episode_objectives, evaluate_mechanism
from .nsga2 import (
    Archive,
    Individual,
    NSGA2Result,
    crowding_distance,
    dominates,
    environmental_selection,
    knee_point,
    make_offspring,
    non_dominated_sort,
    nsga2_step,
    run_nsga2,
)
from .report import pareto_json
