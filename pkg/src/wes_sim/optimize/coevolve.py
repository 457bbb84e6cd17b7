"""Alternating mechanism search and bad-actor retraining."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Optional

from ..agents.policies import QPolicy
from ..mechanism import GenomeSpace
from ..runner.script import Script
from ..runner.training import frozen, initial_policy, learner_role, train_policy
from ..seeding import split_seed
from .evaluate import MechanismEvaluator, evaluate_mechanism
from .nsga2 import Individual, knee_point, run_nsga2


@dataclass(frozen=True)
class CoevolutionConfig:
    rounds: int = 3
    generations: int = 5
    retrain_episodes: int = 100
    population: int = 8
    seeds_per_eval: int = 3
    space: GenomeSpace = field(default_factory=GenomeSpace)

    def validate(self) -> None:
        for name in ("rounds", "generations", "retrain_episodes", "population", "seeds_per_eval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.population % 2:
            raise ValueError("population must be even")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    f1_frozen: float
    f1_retrained: float
    f2: float
    knee: Individual
    front_size: int


@dataclass
class CoevolutionResult:
    history: list[RoundRecord]
    policy: QPolicy

    def history_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["round", "f1_frozen", "f1_retrained", "f2"])
        for r in self.history:
            w.writerow([r.round, repr(r.f1_frozen), repr(r.f1_retrained), repr(r.f2)])
        return out.getvalue()


def coevolve(
    config: CoevolutionConfig,
    script: Script,
    *,
    seed: int = 0,
    policy: Optional[QPolicy] = None,
    pretrain_episodes: int = 0,
    workers: int = 1,
) -> CoevolutionResult:
    """Each round searches mechanisms against the current (frozen) bad-actor
    policy, deploys the knee point, then retrains the policy against it,
    warm-started from the frozen one.  Both policies are scored on the
    round's evaluation seeds."""
    config.validate()
    role = learner_role(script)
    if policy is None:
        policy = initial_policy(script, role)
        if pretrain_episodes:
            policy = train_policy(script, pretrain_episodes, split_seed(seed, "pretrain")).policy
    history = []
    for rnd in range(config.rounds):
        seeds = tuple(split_seed(seed, "round", rnd, "eval", i) for i in range(config.seeds_per_eval))
        current = frozen(policy)
        evaluator = MechanismEvaluator(script, {role: current}, seeds, config.space, workers)
        search = run_nsga2(
            config.space, evaluator, population=config.population,
            generations=config.generations, seed=split_seed(seed, "round", rnd, "nsga2"),
        )
        knee = knee_point(search.front)
        f1_frozen, f2 = knee.objectives
        mechanism = config.space.decode(knee.genome)
        retrained = train_policy(
            replace(script, mechanism=mechanism), config.retrain_episodes,
            split_seed(seed, "round", rnd, "train"), policy=policy.copy(),
        ).policy
        f1_retrained, _ = evaluate_mechanism(knee.genome, script, {role: frozen(retrained)}, seeds, config.space)
        history.append(RoundRecord(rnd, f1_frozen, f1_retrained, f2, knee, len(search.front)))
        policy = retrained
    return CoevolutionResult(history, policy)
