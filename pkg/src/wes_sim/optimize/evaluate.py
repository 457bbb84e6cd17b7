"""Episode-based fitness of a mechanism genome."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Union

from ..agents.policies import Policy
from ..mechanism import GenomeSpace, MechanismParams, decode
from ..runner.engine import run_script
from ..runner.script import Script

BAD_ROLES = ("scammer",)
NORMAL_ROLES = ("normal",)


def episode_objectives(
    script: Script,
    params: MechanismParams,
    seed: int,
    policies: Mapping[Union[int, str], Policy],
    bad_roles: Sequence[str] = BAD_ROLES,
    normal_roles: Sequence[str] = NORMAL_ROLES,
) -> tuple[float, float]:
    """(bad-actor success clipped at 0, normal-user utility loss) for one episode."""
    result = run_script(replace(script, mechanism=params), seed, policies=policies)
    by_role = result.rewards_by_role()
    bad = [r for role in bad_roles for r in by_role.get(role, [])]
    normal = [r for role in normal_roles for r in by_role.get(role, [])]
    f1 = max(0.0, math.fsum(bad) / len(bad)) if bad else 0.0
    f2 = 1.0 - math.fsum(normal) / len(normal) if normal else 0.0
    return f1, f2


def evaluate_mechanism(
    genome: Sequence[int],
    script: Script,
    policies: Mapping[Union[int, str], Policy],
    seeds: Sequence[int],
    space: Optional[GenomeSpace] = None,
    bad_roles: Sequence[str] = BAD_ROLES,
    normal_roles: Sequence[str] = NORMAL_ROLES,
) -> tuple[float, float]:
    """Mean (f1, f2) over one episode per seed.  Raises OutOfBounds for a
    genome outside the space (the full genome when ``space`` is None)."""
    if not seeds:
        raise ValueError("at least one evaluation seed is required")
    params = space.decode(genome) if space is not None else decode(genome)
    per_seed = [episode_objectives(script, params, s, policies, bad_roles, normal_roles) for s in seeds]
    return math.fsum(p[0] for p in per_seed) / len(seeds), math.fsum(p[1] for p in per_seed) / len(seeds)


def default_workers() -> int:
    env = os.environ.get("WES_SIM_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _evaluate_task(args) -> tuple[float, float]:
    return evaluate_mechanism(*args)


@dataclass
class MechanismEvaluator:
    """Caching, optionally parallel fitness function for NSGA-II.

    Results are returned in input order whatever the completion order, so
    the worker count never changes an outcome.
    """

    script: Script
    policies: Mapping[Union[int, str], Policy]
    seeds: tuple[int, ...]
    space: Optional[GenomeSpace] = None
    workers: int = 1
    bad_roles: tuple[str, ...] = BAD_ROLES
    normal_roles: tuple[str, ...] = NORMAL_ROLES
    cache: dict[tuple[int, ...], tuple[float, float]] = field(default_factory=dict)
    evaluations: int = 0

    def __call__(self, genomes: Sequence[Sequence[int]]) -> list[tuple[float, float]]:
        keys = [tuple(int(v) for v in g) for g in genomes]
        todo = sorted({k for k in keys if k not in self.cache})
        args = [(k, self.script, self.policies, self.seeds, self.space, self.bad_roles, self.normal_roles) for k in todo]
        if self.workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(_evaluate_task, args))
        else:
            results = [_evaluate_task(a) for a in args]
        self.evaluations += len(todo)
        self.cache.update(zip(todo, results))
        return [self.cache[k] for k in keys]
