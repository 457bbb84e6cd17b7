"""Training and evaluating the learning bots of a script."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from ..agents.policies import QPolicy
from ..graphgen import generate
from ..seeding import split_seed
from .engine import make_policy, run_script
from .script import PolicySpec, Script, ScriptInvalid, resolve_roster


@dataclass
class TrainingResult:
    policy: QPolicy
    curve: list[float]

    def curve_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["episode", "reward"])
        for i, r in enumerate(self.curve):
            w.writerow([i, repr(float(r))])
        return out.getvalue()


def learner_role(script: Script) -> str:
    roles = [e.role for e in script.roster if e.policy.kind == "rl"]
    if len(set(roles)) != 1:
        raise ScriptInvalid("training needs exactly one role with an RL policy")
    return roles[0]


def initial_policy(script: Script, role: Optional[str] = None) -> QPolicy:
    role = role or learner_role(script)
    world = generate(script.graph)
    bot = next(b for b in resolve_roster(script, world) if b.role == role)
    return make_policy(bot)


def _role_reward(result, role: str) -> float:
    rewards = result.rewards_by_role().get(role, [])
    return math.fsum(rewards) / len(rewards) if rewards else 0.0


def train_policy(
    script: Script,
    episodes: int,
    seed: int = 0,
    policy: Optional[QPolicy] = None,
) -> TrainingResult:
    """Online tabular training over ``episodes`` episodes; the curve holds the
    learner role's mean episode reward, exploration included."""
    role = learner_role(script)
    policy = policy if policy is not None else initial_policy(script, role)
    curve = []
    for i in range(episodes):
        result = run_script(script, split_seed(seed, "episode", i), policies={role: policy}, learn=True)
        curve.append(_role_reward(result, role))
    return TrainingResult(policy, curve)


def frozen(policy: QPolicy) -> QPolicy:
    """A greedy copy for evaluation."""
    return QPolicy(policy.repertoire, replace(policy.params, epsilon=0.0), policy.q.copy())


def evaluate_policy(script: Script, policy: QPolicy, seeds: Sequence[int]) -> list[float]:
    role = learner_role(script)
    return [_role_reward(run_script(script, s, policies={role: policy}), role) for s in seeds]


def random_baseline(script: Script, episodes: int, seed: int = 0) -> list[float]:
    """Learner role's reward with its policy swapped for uniform random choice."""
    role = learner_role(script)
    roster = tuple(replace(e, policy=PolicySpec("random")) if e.role == role else e for e in script.roster)
    rscript = replace(script, roster=roster)
    out = []
    for i in range(episodes):
        result = run_script(rscript, split_seed(seed, "random-baseline", i))
        out.append(_role_reward(result, role))
    return out

