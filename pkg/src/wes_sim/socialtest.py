"""Metric oracles over episode populations, fault injection and A/B tests."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Union

from .agents.policies import Policy
from .mechanism import MechanismParams, params_to_dict
from .platform.core import FaultConfig
from .runner.engine import EpisodeResult, run_script
from .runner.script import Script
from .seeding import split_seed

FINAL = "final"
PER_TICK_MEAN = "per_tick_mean"
DROP = "drop"
RISE = "rise"


class DegenerateBaseline(ValueError):
    pass


class UnknownFault(ValueError):
    pass


@dataclass(frozen=True)
class OracleSpec:
    metric: str
    aggregation: str = FINAL
    direction: str = DROP
    theta: float = 0.2
    alpha: float = 0.05

    def validate(self) -> None:
        if self.aggregation not in (FINAL, PER_TICK_MEAN):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if self.direction not in (DROP, RISE):
            raise ValueError(f"unknown direction {self.direction!r}")
        if not 0.0 < self.theta < 1.0 or not 0.0 < self.alpha < 1.0:
            raise ValueError("theta and alpha must lie strictly between 0 and 1")

    def flipped(self) -> "OracleSpec":
        return replace(self, direction=RISE if self.direction == DROP else DROP)


@dataclass(frozen=True)
class Verdict:
    passed: bool
    change: float
    p_value: float
    n_baseline: int
    n_candidate: int
    metric: str = ""

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "verdict": "pass" if self.passed else "fail",
            "change": self.change,
            "p_value": self.p_value,
            "n_baseline": self.n_baseline,
            "n_candidate": self.n_candidate,
        }


# --- rank-sum test ---------------------------------------------------------------

EXACT_MAX = 10


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _exact_p(doubled: list[int], n1: int, observed: int) -> float:
    """Two-sided permutation p-value of the doubled rank sum of the first
    sample, by counting subsets of size n1 per sum (valid under ties)."""
    total = sum(doubled)
    ways: list[dict[int, int]] = [dict() for _ in range(n1 + 1)]
    ways[0][0] = 1
    for r in doubled:
        for k in range(n1 - 1, -1, -1):
            for s, c in ways[k].items():
                ways[k + 1][s + r] = ways[k + 1].get(s + r, 0) + c
    dist = ways[n1]
    n_sub = sum(dist.values())
    # mean of the doubled sum is n1 * total / N; compare |2N*s - 2*n1*total| as integers
    n = len(doubled)
    dev = abs(n * observed - n1 * total)
    extreme = sum(c for s, c in dist.items() if abs(n * s - n1 * total) >= dev)
    return min(1.0, extreme / n_sub)


def mann_whitney(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Two-sided Mann-Whitney rank-sum test; returns (U of x, p-value).

    Exact when both samples have at most 10 values, otherwise the normal
    approximation with tie correction and continuity correction.
    """
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be non-empty")
    ranks = _midranks(list(x) + list(y))
    w = sum(ranks[:n1])
    u = w - n1 * (n1 + 1) / 2
    n = n1 + n2
    if n1 <= EXACT_MAX and n2 <= EXACT_MAX:
        doubled = [int(round(2 * r)) for r in ranks]
        return u, _exact_p(doubled, n1, sum(doubled[:n1]))
    counts: dict[float, int] = {}
    for v in list(x) + list(y):
        counts[v] = counts.get(v, 0) + 1
    ties = sum(t**3 - t for t in counts.values())
    var = n1 * n2 / 12 * ((n + 1) - ties / (n * (n - 1)))
    if var <= 0:
        return u, 1.0
    z = (abs(u - n1 * n2 / 2) - 0.5) / math.sqrt(var)
    return u, min(1.0, math.erfc(max(z, 0.0) / math.sqrt(2)))


# --- oracles ---------------------------------------------------------------------


def relative_change(baseline: Sequence[float], candidate: Sequence[float]) -> float:
    base = math.fsum(baseline) / len(baseline)
    if base == 0:
        raise DegenerateBaseline("baseline mean is zero; relative change undefined")
    return (math.fsum(candidate) / len(candidate) - base) / base


def evaluate_oracle(baseline: Sequence[float], candidate: Sequence[float], spec: OracleSpec) -> Verdict:
    """Fail only when the change crosses theta in the flagged direction and
    the rank-sum test is significant at alpha."""
    spec.validate()
    if not baseline or not candidate:
        raise ValueError("both arms need results")
    change = relative_change(baseline, candidate)
    _, p = mann_whitney(baseline, candidate)
    tripped = change <= -spec.theta if spec.direction == DROP else change >= spec.theta
    return Verdict(not (tripped and p <= spec.alpha), change, p, len(baseline), len(candidate), spec.metric)


def metric_value(result: EpisodeResult, spec: OracleSpec) -> float:
    total = result.total(spec.metric)
    if spec.aggregation == PER_TICK_MEAN:
        return total / result.ticks if result.ticks else 0.0
    return total


# --- faults ------------------------------------------------------------------------

FAULTS = ("message-drop", "privacy-policy-downgrade", "notification-loss")
_FAULT_RE = re.compile(r"^\s*([a-z-]+)\s*(?:\(\s*([0-9.eE+-]+)\s*\))?\s*$")


def parse_fault(fault_id: str) -> FaultConfig:
    m = _FAULT_RE.match(fault_id)
    if not m or m.group(1) not in FAULTS:
        raise UnknownFault(f"unknown fault {fault_id!r}; known: {', '.join(FAULTS)}")
    name, arg = m.group(1), m.group(2)
    if name == "privacy-policy-downgrade":
        if arg is not None:
            raise UnknownFault("privacy-policy-downgrade takes no parameter")
        return FaultConfig(privacy_downgrade=True)
    if arg is None:
        raise UnknownFault(f"{name} needs a probability, e.g. {name}(0.5)")
    p = float(arg)
    if not 0.0 <= p <= 1.0:
        raise UnknownFault(f"{name} probability {p} outside [0, 1]")
    return FaultConfig(message_drop=p) if name == "message-drop" else FaultConfig(notification_loss=p)


def inject_fault(script: Script, fault_id: str) -> Script:
    """The script with one more platform fault switched on."""
    add = parse_fault(fault_id)
    f = script.faults
    merged = FaultConfig(
        max(f.message_drop, add.message_drop),
        max(f.notification_loss, add.notification_loss),
        f.privacy_downgrade or add.privacy_downgrade,
        f.seed,
    )
    return replace(script, faults=merged)


# --- A/B tests -------------------------------------------------------------------------

PolicyMap = Mapping[Union[int, str], Policy]


def run_arm(script: Script, seeds: Sequence[int], policies: Optional[PolicyMap] = None) -> list[EpisodeResult]:
    return [run_script(script, s, policies=policies or {}) for s in seeds]


@dataclass(frozen=True)
class RewardSummary:
    mean: float
    std: float
    n: int


def _summary(values: Sequence[float]) -> RewardSummary:
    n = len(values)
    mean = math.fsum(values) / n if n else 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1) if n > 1 else 0.0
    return RewardSummary(mean, math.sqrt(var), n)


def role_rewards(results: Sequence[EpisodeResult]) -> dict[str, RewardSummary]:
    pooled: dict[str, list[float]] = {}
    for res in results:
        for role, values in res.rewards_by_role().items():
            pooled.setdefault(role, []).extend(values)
    return {role: _summary(v) for role, v in sorted(pooled.items())}


@dataclass
class ABTestReport:
    mechanism_a: str
    mechanism_b: str
    seeds_a: list[int]
    seeds_b: list[int]
    verdicts: dict[str, Verdict]
    rewards: dict[str, dict[str, RewardSummary]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "mechanism_a": self.mechanism_a,
            "mechanism_b": self.mechanism_b,
            "seeds_a": self.seeds_a,
            "seeds_b": self.seeds_b,
            "passed": self.passed,
            "verdicts": {m: v.to_dict() for m, v in self.verdicts.items()},
            "rewards": {
                arm: {role: {"mean": s.mean, "std": s.std, "n": s.n} for role, s in roles.items()}
                for arm, roles in self.rewards.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def mechanism_id(params: Optional[MechanismParams]) -> str:
    if params is None:
        return "none"
    return json.dumps(params_to_dict(params), sort_keys=True, separators=(",", ":"))


def ab_test(
    script: Script,
    mechanism_a: Optional[MechanismParams],
    mechanism_b: Optional[MechanismParams],
    n: int,
    specs: Sequence[OracleSpec],
    *,
    seed: int = 0,
    policies: Optional[PolicyMap] = None,
    names: tuple[str, str] = ("", ""),
    script_b: Optional[Script] = None,
) -> ABTestReport:
    """Run both mechanisms on the same ``n`` seeds; arm A is the baseline.

    ``script_b`` gives arm B its own script (e.g. with a fault injected);
    by default both arms share ``script``.
    """
    if n < 2:
        raise ValueError("an A/B test needs at least two seeds per arm")
    seeds = [split_seed(seed, "abtest", i) for i in range(n)]
    res_a = run_arm(replace(script, mechanism=mechanism_a), seeds, policies)
    res_b = run_arm(replace(script_b or script, mechanism=mechanism_b), seeds, policies)
    verdicts = {}
    for spec in specs:
        base = [metric_value(r, spec) for r in res_a]
        cand = [metric_value(r, spec) for r in res_b]
        verdicts[spec.metric] = evaluate_oracle(base, cand, spec)
    return ABTestReport(
        names[0] or mechanism_id(mechanism_a),
        names[1] or mechanism_id(mechanism_b),
        seeds,
        list(seeds),
        verdicts,
        {"A": role_rewards(res_a), "B": role_rewards(res_b)},
    )


# --- calibration --------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationRow:
    repetition: int
    metric: str
    change: float
    p_value: float
    passed: bool


def fault_harness(
    script: Script,
    fault_id: Optional[str],
    spec: OracleSpec,
    n: int,
    repetitions: int,
    *,
    seed: int = 0,
    policies: Optional[PolicyMap] = None,
    paired: bool = True,
) -> list[CalibrationRow]:
    """Repeat a baseline-versus-candidate comparison.

    The candidate arm carries ``fault_id`` (None for a no-fault null run).
    ``paired`` reuses the baseline seeds for the candidate; otherwise each
    arm draws its own seeds, which is what a null calibration needs, since
    identical seeds and no fault would give identical arms.
    """
    candidate = inject_fault(script, fault_id) if fault_id else script
    rows = []
    for rep in range(repetitions):
        seeds_a = [split_seed(seed, "harness", rep, "a", i) for i in range(n)]
        seeds_b = seeds_a if paired else [split_seed(seed, "harness", rep, "b", i) for i in range(n)]
        base = [metric_value(r, spec) for r in run_arm(script, seeds_a, policies)]
        cand = [metric_value(r, spec) for r in run_arm(candidate, seeds_b, policies)]
        v = evaluate_oracle(base, cand, spec)
        rows.append(CalibrationRow(rep, spec.metric, v.change, v.p_value, v.passed))
    return rows


def calibration_csv(rows: Sequence[CalibrationRow]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["repetition", "metric", "change", "p", "verdict"])
    for r in rows:
        w.writerow([r.repetition, r.metric, repr(r.change), repr(r.p_value), "pass" if r.passed else "fail"])
    return out.getvalue()
