"""The mediation layer between bots and the platform.

A :class:`MechanismParams` restricts what bots may do (masks, sliding-window
rate limits, per-action tick costs) and narrows what they may see (search
result cap, social-graph radius of search).  The same parameters, flattened
by :class:`GenomeSpace`, are the search space for mechanism design.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .platform.model import N_ACTIONS, Action, ActionType, Query, SearchUsers

WINDOW_MAX = 16
RATE_MAX = 16  # >= WINDOW_MAX, so max=RATE_MAX never binds when costs are >= 1
COST_MAX = 4
SEARCH_CAP_MAX = 32  # value at the bound means "no cap"
HOPS_MAX = 4  # value at the bound means "no radius limit"


class OutOfBounds(ValueError):
    pass


@dataclass(frozen=True)
class RateLimit:
    window: int = 1
    max: int = RATE_MAX


@dataclass(frozen=True)
class MechanismParams:
    rate_limits: tuple[RateLimit, ...] = tuple(RateLimit() for _ in range(N_ACTIONS))
    search_result_cap: int = SEARCH_CAP_MAX
    visibility_hops: int = HOPS_MAX
    action_mask: tuple[bool, ...] = (True,) * N_ACTIONS
    action_cost: tuple[int, ...] = (1,) * N_ACTIONS

    def validate(self) -> None:
        if not (len(self.rate_limits) == len(self.action_mask) == len(self.action_cost) == N_ACTIONS):
            raise OutOfBounds("one rate limit, mask bit and cost per action type")
        for rl in self.rate_limits:
            if not 1 <= rl.window <= WINDOW_MAX or not 0 <= rl.max <= RATE_MAX:
                raise OutOfBounds(f"rate limit {rl} outside bounds")
        for c in self.action_cost:
            if not 1 <= c <= COST_MAX:
                raise OutOfBounds(f"action cost {c} outside [1, {COST_MAX}]")
        if not 0 <= self.search_result_cap <= SEARCH_CAP_MAX:
            raise OutOfBounds("search_result_cap outside bounds")
        if not 0 <= self.visibility_hops <= HOPS_MAX:
            raise OutOfBounds("visibility_hops outside bounds")

    def with_rate_limit(self, action: ActionType, window: int, max: int) -> "MechanismParams":
        limits = list(self.rate_limits)
        limits[action] = RateLimit(window, max)
        return replace(self, rate_limits=tuple(limits))

    def with_mask(self, action: ActionType, allowed: bool) -> "MechanismParams":
        mask = list(self.action_mask)
        mask[action] = allowed
        return replace(self, action_mask=tuple(mask))

    def with_cost(self, action: ActionType, cost: int) -> "MechanismParams":
        costs = list(self.action_cost)
        costs[action] = cost
        return replace(self, action_cost=tuple(costs))


def identity_params() -> MechanismParams:
    return MechanismParams()


# --- decisions ----------------------------------------------------------------

RATE_LIMITED = "RateLimited"
MASKED = "Masked"


@dataclass(frozen=True)
class Allow:
    cost: int = 1


@dataclass(frozen=True)
class Deny:
    reason: str


@dataclass(frozen=True)
class Transform:
    query: Query


MechanismDecision = Union[Allow, Deny, Transform]


@dataclass
class RateLedger:
    """Per (actor, action type) record of allowed vtimes; episode-local."""

    history: dict[tuple[int, int], deque] = field(default_factory=dict)

    def count(self, actor: int, ordinal: int, vtime: int, window: int) -> int:
        dq = self.history.get((actor, ordinal))
        if not dq:
            return 0
        while dq and dq[0] <= vtime - window:
            dq.popleft()
        return len(dq)

    def record(self, actor: int, ordinal: int, vtime: int) -> None:
        self.history.setdefault((actor, ordinal), deque()).append(vtime)

    def remaining(self, params: MechanismParams, actor: int, ordinal: int, vtime: int) -> int:
        rl = params.rate_limits[ordinal]
        return max(0, rl.max - self.count(actor, ordinal, vtime, rl.window))


def mediate_action(params: MechanismParams, ledger: RateLedger, actor: int, action: Action, vtime: int) -> MechanismDecision:
    """Allow iff the action type is unmasked and the actor's allowed count of
    that type within ticks (vtime - window, vtime] is below the limit.  Only
    an Allow is recorded in the ledger."""
    ordinal = int(action.ordinal)
    if not params.action_mask[ordinal]:
        return Deny(MASKED)
    rl = params.rate_limits[ordinal]
    if ledger.count(actor, ordinal, vtime, rl.window) >= rl.max:
        return Deny(RATE_LIMITED)
    ledger.record(actor, ordinal, vtime)
    return Allow(params.action_cost[ordinal])


def mediate_observation(params: MechanismParams, actor: int, query: Query) -> MechanismDecision:
    if not isinstance(query, SearchUsers):
        return Allow(0)
    limit = query.limit
    hops = query.within_hops
    if params.search_result_cap < SEARCH_CAP_MAX:
        limit = min(limit, params.search_result_cap)
    if params.visibility_hops < HOPS_MAX:
        hops = params.visibility_hops if hops is None else min(hops, params.visibility_hops)
    if limit == query.limit and hops == query.within_hops:
        return Allow(0)
    return Transform(SearchUsers(query.trait, limit, hops))


# --- genome -------------------------------------------------------------------


@dataclass(frozen=True)
class Gene:
    """One integer gene.  ``inverted`` genes store low + high - value so that
    the upper bound is always the most permissive setting."""

    name: str
    low: int
    high: int
    inverted: bool = False


def _full_bounds() -> tuple[Gene, ...]:
    genes = []
    for a in ActionType:
        n = _action_name(a)
        genes.append(Gene(f"{n}.mask", 0, 1))
        genes.append(Gene(f"{n}.max", 0, RATE_MAX))
        genes.append(Gene(f"{n}.window", 1, WINDOW_MAX, inverted=True))
        genes.append(Gene(f"{n}.cost", 1, COST_MAX, inverted=True))
    genes.append(Gene("search_result_cap", 0, SEARCH_CAP_MAX))
    genes.append(Gene("visibility_hops", 0, HOPS_MAX))
    return tuple(genes)


def _action_name(a: ActionType) -> str:
    return "".join(part.capitalize() for part in a.name.split("_"))


ACTION_NAMES = {a: _action_name(a) for a in ActionType}
ACTION_BY_NAME = {v: k for k, v in ACTION_NAMES.items()}
GENOME_BOUNDS: tuple[Gene, ...] = _full_bounds()
GENE_INDEX = {g.name: i for i, g in enumerate(GENOME_BOUNDS)}


def _raw_values(params: MechanismParams) -> list[int]:
    raw = []
    for a in ActionType:
        rl = params.rate_limits[a]
        raw.extend([int(params.action_mask[a]), rl.max, rl.window, params.action_cost[a]])
    raw.extend([params.search_result_cap, params.visibility_hops])
    return raw


def encode(params: MechanismParams) -> np.ndarray:
    params.validate()
    return np.array(
        [g.low + g.high - v if g.inverted else v for g, v in zip(GENOME_BOUNDS, _raw_values(params))], dtype=np.int64
    )


def decode(genome: Sequence[int]) -> MechanismParams:
    values = [int(v) for v in genome]
    if len(values) != len(GENOME_BOUNDS):
        raise OutOfBounds(f"genome has {len(values)} genes, expected {len(GENOME_BOUNDS)}")
    raw = []
    for g, v in zip(GENOME_BOUNDS, values):
        if not g.low <= v <= g.high:
            raise OutOfBounds(f"gene {g.name}={v} outside [{g.low}, {g.high}]")
        raw.append(g.low + g.high - v if g.inverted else v)
    limits, masks, costs = [], [], []
    for i in range(N_ACTIONS):
        mask, mx, window, cost = raw[4 * i : 4 * i + 4]
        masks.append(bool(mask))
        limits.append(RateLimit(window, mx))
        costs.append(cost)
    return MechanismParams(tuple(limits), raw[-2], raw[-1], tuple(masks), tuple(costs))


@dataclass(frozen=True)
class GenomeSpace:
    """A searchable slice of the full genome.

    ``genes`` names the free genes (all of them when None); every other gene
    is pinned to its value in ``base``.  ``bounds`` narrows free genes.
    """

    base: MechanismParams = field(default_factory=identity_params)
    genes: Optional[tuple[str, ...]] = None
    bounds: tuple[tuple[str, int, int], ...] = ()

    @property
    def free(self) -> tuple[Gene, ...]:
        names = self.genes if self.genes is not None else tuple(g.name for g in GENOME_BOUNDS)
        override = {name: (lo, hi) for name, lo, hi in self.bounds}
        out = []
        for name in names:
            if name not in GENE_INDEX:
                raise OutOfBounds(f"unknown gene {name!r}")
            g = GENOME_BOUNDS[GENE_INDEX[name]]
            lo, hi = override.get(name, (g.low, g.high))
            if not g.low <= lo <= hi <= g.high:
                raise OutOfBounds(f"bounds for {name} must nest inside [{g.low}, {g.high}]")
            out.append(Gene(name, lo, hi, g.inverted))
        return tuple(out)

    @property
    def lows(self) -> np.ndarray:
        return np.array([g.low for g in self.free], dtype=np.int64)

    @property
    def highs(self) -> np.ndarray:
        return np.array([g.high for g in self.free], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.free)

    def size(self) -> int:
        return int(np.prod([g.high - g.low + 1 for g in self.free], dtype=object))

    def contains(self, genome: Sequence[int]) -> bool:
        g = np.asarray(genome)
        return g.shape == (len(self),) and bool(np.all(g >= self.lows) and np.all(g <= self.highs))

    def decode(self, genome: Sequence[int]) -> MechanismParams:
        if not self.contains(genome):
            raise OutOfBounds(f"genome {list(genome)} outside the search space")
        full = encode(self.base)
        for gene, value in zip(self.free, genome):
            full[GENE_INDEX[gene.name]] = int(value)
        return decode(full)

    def encode(self, params: MechanismParams) -> tuple[int, ...]:
        full = encode(params)
        return tuple(int(full[GENE_INDEX[g.name]]) for g in self.free)

    def random(self, rng: np.random.Generator) -> tuple[int, ...]:
        return tuple(int(v) for v in rng.integers(self.lows, self.highs + 1))

    def enumerate(self):
        """Every genome of the space, in lexicographic order."""
        ranges = [range(g.low, g.high + 1) for g in self.free]
        return [tuple(p) for p in itertools.product(*ranges)]


# --- plain-data form -------------------------------------------------------------


def params_to_dict(params: MechanismParams) -> dict:
    return {
        "rate_limits": {ACTION_NAMES[a]: {"window": rl.window, "max": rl.max} for a, rl in zip(ActionType, params.rate_limits)},
        "search_result_cap": params.search_result_cap,
        "visibility_hops": params.visibility_hops,
        "action_mask": {ACTION_NAMES[a]: m for a, m in zip(ActionType, params.action_mask)},
        "action_cost": {ACTION_NAMES[a]: c for a, c in zip(ActionType, params.action_cost)},
    }


def params_from_dict(data: dict) -> MechanismParams:
    """Inverse of :func:`params_to_dict`; omitted entries keep identity values."""
    base = identity_params()
    known = {"rate_limits", "search_result_cap", "visibility_hops", "action_mask", "action_cost"}
    extra = set(data) - known
    if extra:
        raise OutOfBounds(f"unknown mechanism fields {sorted(extra)}")

    def per_action(key: str, default: tuple) -> list:
        values = list(default)
        for name, v in data.get(key, {}).items():
            if name not in ACTION_BY_NAME:
                raise OutOfBounds(f"unknown action {name!r}")
            values[ACTION_BY_NAME[name]] = v
        return values

    limits = [rl if isinstance(rl, RateLimit) else RateLimit(int(rl["window"]), int(rl["max"])) for rl in per_action("rate_limits", base.rate_limits)]
    params = MechanismParams(
        tuple(limits),
        int(data.get("search_result_cap", base.search_result_cap)),
        int(data.get("visibility_hops", base.visibility_hops)),
        tuple(bool(m) for m in per_action("action_mask", base.action_mask)),
        tuple(int(c) for c in per_action("action_cost", base.action_cost)),
    )
    params.validate()
    return params
