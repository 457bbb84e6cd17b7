"""Strict configuration documents for every subcommand.

Unknown fields are rejected and every document names its schema version, so
a config either means exactly one experiment or fails to load.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..agents.policies import RLParams
from ..graphgen import ErdosRenyi, GraphSpec, GroupSpec, PreferentialAttachment, Ring
from ..mechanism import ACTION_BY_NAME, GENE_INDEX, GenomeSpace, MechanismParams, params_from_dict
from ..platform.model import BotClass, Origin
from ..runner.scenarios import SCENARIOS
from ..runner.script import Episodes, PolicySpec, Results, RosterEntry, Script, Steps, Time
from ..socialtest import OracleSpec, inject_fault

SCHEMA_VERSION = 1


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GraphModelConfig(Strict):
    kind: Literal["preferential_attachment", "erdos_renyi", "ring"] = "preferential_attachment"
    m: Optional[int] = None
    p: Optional[float] = None
    k: Optional[int] = None

    @model_validator(mode="after")
    def _one_parameter(self):
        need = {"preferential_attachment": "m", "erdos_renyi": "p", "ring": "k"}[self.kind]
        for name in ("m", "p", "k"):
            if (getattr(self, name) is None) == (name == need):
                raise ValueError(f"{self.kind} takes exactly the parameter {need!r}")
        return self

    def build(self):
        if self.kind == "preferential_attachment":
            return PreferentialAttachment(self.m)
        if self.kind == "erdos_renyi":
            return ErdosRenyi(self.p)
        return Ring(self.k)


class GroupConfig(Strict):
    count: int = 0
    membership: float = 0.0


class GraphConfig(Strict):
    n_users: int
    model: GraphModelConfig = GraphModelConfig(m=1)
    vulnerability: float = 0.0
    n_vulnerable: Optional[int] = None
    bad_actors: int = 0
    groups: GroupConfig = GroupConfig()
    profile_privacy: tuple[float, float, float] = (1.0, 0.0, 0.0)
    n_protected: int = 0
    cross_partition_edges: bool = False
    seed: int = 0

    def build(self) -> GraphSpec:
        spec = GraphSpec(
            n_users=self.n_users,
            model=self.model.build(),
            vulnerability=self.vulnerability,
            n_vulnerable=self.n_vulnerable,
            bad_actors=self.bad_actors,
            groups=GroupSpec(self.groups.count, self.groups.membership),
            profile_privacy=tuple(self.profile_privacy),
            n_protected=self.n_protected,
            cross_partition_edges=self.cross_partition_edges,
            seed=self.seed,
        )
        spec.validate()
        return spec


class GraphDocument(Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    graph: GraphConfig


class RateLimitConfig(Strict):
    window: int = 1
    max: int = 16


class MechanismConfig(Strict):
    """Omitted entries keep their identity (unrestricted) values."""

    rate_limits: dict[str, RateLimitConfig] = Field(default_factory=dict)
    search_result_cap: Optional[int] = None
    visibility_hops: Optional[int] = None
    action_mask: dict[str, bool] = Field(default_factory=dict)
    action_cost: dict[str, int] = Field(default_factory=dict)

    def build(self) -> MechanismParams:
        data = self.model_dump(exclude_none=True)
        return params_from_dict(data)


class RLConfig(Strict):
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.1
    update: Literal["sarsa", "qlearning"] = "sarsa"


class PolicyConfig(Strict):
    kind: Literal["random", "rule", "rl", "policy_gradient"] = "random"
    rule_set: Literal["normal", "target"] = "normal"
    rl: RLConfig = RLConfig()
    accept_prob: float = 1.0
    reply_prob: float = 0.5
    message_prob: float = 0.5
    request_prob: float = 0.05

    def build(self) -> PolicySpec:
        rl = RLParams(**self.rl.model_dump())
        rl.validate()
        return PolicySpec(self.kind, self.rule_set, rl, self.accept_prob, self.reply_prob, self.message_prob, self.request_prob)


class RosterConfig(Strict):
    select: str
    role: str = "normal"
    bot_class: Literal["read_only", "writer", "fully_isolated"] = "writer"
    policy: PolicyConfig = PolicyConfig()
    reward: str = "none"
    mechanism: Optional[MechanismConfig] = None
    repertoire: Optional[list[str]] = None
    origin: Literal["bot", "real_user"] = "bot"

    def build(self) -> RosterEntry:
        repertoire = None
        if self.repertoire is not None:
            unknown = [a for a in self.repertoire if a not in ACTION_BY_NAME]
            if unknown:
                raise ValueError(f"unknown actions in repertoire: {unknown}")
            repertoire = tuple(int(ACTION_BY_NAME[a]) for a in self.repertoire)
        return RosterEntry(
            self.select,
            self.role,
            BotClass(self.bot_class),
            self.policy.build(),
            self.reward,
            self.mechanism.build() if self.mechanism else None,
            repertoire,
            Origin(self.origin),
        )


class ObjectiveConfig(Strict):
    kind: Literal["time", "steps", "episodes", "results"]
    value: float
    metric: Optional[str] = None

    def build(self):
        if self.kind == "results":
            if self.metric is None:
                raise ValueError("a results objective names its metric")
            return Results(self.metric, self.value)
        if self.metric is not None:
            raise ValueError("only results objectives take a metric")
        if self.value != int(self.value):
            raise ValueError(f"{self.kind} objective needs an integer value")
        return {"time": Time, "steps": Steps, "episodes": Episodes}[self.kind](int(self.value))


class ScriptConfig(Strict):
    graph: GraphConfig
    roster: list[RosterConfig] = Field(default_factory=list)
    objective: ObjectiveConfig = ObjectiveConfig(kind="time", value=10)
    mechanism: Optional[MechanismConfig] = None
    metrics: Optional[list[str]] = None
    max_ticks: int = 100
    seed: int = 0
    observations_per_turn: int = 3
    faults: list[str] = Field(default_factory=list)
    c_denied: float = 0.1

    def build(self) -> Script:
        kwargs = {}
        if self.metrics is not None:
            kwargs["metrics"] = tuple(self.metrics)
        script = Script(
            graph=self.graph.build(),
            roster=tuple(r.build() for r in self.roster),
            objective=self.objective.build(),
            mechanism=self.mechanism.build() if self.mechanism else None,
            max_ticks=self.max_ticks,
            seed=self.seed,
            observations_per_turn=self.observations_per_turn,
            c_denied=self.c_denied,
            **kwargs,
        )
        for fault in self.faults:
            script = inject_fault(script, fault)
        script.validate()
        return script


class ScenarioRef(Strict):
    """A named built-in scenario instead of a spelled-out script."""

    scenario: Literal["scammer", "privacy", "data", "isolation"]
    graph_seed: int = 0
    ticks: Optional[int] = None

    def build(self) -> Script:
        kwargs = {"ticks": self.ticks} if self.ticks is not None else {}
        return SCENARIOS[self.scenario](self.graph_seed, **kwargs)


ScriptSource = Union[ScenarioRef, ScriptConfig]


class RunDocument(Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    script: ScriptSource
    seed: Optional[int] = None


class TrainDocument(Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    script: ScriptSource
    episodes: int = 500
    seed: int = 0
    policy: Optional[str] = None


class BoundConfig(Strict):
    gene: str
    low: int
    high: int


class SpaceConfig(Strict):
    genes: Optional[list[str]] = None
    bounds: list[BoundConfig] = Field(default_factory=list)
    base: Optional[MechanismConfig] = None

    def build(self) -> GenomeSpace:
        if self.genes is not None:
            unknown = [g for g in self.genes if g not in GENE_INDEX]
            if unknown:
                raise ValueError(f"unknown genes {unknown}")
        space = GenomeSpace(
            self.base.build() if self.base else MechanismParams(),
            tuple(self.genes) if self.genes is not None else None,
            tuple((b.gene, b.low, b.high) for b in self.bounds),
        )
        space.free  # validates names and bounds
        return space


class OptimizeDocument(Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    script: ScriptSource
    space: SpaceConfig = SpaceConfig()
    population: int = 16
    generations: int = 20
    eval_seeds: int = 5
    train_episodes: int = 500
    policy: Optional[str] = None
    seed: int = 0

    @model_validator(mode="after")
    def _sizes(self):
        if self.population < 2 or self.population % 2:
            raise ValueError("population must be even and at least 2")
        if self.generations < 0 or self.eval_seeds < 1 or self.train_episodes < 0:
            raise ValueError("generations, eval_seeds and train_episodes out of range")
        return self


class CoevolveDocument(Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    script: ScriptSource
    space: SpaceConfig = SpaceConfig()
    rounds: int = 3
    generations: int = 5
    retrain_episodes: int = 100
    population: int = 8
    seeds_per_eval: int = 3
    pretrain_episodes: int = 300
    policy: Optional[str] = None
    seed: int = 0


class OracleConfig(Strict):
    metric: str
    aggregation: Literal["final", "per_tick_mean"] = "final"
    direction: Literal["drop", "rise"] = "drop"
    theta: float = 0.2
    alpha: float = 0.05

    def build(self) -> OracleSpec:
        spec = OracleSpec(self.metric, self.aggregation, self.direction, self.theta, self.alpha)
        spec.validate()
        return spec


class ABTestDocument(Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    script: ScriptSource
    mechanism_a: Optional[MechanismConfig] = None
    mechanism_b: Optional[MechanismConfig] = None
    n: int = 20
    oracles: list[OracleConfig]
    fault_b: Optional[str] = None
    train_episodes: int = 0
    policy: Optional[str] = None
    seed: int = 0

    @model_validator(mode="after")
    def _n(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        return self


DOCUMENTS = {
    "gen-graph": GraphDocument,
    "run": RunDocument,
    "train": TrainDocument,
    "optimize": OptimizeDocument,
    "coevolve": CoevolveDocument,
    "abtest": ABTestDocument,
}
