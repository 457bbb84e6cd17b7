"""Episode descriptions: graph, bot roster, mechanism, objective and metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..agents.actuators import ROLES
from ..agents.policies import RLParams
from ..agents.rewards import C_DENIED, REWARD_IDS
from ..graphgen import GraphSpec
from ..mechanism import MechanismParams
from ..platform.core import NO_FAULTS, FaultConfig
from ..platform.model import N_ACTIONS, BotClass, Origin, Partition, WorldState
from ..seeding import stream


class ScriptInvalid(ValueError):
    pass


class UnknownPredicate(ScriptInvalid):
    pass


BUILTIN_METRICS = ("messages_sent", "requests_sent", "scam_contacts", "actions_denied", "privacy_violations")
POLICY_KINDS = ("random", "rule", "rl", "policy_gradient")


@dataclass(frozen=True)
class Time:
    ticks: int


@dataclass(frozen=True)
class Steps:
    actions: int


@dataclass(frozen=True)
class Episodes:
    count: int


@dataclass(frozen=True)
class Results:
    metric: str
    threshold: float


Objective = Union[Time, Steps, Episodes, Results]


@dataclass(frozen=True)
class PolicySpec:
    kind: str = "random"
    rule_set: str = "normal"
    rl: RLParams = field(default_factory=RLParams)
    accept_prob: float = 1.0
    reply_prob: float = 0.5
    message_prob: float = 0.5
    request_prob: float = 0.05


@dataclass(frozen=True)
class RosterEntry:
    """A group of bots sharing one behaviour.

    ``select`` picks their users: ``bad_actors``, ``vulnerable``,
    ``protected``, ``sample:<k>`` (k synthetic users not already taken) or
    ``ids:<a>,<b>,...``.
    """

    select: str
    role: str = "normal"
    bot_class: BotClass = BotClass.WRITER
    policy: PolicySpec = field(default_factory=PolicySpec)
    reward: str = "none"
    mechanism: Optional[MechanismParams] = None
    repertoire: Optional[tuple[int, ...]] = None
    origin: Origin = Origin.BOT


@dataclass(frozen=True)
class BotSpec:
    user: int
    bot_class: BotClass
    policy: PolicySpec
    reward: str
    mechanism: Optional[MechanismParams]
    repertoire: tuple[int, ...]
    role: str
    origin: Origin = Origin.BOT

    def validate(self) -> None:
        if self.bot_class is BotClass.READ_ONLY and self.repertoire:
            raise ScriptInvalid(f"read-only bot {self.user} must have an empty repertoire")
        if self.bot_class is not BotClass.READ_ONLY and not self.repertoire:
            raise ScriptInvalid(f"acting bot {self.user} needs a non-empty repertoire")
        if any(not 0 <= a < N_ACTIONS for a in self.repertoire):
            raise ScriptInvalid("repertoire holds unknown action ordinals")


@dataclass(frozen=True)
class Script:
    graph: GraphSpec
    roster: tuple[RosterEntry, ...] = ()
    objective: Objective = field(default_factory=lambda: Time(10))
    mechanism: Optional[MechanismParams] = None
    metrics: tuple[str, ...] = BUILTIN_METRICS
    max_ticks: int = 100
    seed: int = 0
    observations_per_turn: int = 3
    faults: FaultConfig = NO_FAULTS
    c_denied: float = C_DENIED

    def validate(self) -> None:
        if self.max_ticks < 1:
            raise ScriptInvalid("max_ticks must be at least 1")
        if self.observations_per_turn < 0:
            raise ScriptInvalid("observations_per_turn must be non-negative")
        for m in self.metrics:
            if m not in BUILTIN_METRICS:
                raise ScriptInvalid(f"unknown metric {m!r}")
        obj = self.objective
        value = {Time: "ticks", Steps: "actions", Episodes: "count", Results: "threshold"}.get(type(obj))
        if value is None:
            raise ScriptInvalid(f"unknown objective {obj!r}")
        if getattr(obj, value) < 0:
            raise ScriptInvalid("objective thresholds must be non-negative")
        if isinstance(obj, Results) and obj.metric not in BUILTIN_METRICS:
            raise UnknownPredicate(f"unknown result predicate {obj.metric!r}")
        try:
            self.graph.validate()
            if self.mechanism is not None:
                self.mechanism.validate()
            for entry in self.roster:
                if entry.mechanism is not None:
                    entry.mechanism.validate()
        except ValueError as exc:
            raise ScriptInvalid(str(exc)) from exc
        for entry in self.roster:
            if entry.role not in ROLES:
                raise ScriptInvalid(f"unknown role {entry.role!r}")
            if entry.reward not in REWARD_IDS:
                raise ScriptInvalid(f"unknown reward function {entry.reward!r}")
            if entry.policy.kind not in POLICY_KINDS:
                raise ScriptInvalid(f"unknown policy kind {entry.policy.kind!r}")
            if entry.policy.kind == "policy_gradient":
                raise ScriptInvalid("policy-gradient policies are not implemented")


def _select(entry: RosterEntry, world: WorldState, taken: set[int], seed: int, index: int) -> list[int]:
    sel = entry.select
    synthetic = [u for u, user in world.users.items() if user.partition is Partition.SYNTHETIC]
    if sel == "bad_actors":
        return [u for u in synthetic if world.users[u].bad_actor]
    if sel == "vulnerable":
        return [u for u in synthetic if world.users[u].vulnerable]
    if sel == "protected":
        return [u for u, user in world.users.items() if user.partition is Partition.PROTECTED]
    if sel.startswith("sample:"):
        k = int(sel.split(":", 1)[1])
        pool = [u for u in synthetic if u not in taken and not world.users[u].bad_actor and not world.users[u].vulnerable]
        if k > len(pool):
            raise ScriptInvalid(f"cannot sample {k} users from {len(pool)} free ones")
        return sorted(stream(seed, "roster", index).sample(pool, k))
    if sel.startswith("ids:"):
        ids = [int(x) for x in sel.split(":", 1)[1].split(",") if x.strip()]
        missing = [u for u in ids if u not in world.users]
        if missing:
            raise ScriptInvalid(f"roster names unknown users {missing}")
        return ids
    raise ScriptInvalid(f"unknown roster selector {sel!r}")


def resolve_roster(script: Script, world: WorldState) -> tuple[BotSpec, ...]:
    """Bind roster entries to concrete users; each user gets at most one bot."""
    taken: set[int] = set()
    bots = []
    for index, entry in enumerate(script.roster):
        try:
            users = _select(entry, world, taken, script.graph.seed, index)
        except ValueError as exc:
            raise ScriptInvalid(str(exc)) from exc
        if entry.repertoire is not None:
            repertoire = tuple(entry.repertoire)
        elif entry.bot_class is BotClass.READ_ONLY:
            repertoire = ()
        else:
            repertoire = tuple(range(N_ACTIONS))
        for uid in users:
            if uid in taken:
                raise ScriptInvalid(f"user {uid} is assigned to two bots")
            home = world.users[uid].partition
            if entry.origin is Origin.BOT and home is not Partition.SYNTHETIC:
                raise ScriptInvalid(f"bot user {uid} must be synthetic; protected users are real-user replays")
            if entry.origin is Origin.REAL_USER and home is not Partition.PROTECTED:
                raise ScriptInvalid(f"real-user replay {uid} must live in the protected partition")
            taken.add(uid)
            spec = BotSpec(uid, entry.bot_class, entry.policy, entry.reward, entry.mechanism, repertoire, entry.role, entry.origin)
            spec.validate()
            bots.append(spec)
    return tuple(sorted(bots, key=lambda b: b.user))
