"""The episode loop: advance virtual time, run the next bot through the
mechanism and platform, record everything, stop on the objective."""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional, Union

from ..agents.actuators import build_action, observation_plan
from ..agents.features import featurize
from ..agents.memory import BotMemory
from ..agents.policies import Policy, QPolicy, RandomPolicy, RuleBasedPolicy, update_policy
from ..agents.rewards import RewardTracker, make_tracker, should_see
from ..graphgen import generate
from ..log import DENIED_PREFIX, LogRecord
from ..mechanism import RATE_MAX, Allow, Deny, MechanismParams, RateLedger, Transform, mediate_action, mediate_observation
from ..platform.core import OK, FaultConfig, apply_action, observe, visible_events
from ..platform.errors import PlatformError
from ..platform.hashing import world_hash
from ..platform.model import BotClass, SendFriendRequest, SendMessage, WorldState
from ..seeding import split_seed, stream
from .monitor import Monitor, metrics_csv, record_metric
from .script import BotSpec, Episodes, Objective, Results, Script, ScriptInvalid, Steps, Time, UnknownPredicate, resolve_roster


@dataclass
class VirtualClock:
    """Current tick plus a (ready tick, user id) priority queue."""

    tick: int = 0
    queue: list[tuple[int, int]] = field(default_factory=list)

    def schedule(self, uid: int, tick: int) -> None:
        heapq.heappush(self.queue, (tick, uid))

    def peek(self) -> Optional[tuple[int, int]]:
        return self.queue[0] if self.queue else None

    def advance(self, tick: int) -> None:
        if tick < self.tick:
            raise ValueError("the clock never runs backwards")
        self.tick = tick


def next_bot(clock: VirtualClock) -> tuple[int, int]:
    """Pop the bot with the smallest ready tick (ties: lower user id) and jump the clock there."""
    tick, uid = heapq.heappop(clock.queue)
    clock.advance(max(tick, clock.tick))
    return uid, clock.tick


def objective_reached(objective: Objective, monitor: Monitor, clock: VirtualClock) -> bool:
    if isinstance(objective, Time):
        return clock.tick >= objective.ticks
    if isinstance(objective, Steps):
        return monitor.actions >= objective.actions
    if isinstance(objective, Episodes):
        return False
    if isinstance(objective, Results):
        if objective.metric not in monitor.series:
            raise UnknownPredicate(f"metric {objective.metric!r} is not recorded")
        return monitor.total(objective.metric) >= objective.threshold
    raise UnknownPredicate(f"unknown objective {objective!r}")


@dataclass
class EpisodeResult:
    world_hash: str
    rewards: dict[int, float]
    metrics: dict[str, list[tuple[int, float]]]
    log: list[LogRecord]
    objective_reached: bool
    ticks: int
    actions: int
    seed: int
    roster: tuple[BotSpec, ...] = ()
    world: Optional[WorldState] = field(default=None, repr=False, compare=False)

    @property
    def capped(self) -> bool:
        return not self.objective_reached

    def total(self, metric: str) -> float:
        return sum(v for _, v in self.metrics.get(metric, ()))

    def rewards_by_role(self) -> dict[str, list[float]]:
        out: dict[str, list[float]] = {}
        for bot in self.roster:
            out.setdefault(bot.role, []).append(self.rewards[bot.user])
        return out

    def log_jsonl(self) -> str:
        return "".join(rec.to_json() + "\n" for rec in self.log)

    def metrics_csv(self) -> str:
        return metrics_csv(self.metrics)

    def summary(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "world_hash": self.world_hash,
            "objective_reached": self.objective_reached,
            "max_ticks_hit": self.capped,
            "ticks": self.ticks,
            "actions": self.actions,
            "events": sum(1 for r in self.log if r.is_action and r.ok),
            "rewards": {str(u): r for u, r in sorted(self.rewards.items())},
            "metric_totals": {m: self.total(m) for m in sorted(self.metrics)},
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


PolicyMap = Mapping[Union[int, str], Policy]


def make_policy(bot: BotSpec) -> Policy:
    p = bot.policy
    if p.kind == "random":
        return RandomPolicy(bot.repertoire)
    if p.kind == "rule":
        return RuleBasedPolicy(p.rule_set, bot.repertoire, p.accept_prob, p.reply_prob, p.message_prob, p.request_prob)
    if p.kind == "rl":
        return QPolicy(bot.repertoire, p.rl)
    raise ScriptInvalid(f"policy kind {p.kind!r} cannot be instantiated")


@dataclass
class _Bot:
    spec: BotSpec
    policy: Policy
    memory: BotMemory
    rng: random.Random
    mechanism: Optional[MechanismParams]
    tracker: RewardTracker
    prev: Optional[tuple[int, int, float]] = None


def _budget(mech: Optional[MechanismParams], ledger: RateLedger, bot: _Bot, tick: int) -> int:
    if mech is None:
        return RATE_MAX
    left = [ledger.remaining(mech, bot.spec.user, a, tick) for a in bot.spec.repertoire if mech.action_mask[a]]
    return min(left) if left else 0


class _Episode:
    def __init__(self, script: Script, seed: int, policies: PolicyMap, learn: bool, faults: FaultConfig):
        self.script = script
        self.seed = seed
        self.learn = learn
        self.faults = replace(faults, seed=split_seed(seed, "faults")) if faults.active else faults
        self.world = generate(script.graph)
        self.vulnerable = frozenset(u for u, user in self.world.users.items() if user.vulnerable)
        self.roster = resolve_roster(script, self.world)
        self.monitor = Monitor(tuple(script.metrics))
        self.metric_on = set(script.metrics)
        self.ledger = RateLedger()
        self.clock = VirtualClock()
        self.scam_contacts: set[tuple[int, int]] = set()
        groups = tuple(sorted(self.world.groups))
        self.bots: dict[int, _Bot] = {}
        for spec in self.roster:
            policy = policies.get(spec.user, policies.get(spec.role)) if spec.policy.kind == "rl" else None
            if policy is None:
                policy = make_policy(spec)
            mech = script.mechanism if script.mechanism is not None else spec.mechanism
            memory = BotMemory(spec.user, n_users=len(self.world.users), group_ids=groups)
            tracker = make_tracker(spec.reward, spec.user, self.world, script.c_denied)
            self.bots[spec.user] = _Bot(spec, policy, memory, stream(seed, "bot", spec.user), mech, tracker)
            self.clock.schedule(spec.user, 0)

    # -- bookkeeping --------------------------------------------------------

    def _metric(self, name: str, tick: int, value: float = 1.0) -> None:
        if name in self.metric_on:
            record_metric(self.monitor, name, tick, value)

    def _record(self, bot: _Bot, rec: LogRecord) -> float:
        self.monitor.append(rec)
        return bot.tracker.step(rec, self.world)

    # -- one turn -----------------------------------------------------------

    def _observe(self, bot: _Bot, tick: int) -> float:
        spec, mem = bot.spec, bot.memory
        reward = 0.0
        plan = observation_plan(spec.role, mem, bot.rng)[: self.script.observations_per_turn]
        for query in plan:
            if bot.mechanism is not None:
                decision = mediate_observation(bot.mechanism, spec.user, query)
                if isinstance(decision, Transform):
                    query = decision.query
            try:
                result = observe(self.world, spec.user, spec.bot_class, query, faults=self.faults)
            except PlatformError as exc:
                rec = LogRecord(len(self.monitor.log), tick, spec.user, query, exc.outcome, (), spec.origin.value)
                reward += self._record(bot, rec)
                continue
            rec = LogRecord(len(self.monitor.log), tick, spec.user, query, OK, (), spec.origin.value, result.entities)
            if "privacy_violations" in self.metric_on:
                bad = sum(1 for e in result.entities if not should_see(self.world, spec.user, e))
                if bad:
                    self._metric("privacy_violations", tick, float(bad))
            reward += self._record(bot, rec)
            mem.absorb(result)
        return reward

    def _act(self, bot: _Bot, tick: int, reward: float) -> int:
        spec, mem = bot.spec, bot.memory
        policy = bot.policy
        state = featurize(mem, _budget(bot.mechanism, self.ledger, bot, tick))
        if isinstance(policy, RuleBasedPolicy):
            action, ordinal = policy.act(mem, bot.rng), None
        else:
            ordinal = policy.choose(state, bot.rng)
            action = build_action(ordinal, mem, bot.rng, spec.role)
        if self.learn and isinstance(policy, QPolicy) and bot.prev is not None:
            s, a, r = bot.prev
            update_policy(policy, s, a, r, state.index, ordinal)

        decision = Allow(1) if bot.mechanism is None else mediate_action(bot.mechanism, self.ledger, spec.user, action, tick)
        seq = len(self.monitor.log)
        if isinstance(decision, Deny):
            rec = LogRecord(seq, tick, spec.user, action, DENIED_PREFIX + decision.reason, (), spec.origin.value)
            cost = 1
            self._metric("actions_denied", tick)
        else:
            out = apply_action(self.world, spec.user, spec.bot_class, action, tick, origin=spec.origin, faults=self.faults)
            ev = out.events[0] if out.events else None
            rec = LogRecord(
                seq, tick, spec.user, action, out.status,
                ev.visibility if ev else (), spec.origin.value, ev.affected if ev else (),
            )
            cost = decision.cost
            mem.after_action(action, out.status)
            if out.status == OK:
                if isinstance(action, SendMessage):
                    self._metric("messages_sent", tick)
                    key = (spec.user, action.to)
                    if spec.role == "scammer" and action.to in self.vulnerable and key not in self.scam_contacts:
                        self.scam_contacts.add(key)
                        self._metric("scam_contacts", tick)
                elif isinstance(action, SendFriendRequest):
                    self._metric("requests_sent", tick)
        reward += self._record(bot, rec)
        if isinstance(policy, QPolicy):
            bot.prev = (state.index, ordinal, reward)
        return cost

    def _turn(self, uid: int, tick: int) -> None:
        bot = self.bots[uid]
        bot.memory.ingest(visible_events(self.world, uid, bot.memory.cursor))
        reward = self._observe(bot, tick)
        if bot.spec.bot_class is BotClass.READ_ONLY or not bot.spec.repertoire:
            self.clock.schedule(uid, tick + 1)
            return
        cost = self._act(bot, tick, reward)
        self.clock.schedule(uid, tick + cost)

    # -- loop -----------------------------------------------------------------

    def run(self) -> EpisodeResult:
        script, clock = self.script, self.clock
        objective = script.objective
        reached = objective_reached(objective, self.monitor, clock)
        while not reached:
            head = clock.peek()
            target = script.max_ticks if head is None else min(head[0], script.max_ticks)
            if isinstance(objective, Time):
                target = min(target, objective.ticks)
            clock.advance(max(target, clock.tick))
            reached = objective_reached(objective, self.monitor, clock)
            if reached or clock.tick >= script.max_ticks:
                break
            uid, tick = next_bot(clock)
            self._turn(uid, tick)
            reached = objective_reached(objective, self.monitor, clock)
        if self.learn:
            for bot in self.bots.values():
                if isinstance(bot.policy, QPolicy) and bot.prev is not None:
                    s, a, r = bot.prev
                    update_policy(bot.policy, s, a, r, None)
        return EpisodeResult(
            world_hash=world_hash(self.world),
            rewards={uid: bot.tracker.total for uid, bot in sorted(self.bots.items())},
            metrics={m: list(v) for m, v in self.monitor.series.items()},
            log=self.monitor.log,
            objective_reached=reached,
            ticks=clock.tick,
            actions=self.monitor.actions,
            seed=self.seed,
            roster=self.roster,
            world=self.world,
        )


def run_script(
    script: Script,
    seed: Optional[int] = None,
    *,
    policies: Optional[PolicyMap] = None,
    learn: bool = False,
    faults: Optional[FaultConfig] = None,
) -> EpisodeResult:
    """Run one episode.  Deterministic in (script, seed, policies).

    ``policies`` supplies RL policies by user id or role; with ``learn`` they
    are updated online (SARSA or Q-learning per their parameters).
    """
    script.validate()
    seed = script.seed if seed is None else seed
    episode = _Episode(script, seed, policies or {}, learn, script.faults if faults is None else faults)
    return episode.run()
