"""Per-role reward functions.

Each reward is a pure function of the episode log (plus the initial world
for the ones that need ground truth).  The runner computes the same values
online by feeding records to a :class:`RewardTracker` as they are written.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional

from ..log import LogRecord
from ..platform.core import replay
from ..platform.model import (
    AcceptFriendRequest,
    CreatePost,
    Message,
    SendMessage,
    Visibility,
    WorldState,
)

C_DENIED = 0.1
ROUTINE = (SendMessage, CreatePost, AcceptFriendRequest)
REWARD_IDS = ("scammer", "normal", "privacy", "data", "none")


def should_see(world: WorldState, viewer: int, eid: int) -> bool:
    """Brute-force policy checker, written apart from the platform's evaluator.

    Friendship is decided by scanning the edge list, ownership from the raw
    entity tables, and group visibility from the member table.
    """
    if eid in world.messages:
        m: Message = world.messages[eid]
        return viewer in (m.sender, m.recipient)
    if eid in world.users:
        owner = world.users[eid].id
    elif eid in world.posts:
        owner = world.posts[eid].author
    elif eid in world.groups:
        members = world.members[eid]
        level = world.policies[eid]
        if viewer in members or level == Visibility.PUBLIC:
            return True
        if level == Visibility.FRIENDS_ONLY:
            return any((a in members and b == viewer) or (b in members and a == viewer) for a, b in world.edges())
        return False
    else:
        return False
    level = world.policies[eid]
    if viewer == owner or level == Visibility.PUBLIC:
        return True
    if level == Visibility.FRIENDS_ONLY:
        return any({a, b} == {viewer, owner} for a, b in world.edges())
    return False


class RewardTracker:
    """Incremental reward for one bot; ``step`` returns the reward of one record."""

    def __init__(self, bot: int):
        self.bot = bot

    def step(self, record: LogRecord, world: Optional[WorldState] = None) -> float:
        return 0.0

    @property
    def total(self) -> float:
        return 0.0


class ScammerReward(RewardTracker):
    def __init__(self, bot: int, vulnerable: Iterable[int], c_denied: float = C_DENIED):
        super().__init__(bot)
        self.vulnerable = frozenset(vulnerable)
        self.c_denied = c_denied
        self.contacted: set[int] = set()
        self.steps: list[float] = []

    def step(self, record: LogRecord, world: Optional[WorldState] = None) -> float:
        if record.actor != self.bot or not record.is_action:
            return 0.0
        r = 0.0
        if record.mechanism_denied:
            r = -self.c_denied
        elif record.ok and isinstance(record.action, SendMessage):
            to = record.action.to
            if to in self.vulnerable and to not in self.contacted:
                self.contacted.add(to)
                r = 1.0
        self.steps.append(r)
        return r

    @property
    def total(self) -> float:
        return math.fsum(self.steps)


class NormalUtility(RewardTracker):
    def __init__(self, bot: int):
        super().__init__(bot)
        self.attempted = 0
        self.allowed = 0

    def step(self, record: LogRecord, world: Optional[WorldState] = None) -> float:
        if record.actor == self.bot and isinstance(record.action, ROUTINE):
            self.attempted += 1
            self.allowed += not record.mechanism_denied
        return 0.0

    @property
    def total(self) -> float:
        return self.allowed / self.attempted if self.attempted else 1.0


class PrivacyViolations(RewardTracker):
    """Needs the world as it stood when the observation ran."""

    def __init__(self, bot: int):
        super().__init__(bot)
        self.count = 0

    def step(self, record: LogRecord, world: Optional[WorldState] = None) -> float:
        if record.actor != self.bot or record.is_action or not record.ok:
            return 0.0
        bad = sum(1 for e in record.entities if not should_see(world, self.bot, e))
        self.count += bad
        return float(bad)

    @property
    def total(self) -> float:
        return float(self.count)


class DataAcquired(RewardTracker):
    def __init__(self, bot: int):
        super().__init__(bot)
        self.seen: set[int] = set()

    def step(self, record: LogRecord, world: Optional[WorldState] = None) -> float:
        if record.actor != self.bot or record.is_action or not record.ok:
            return 0.0
        before = len(self.seen)
        self.seen.update(record.entities)
        return float(len(self.seen) - before)

    @property
    def total(self) -> float:
        return float(len(self.seen))


def make_tracker(reward_id: str, bot: int, world: WorldState, c_denied: float = C_DENIED) -> RewardTracker:
    if reward_id == "scammer":
        return ScammerReward(bot, (u for u, user in world.users.items() if user.vulnerable), c_denied)
    if reward_id == "normal":
        return NormalUtility(bot)
    if reward_id == "privacy":
        return PrivacyViolations(bot)
    if reward_id == "data":
        return DataAcquired(bot)
    if reward_id == "none":
        return RewardTracker(bot)
    raise ValueError(f"unknown reward function {reward_id!r}")


# --- log-walking entry points ---------------------------------------------------


def scammer_reward(
    records: Iterable[LogRecord], bot: int, vulnerable: Iterable[int], c_denied: float = C_DENIED
) -> list[float]:
    """Reward of each action step the bot took, in log order."""
    t = ScammerReward(bot, vulnerable, c_denied)
    for rec in records:
        t.step(rec)
    return t.steps


def normal_user_utility(records: Iterable[LogRecord], bot: int) -> float:
    t = NormalUtility(bot)
    for rec in records:
        t.step(rec)
    return t.total


def privacy_violation_reward(records: Iterable[LogRecord], bot: int, initial_world: WorldState) -> float:
    """Rebuilds the world record by record so each observation is judged
    against the state it actually ran on."""
    world = initial_world.copy()
    t = PrivacyViolations(bot)
    for rec in records:
        if rec.is_action:
            replay(world, [rec])
        else:
            t.step(rec, world)
    return t.total


def data_acquisition_reward(records: Iterable[LogRecord], bot: int) -> float:
    t = DataAcquired(bot)
    for rec in records:
        t.step(rec)
    return t.total

