"""Random, rule-based and tabular reinforcement-learning policies."""

from __future__ import annotations

import io
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..platform.model import (
    N_ACTIONS,
    AcceptFriendRequest,
    Action,
    ActionType,
    CreatePost,
    GetMessage,
    SendMessage,
)
from .actuators import PRIVACY_LEVELS, build_action
from .features import N_STATES, StateFeatures
from .memory import BotMemory

SARSA = "sarsa"
QLEARNING = "qlearning"
SNAPSHOT_HEADER = "# wes-sim policy v1"


class EmptyRepertoire(ValueError):
    pass


@dataclass(frozen=True)
class RLParams:
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.1
    update: str = SARSA

    def validate(self) -> None:
        if self.update not in (SARSA, QLEARNING):
            raise ValueError(f"unknown update rule {self.update!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 <= self.alpha <= 1.0 or not 0.0 <= self.gamma <= 1.0:
            raise ValueError("alpha and gamma must lie in [0, 1]")


def _check_repertoire(repertoire: Sequence[int]) -> None:
    if not repertoire:
        raise EmptyRepertoire("policy has no actions to choose from")


@dataclass
class RandomPolicy:
    repertoire: tuple[int, ...] = tuple(range(N_ACTIONS))

    def choose(self, features: StateFeatures, rng: random.Random) -> int:
        _check_repertoire(self.repertoire)
        return rng.choice(self.repertoire)


@dataclass
class RuleBasedPolicy:
    """Ordered rules; the first whose condition holds (and whose action type
    is in the repertoire) produces the action.

    Rule sets: ``target`` accepts pending requests with probability
    ``accept_prob``, fetches messages and replies with ``reply_prob``;
    ``normal`` additionally messages random friends with ``message_prob``
    and sends occasional friend requests with ``request_prob``.  Both fall
    back to posting.
    """

    rule_set: str = "normal"
    repertoire: tuple[int, ...] = tuple(range(N_ACTIONS))
    accept_prob: float = 1.0
    reply_prob: float = 0.5
    message_prob: float = 0.5
    request_prob: float = 0.05

    def __post_init__(self) -> None:
        if self.rule_set not in ("target", "normal"):
            raise ValueError(f"unknown rule set {self.rule_set!r}")

    def act(self, memory: BotMemory, rng: random.Random) -> Action:
        _check_repertoire(self.repertoire)
        rep = set(self.repertoire)
        if memory.pending_in and ActionType.ACCEPT_FRIEND_REQUEST in rep and rng.random() < self.accept_prob:
            return AcceptFriendRequest(memory.pending_in[0])
        if memory.unfetched and ActionType.GET_MESSAGE in rep:
            return GetMessage(memory.unfetched[0][0])
        if memory.unreplied and ActionType.SEND_MESSAGE in rep and rng.random() < self.reply_prob:
            return SendMessage(memory.unreplied[0], rng.randrange(7))
        if self.rule_set == "normal":
            if memory.friends and ActionType.SEND_MESSAGE in rep and rng.random() < self.message_prob:
                return SendMessage(rng.choice(sorted(memory.friends)), rng.randrange(7))
            if ActionType.SEND_FRIEND_REQUEST in rep and rng.random() < self.request_prob:
                return build_action(ActionType.SEND_FRIEND_REQUEST, memory, rng)
        if ActionType.CREATE_POST in rep:
            return CreatePost(rng.randrange(7), rng.choice(PRIVACY_LEVELS))
        return build_action(self.repertoire[0], memory, rng)


@dataclass
class QPolicy:
    repertoire: tuple[int, ...] = tuple(range(N_ACTIONS))
    params: RLParams = field(default_factory=RLParams)
    q: np.ndarray = field(default_factory=lambda: np.zeros((N_STATES, N_ACTIONS)))

    def greedy(self, state: int, rng: random.Random) -> int:
        _check_repertoire(self.repertoire)
        row = self.q[state]
        best = max(row[a] for a in self.repertoire)
        ties = [a for a in self.repertoire if row[a] == best]
        return ties[0] if len(ties) == 1 else rng.choice(ties)

    def choose(self, features: StateFeatures, rng: random.Random) -> int:
        _check_repertoire(self.repertoire)
        if rng.random() < self.params.epsilon:
            return rng.choice(self.repertoire)
        return self.greedy(features.index, rng)

    def copy(self) -> "QPolicy":
        return QPolicy(self.repertoire, self.params, self.q.copy())


Policy = Union[RandomPolicy, RuleBasedPolicy, QPolicy]


def select_action(
    policy: Policy,
    features: StateFeatures,
    rng: random.Random,
    memory: Optional[BotMemory] = None,
    role: str = "normal",
) -> Action:
    memory = memory if memory is not None else BotMemory(user=-1)
    if isinstance(policy, RuleBasedPolicy):
        return policy.act(memory, rng)
    return build_action(policy.choose(features, rng), memory, rng, role)


def update_policy(
    policy: QPolicy, s: int, a: int, r: float, s_next: Optional[int], a_next: Optional[int] = None
) -> QPolicy:
    """One tabular update in place (and returned).  ``s_next=None`` marks a
    terminal transition, which does not bootstrap."""
    p = policy.params
    if s_next is None:
        target = r
    elif p.update == SARSA:
        target = r + p.gamma * policy.q[s_next, a_next]
    else:
        target = r + p.gamma * max(policy.q[s_next, b] for b in policy.repertoire)
    policy.q[s, a] += p.alpha * (target - policy.q[s, a])
    return policy


# --- snapshots ----------------------------------------------------------------


def dump_policy(policy: QPolicy) -> str:
    p = policy.params
    out = io.StringIO()
    out.write(SNAPSHOT_HEADER + "\n")
    rep = ",".join(str(a) for a in policy.repertoire)
    out.write(f"# update={p.update} alpha={p.alpha!r} gamma={p.gamma!r} epsilon={p.epsilon!r} repertoire={rep}\n")
    out.write("state,action,value\n")
    for s in range(N_STATES):
        for a in range(N_ACTIONS):
            out.write(f"{s},{a},{float(policy.q[s, a])!r}\n")
    return out.getvalue()


def parse_policy(text: str) -> QPolicy:
    lines = text.splitlines()
    if not lines or lines[0] != SNAPSHOT_HEADER:
        raise ValueError("not a policy snapshot (missing version header)")
    meta = dict(item.split("=", 1) for item in lines[1].lstrip("# ").split())
    params = RLParams(float(meta["alpha"]), float(meta["gamma"]), float(meta["epsilon"]), meta["update"])
    repertoire = tuple(int(a) for a in meta["repertoire"].split(",") if a)
    if lines[2] != "state,action,value":
        raise ValueError("bad policy table header")
    q = np.zeros((N_STATES, N_ACTIONS))
    for line in lines[3:]:
        s, a, v = line.split(",")
        value = float(v)
        if not math.isfinite(value):
            raise ValueError("Q-values must be finite")
        q[int(s), int(a)] = value
    return QPolicy(repertoire, params, q)


def save_policy(policy: QPolicy, path: Union[str, Path]) -> None:
    Path(path).write_text(dump_policy(policy))


def load_policy(path: Union[str, Path]) -> QPolicy:
    return parse_policy(Path(path).read_text())
