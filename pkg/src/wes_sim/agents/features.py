"""Discretized bot-local state for tabular policies."""

from __future__ import annotations

from dataclasses import dataclass

from .memory import BotMemory

BUCKETS = 4  # 0, 1, 2, 3+
N_FEATURES = 4
N_STATES = BUCKETS**N_FEATURES


def bucket(x: int) -> int:
    return min(max(int(x), 0), BUCKETS - 1)


@dataclass(frozen=True)
class StateFeatures:
    pending: int = 0
    visible_targets: int = 0
    budget: int = 0
    contacted: int = 0

    @property
    def index(self) -> int:
        return ((self.pending * BUCKETS + self.visible_targets) * BUCKETS + self.budget) * BUCKETS + self.contacted

    @classmethod
    def from_index(cls, index: int) -> "StateFeatures":
        if not 0 <= index < N_STATES:
            raise ValueError(f"state index {index} outside [0, {N_STATES})")
        digits = []
        for _ in range(N_FEATURES):
            index, d = divmod(index, BUCKETS)
            digits.append(d)
        return cls(*reversed(digits))


def featurize(memory: BotMemory, budget: int = 0) -> StateFeatures:
    """Bucket the bot's counters.

    ``budget`` is the remaining rate budget supplied by the runner (the
    smallest remaining allowance over the bot's unmasked repertoire).
    """
    pending = len(memory.pending_in) + len(memory.pending_out)
    targets = len((memory.friends & memory.known_vulnerable) - memory.contacted)
    return StateFeatures(bucket(pending), bucket(targets), bucket(budget), bucket(len(memory.contacted)))
