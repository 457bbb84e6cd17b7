"""What a bot remembers between turns.

A bot never reads the world directly.  Its memory is built from the events
visible to it, the results of its own observations, and the outcomes of its
own actions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from ..platform.model import (
    AcceptFriendRequest,
    CreatePost,
    Event,
    GetMessage,
    JoinGroup,
    ListFriends,
    ObservationResult,
    SearchUsers,
    SendFriendRequest,
    SendMessage,
    ViewProfile,
)


@dataclass
class BotMemory:
    user: int
    n_users: int = 0
    group_ids: tuple[int, ...] = ()
    cursor: int = -1
    friends: set[int] = field(default_factory=set)
    known_vulnerable: set[int] = field(default_factory=set)
    seen_users: list[int] = field(default_factory=list)
    requested: set[int] = field(default_factory=set)
    pending_in: list[int] = field(default_factory=list)
    unfetched: list[tuple[int, int]] = field(default_factory=list)
    unreplied: list[int] = field(default_factory=list)
    contacted: set[int] = field(default_factory=set)
    posts_seen: list[int] = field(default_factory=list)
    groups_joined: set[int] = field(default_factory=set)
    observed: set[int] = field(default_factory=set)
    max_entity: int = -1

    @property
    def pending_out(self) -> set[int]:
        return self.requested - self.friends

    def _see_user(self, uid: int) -> None:
        if uid != self.user and uid not in self._seen_set:
            self._seen_set.add(uid)
            self.seen_users.append(uid)

    def __post_init__(self) -> None:
        self._seen_set: set[int] = set(self.seen_users)

    def ingest(self, events: Iterable[Event]) -> None:
        me = self.user
        for ev in events:
            self.cursor = ev.seq
            if ev.affected:
                self.max_entity = max(self.max_entity, max(ev.affected))
            if ev.actor == me:
                continue
            a = ev.action
            if isinstance(a, SendFriendRequest) and a.to == me:
                if ev.actor not in self.pending_in and ev.actor not in self.friends:
                    self.pending_in.append(ev.actor)
            elif isinstance(a, AcceptFriendRequest) and a.sender == me:
                self.friends.add(ev.actor)
            elif isinstance(a, SendMessage) and a.to == me:
                self.unfetched.append((ev.affected[0], ev.actor))
            elif isinstance(a, CreatePost):
                self.posts_seen.append(ev.affected[0])
            self._see_user(ev.actor)

    def absorb(self, result: ObservationResult) -> None:
        q = result.query
        self.observed.update(result.entities)
        if isinstance(q, SearchUsers):
            for uid in result.entities:
                self._see_user(uid)
            if q.trait == "vulnerable":
                self.known_vulnerable.update(result.entities)
        elif isinstance(q, ListFriends):
            if q.user == self.user:
                self.friends = set(result.payload)
            for uid in result.payload:
                self._see_user(uid)
        elif isinstance(q, ViewProfile):
            uid, vulnerable, _ = result.payload
            if vulnerable:
                self.known_vulnerable.add(uid)
            self._see_user(uid)

    def after_action(self, action, status: str) -> None:
        """Update from the platform outcome of one of our own actions.

        ``status`` is "ok", a platform refusal, or "dropped".  Mechanism
        denials are not reported here, so the bot retries later.
        """
        ok = status == "ok"
        if isinstance(action, SendFriendRequest):
            # a refused request (already pending, already friends) is not worth repeating
            self.requested.add(action.to)
        elif isinstance(action, AcceptFriendRequest):
            if action.sender in self.pending_in:
                self.pending_in.remove(action.sender)
            if ok:
                self.friends.add(action.sender)
        elif isinstance(action, SendMessage):
            if ok and action.to in self.known_vulnerable:
                self.contacted.add(action.to)
            if action.to in self.unreplied:
                self.unreplied.remove(action.to)
        elif isinstance(action, GetMessage):
            for i, (mid, sender) in enumerate(self.unfetched):
                if mid == action.message:
                    del self.unfetched[i]
                    if ok:
                        self.unreplied.append(sender)
                    break
        elif isinstance(action, JoinGroup) and ok:
            self.groups_joined.add(action.group)
