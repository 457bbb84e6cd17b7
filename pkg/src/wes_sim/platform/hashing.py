"""Canonical state serialization and hashes.

The canonical form is a nested tuple of ints, bools and strings, every
collection ordered by entity id.  The hash is SHA-256 over ``repr`` of that
tuple, UTF-8 encoded.  The partition hash replaces its event slice by a
hash chain over the events so that it can be kept up to date incrementally.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache

from .model import Event, Partition, WorldState, to_dict


@lru_cache(maxsize=1 << 16)  # events are immutable, so their keys can be reused
def _event_key(ev: Event) -> tuple:
    action = tuple(sorted(to_dict(ev.action).items()))
    return (ev.seq, ev.vtime, ev.actor, action, ev.affected, ev.visibility, ev.origin.value)


def canonical_state(world: WorldState) -> tuple:
    users = tuple(
        (u.id, u.partition.value, u.vulnerable, u.bad_actor, world.policies[u.id].value)
        for _, u in sorted(world.users.items())
    )
    groups = tuple(
        (g.id, g.partition.value, world.policies[g.id].value, tuple(sorted(world.members[g.id])))
        for _, g in sorted(world.groups.items())
    )
    posts = tuple(
        (p.id, p.author, p.tag, p.partition.value, world.policies[p.id].value) for _, p in sorted(world.posts.items())
    )
    messages = tuple(
        (m.id, m.sender, m.recipient, m.tag, m.partition.value, m.fetched) for _, m in sorted(world.messages.items())
    )
    notes = tuple(
        (uid, tuple((n.seq, n.kind, n.source, n.entity) for n in q))
        for uid, q in sorted(world.notifications.items())
        if q
    )
    return (
        ("users", users),
        ("edges", tuple(world.edges())),
        ("pending", tuple(sorted(world.pending))),
        ("groups", groups),
        ("posts", posts),
        ("messages", messages),
        ("notifications", notes),
        ("events", tuple(_event_key(ev) for ev in world.events)),
        ("counters", (world.next_entity, world.action_counter)),
    )


def _partition_static(world: WorldState, partition: Partition, inside: set[int]) -> tuple:
    users = tuple(
        (uid, world.users[uid].vulnerable, world.users[uid].bad_actor, world.policies[uid].value)
        for uid in sorted(inside)
    )
    # each inside-inside edge once (from its lower end), each crossing edge once
    edges = tuple(sorted(
        (u, v) if u < v else (v, u) for u in inside for v in world.friends[u] if u < v or v not in inside
    ))
    pending = tuple(p for p in sorted(world.pending) if p[0] in inside or p[1] in inside)
    groups = tuple(
        (gid, world.policies[gid].value, tuple(sorted(world.members[gid])))
        for gid, g in sorted(world.groups.items())
        if g.partition is partition or world.members[gid] & inside
    )
    posts = tuple(sorted(
        (p.id, p.author, p.tag, world.policies[p.id].value)
        for p in world.posts.values()
        if p.partition is partition
    ))
    messages = tuple(sorted(
        (m.id, m.sender, m.recipient, m.tag, m.fetched)
        for m in world.messages.values()
        if m.sender in inside or m.recipient in inside
    ))
    notes = tuple(
        (uid, tuple((n.seq, n.kind, n.source, n.entity) for n in world.notifications[uid]))
        for uid in sorted(inside)
        if world.notifications[uid]
    )
    return (users, edges, pending, groups, posts, messages, notes)


def _touches(ev: Event, inside: set[int]) -> bool:
    return ev.actor in inside or not inside.isdisjoint(ev.visibility)


def _inside(world: WorldState, partition: Partition) -> set[int]:
    return {uid for uid, u in world.users.items() if u.partition is partition}


def canonical_partition(world: WorldState, partition: Partition = Partition.PROTECTED) -> tuple:
    """The slice of canonical state that a user in ``partition`` can experience."""
    inside = _inside(world, partition)
    events = tuple(_event_key(ev) for ev in world.events if _touches(ev, inside))
    return _partition_static(world, partition, inside) + (events,)


def _event_chain() -> "hashlib._Hash":
    return hashlib.sha256(b"events")


def _chain_add(chain, ev: Event) -> None:
    chain.update(repr(_event_key(ev)).encode("utf-8"))
    chain.update(b"\n")


def _partition_digest(static: tuple, chain) -> str:
    return _digest(static + (chain.hexdigest(),))


class PartitionWatcher:
    """Repeated :func:`partition_hash` of one world, cheaper per call.

    The event log is append-only, so the event chain is extended from where
    the previous call stopped instead of being rebuilt.
    """

    def __init__(self, world: WorldState, partition: Partition = Partition.PROTECTED):
        self.world = world
        self.partition = partition
        self._chain = _event_chain()
        self._seen = 0

    def digest(self) -> str:
        world = self.world
        inside = _inside(world, self.partition)
        for ev in world.events[self._seen :]:
            if _touches(ev, inside):
                _chain_add(self._chain, ev)
        self._seen = len(world.events)
        return _partition_digest(_partition_static(world, self.partition, inside), self._chain)


def _digest(obj: tuple) -> str:
    return hashlib.sha256(repr(obj).encode("utf-8")).hexdigest()


def world_hash(world: WorldState) -> str:
    return _digest(canonical_state(world))


def partition_hash(world: WorldState, partition: Partition = Partition.PROTECTED) -> str:
    """SHA-256 of the partition's static slice plus a SHA-256 chain over the
    ``repr`` of each event it touches, in log order."""
    inside = _inside(world, partition)
    chain = _event_chain()
    for ev in world.events:
        if _touches(ev, inside):
            _chain_add(chain, ev)
    return _partition_digest(_partition_static(world, partition, inside), chain)
