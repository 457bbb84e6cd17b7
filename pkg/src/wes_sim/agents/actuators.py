"""Turning an action type into a concrete action, and per-role observation routines."""

from __future__ import annotations

import random

from ..platform.model import (
    CONTENT_TAGS,
    VIOLATING_TAG,
    AcceptFriendRequest,
    Action,
    ActionType,
    CreatePost,
    GetMessage,
    JoinGroup,
    ListFriends,
    Query,
    SearchUsers,
    SendFriendRequest,
    SendMessage,
    ShareData,
    ViewPost,
    ViewProfile,
    Visibility,
)
from .memory import BotMemory

ROLES = ("scammer", "target", "normal", "replay", "privacy_breaker", "data_acquirer", "explorer")
PRIVACY_LEVELS = (Visibility.PUBLIC, Visibility.FRIENDS_ONLY, Visibility.OWNER_ONLY)


def _random_user(memory: BotMemory, rng: random.Random) -> int:
    return rng.randrange(max(memory.n_users, 1))


def _first_or_random(candidates: list[int], memory: BotMemory, rng: random.Random) -> int:
    return candidates[0] if candidates else _random_user(memory, rng)


def build_action(ordinal: int, memory: BotMemory, rng: random.Random, role: str = "normal") -> Action:
    """Fill in the arguments of an action of type ``ordinal`` from memory.

    Targeting is greedy and deterministic where memory offers a good choice;
    otherwise a random user id is drawn, which the platform may refuse.
    """
    a = ActionType(ordinal)
    me = memory.user
    friends = sorted(memory.friends)
    if a is ActionType.SEND_FRIEND_REQUEST:
        skip = memory.friends | memory.requested | {me}
        pool = sorted(memory.known_vulnerable) if role == "scammer" else memory.seen_users
        return SendFriendRequest(_first_or_random([u for u in pool if u not in skip], memory, rng))
    if a is ActionType.ACCEPT_FRIEND_REQUEST:
        return AcceptFriendRequest(memory.pending_in[0] if memory.pending_in else _random_user(memory, rng))
    if a is ActionType.CREATE_POST:
        if role == "scammer":
            return CreatePost(VIOLATING_TAG)
        return CreatePost(rng.randrange(CONTENT_TAGS - 1), rng.choice(PRIVACY_LEVELS))
    if a is ActionType.SEND_MESSAGE:
        tag = VIOLATING_TAG if role == "scammer" else rng.randrange(CONTENT_TAGS - 1)
        fresh = [u for u in friends if u in memory.known_vulnerable and u not in memory.contacted]
        if fresh:
            return SendMessage(fresh[0], tag)
        return SendMessage(rng.choice(friends) if friends else _random_user(memory, rng), tag)
    if a is ActionType.GET_MESSAGE:
        return GetMessage(memory.unfetched[0][0] if memory.unfetched else -1)
    if a is ActionType.JOIN_GROUP:
        open_groups = [g for g in memory.group_ids if g not in memory.groups_joined]
        return JoinGroup(rng.choice(open_groups) if open_groups else -1)
    entity = rng.choice(sorted(memory.observed)) if memory.observed else me
    return ShareData(entity, rng.choice(friends) if friends else _random_user(memory, rng))


def observation_plan(role: str, memory: BotMemory, rng: random.Random) -> list[Query]:
    """The queries a bot of ``role`` issues at the start of its turn."""
    me = memory.user
    if role == "scammer":
        return [SearchUsers("vulnerable", 10), ListFriends(me)]
    if role in ("target", "normal", "replay"):
        return [ListFriends(me)]
    if role == "privacy_breaker":
        plan: list[Query] = []
        for _ in range(3):
            kind = rng.randrange(3)
            if kind == 0:
                plan.append(ViewProfile(_random_user(memory, rng)))
            elif kind == 1:
                plan.append(ListFriends(_random_user(memory, rng)))
            else:
                plan.append(ViewPost(rng.randrange(max(memory.max_entity + 1, 1))))
        return plan
    if role == "data_acquirer":
        plan = [ViewProfile(me), SearchUsers(None, 10)]
        probe = rng.choice(memory.seen_users) if memory.seen_users else _random_user(memory, rng)
        plan.append(ListFriends(probe) if rng.random() < 0.5 else ViewProfile(probe))
        return plan
    if role == "explorer":
        kind = rng.randrange(3)
        if kind == 0:
            return [SearchUsers(None, rng.randrange(1, 11))]
        if kind == 1:
            return [ViewProfile(_random_user(memory, rng))]
        return [ListFriends(_random_user(memory, rng))]
    return []
