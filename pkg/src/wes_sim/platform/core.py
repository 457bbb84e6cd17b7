"""State-changing actions, pure observations and visibility-scoped events."""

from __future__ import annotations

from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping, Optional

from ..seeding import unit_draw
from .errors import (
    AlreadyFetched,
    InvalidAction,
    IsolationViolation,
    NotRecipient,
    PlatformError,
    PrivacyDenied,
    UnknownEntity,
)
from .model import (
    CONTENT_TAGS,
    SEARCHABLE_TRAITS,
    AcceptFriendRequest,
    Action,
    BotClass,
    CreatePost,
    Event,
    GetMessage,
    Group,
    JoinGroup,
    ListFriends,
    Message,
    Notification,
    ObservationResult,
    Origin,
    Partition,
    Post,
    Query,
    ReadMessage,
    SearchUsers,
    SendFriendRequest,
    SendMessage,
    ShareData,
    User,
    ViewPost,
    ViewProfile,
    Visibility,
    WorldState,
    from_dict,
    is_action,
)

OK = "ok"
DROPPED = "dropped"


@dataclass(frozen=True)
class FaultConfig:
    """Platform faults used by social tests.  All-default means a correct platform."""

    message_drop: float = 0.0
    notification_loss: float = 0.0
    privacy_downgrade: bool = False
    seed: int = 0

    @property
    def active(self) -> bool:
        return self.message_drop > 0 or self.notification_loss > 0 or self.privacy_downgrade


NO_FAULTS = FaultConfig()


@dataclass(frozen=True)
class ActionOutcome:
    status: str
    reason: str = ""
    events: tuple[Event, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == OK


@dataclass(frozen=True)
class MessageHandle:
    message: int


# --- privacy ----------------------------------------------------------------


def can_view(world: WorldState, viewer: int, eid: int, faults: FaultConfig = NO_FAULTS) -> bool:
    """The platform's privacy evaluator."""
    ent = world.entity(eid)
    if isinstance(ent, Message):
        return viewer == ent.sender or viewer == ent.recipient
    policy = world.policies[eid]
    if isinstance(ent, Group):
        members = world.members[eid]
        if viewer in members or policy is Visibility.PUBLIC:
            return True
        if policy is Visibility.FRIENDS_ONLY:
            return faults.privacy_downgrade or bool(world.friends[viewer] & members)
        return False
    owner = ent.id if isinstance(ent, User) else ent.author
    if viewer == owner or policy is Visibility.PUBLIC:
        return True
    if policy is Visibility.FRIENDS_ONLY:
        return faults.privacy_downgrade or owner in world.friends[viewer]
    return False


# --- isolation --------------------------------------------------------------


def _require(world: WorldState, eid: int, table: Optional[Mapping[int, Any]] = None) -> None:
    if not world.exists(eid) or (table is not None and eid not in table):
        raise UnknownEntity(f"entity {eid} does not exist")


def _check_action_isolation(
    world: WorldState, actor: int, bot_class: Optional[BotClass], targets: Iterable[int], origin: Origin
) -> None:
    home = world.users[actor].partition
    if origin is Origin.BOT:
        if bot_class is BotClass.READ_ONLY:
            raise IsolationViolation("read-only bots cannot act")
        if home is not Partition.SYNTHETIC:
            raise IsolationViolation("bots act from synthetic accounts only")
    elif home is not Partition.PROTECTED:
        raise IsolationViolation("real-user actions originate in the protected partition")
    for eid in targets:
        if world.partition_of(eid) is not home:
            raise IsolationViolation(f"entity {eid} lies across the isolation layer")


def _check_read_isolation(world: WorldState, bot_class: Optional[BotClass], eid: int) -> None:
    if bot_class is BotClass.FULLY_ISOLATED and world.partition_of(eid) is Partition.PROTECTED:
        raise IsolationViolation(f"fully isolated bots cannot read entity {eid}")


def _targets(action: Action) -> tuple[int, ...]:
    if isinstance(action, (SendFriendRequest, SendMessage)):
        return (action.to,)
    if isinstance(action, AcceptFriendRequest):
        return (action.sender,)
    if isinstance(action, GetMessage):
        return (action.message,)
    if isinstance(action, JoinGroup):
        return (action.group,)
    if isinstance(action, ShareData):
        return (action.entity, action.to)
    return ()


def _check_exists(world: WorldState, action: Action) -> None:
    if isinstance(action, (SendFriendRequest, SendMessage)):
        _require(world, action.to, world.users)
    elif isinstance(action, AcceptFriendRequest):
        _require(world, action.sender, world.users)
    elif isinstance(action, GetMessage):
        _require(world, action.message, world.messages)
    elif isinstance(action, JoinGroup):
        _require(world, action.group, world.groups)
    elif isinstance(action, ShareData):
        _require(world, action.entity)
        _require(world, action.to, world.users)


# --- validation -------------------------------------------------------------


def _validate(world: WorldState, actor: int, action: Action, faults: FaultConfig) -> None:
    if isinstance(action, SendFriendRequest):
        to = action.to
        if to == actor:
            raise InvalidAction("cannot befriend oneself")
        if world.are_friends(actor, to):
            raise InvalidAction("already friends")
        if (actor, to) in world.pending or (to, actor) in world.pending:
            raise InvalidAction("request already pending")
    elif isinstance(action, AcceptFriendRequest):
        if (action.sender, actor) not in world.pending:
            raise InvalidAction("no pending request from that user")
    elif isinstance(action, CreatePost):
        if not 0 <= action.tag < CONTENT_TAGS:
            raise InvalidAction("unknown content tag")
    elif isinstance(action, SendMessage):
        if action.to == actor:
            raise InvalidAction("cannot message oneself")
        if not 0 <= action.tag < CONTENT_TAGS:
            raise InvalidAction("unknown content tag")
        if not world.are_friends(actor, action.to):
            raise PrivacyDenied("messages go to friends only")
    elif isinstance(action, GetMessage):
        msg = world.messages[action.message]
        if msg.recipient != actor:
            raise NotRecipient("only the recipient can get a message")
        if msg.fetched:
            raise AlreadyFetched("message already fetched")
    elif isinstance(action, JoinGroup):
        if actor in world.members[action.group]:
            raise InvalidAction("already a member")
        if not can_view(world, actor, action.group, faults):
            raise PrivacyDenied("group not joinable")
    elif isinstance(action, ShareData):
        if action.to == actor:
            raise InvalidAction("cannot share with oneself")
        if not can_view(world, actor, action.entity, faults):
            raise PrivacyDenied("cannot share what one cannot see")


# --- state change -----------------------------------------------------------


def _post_audience(world: WorldState, author: int, privacy: Visibility) -> set[int]:
    if privacy is Visibility.PUBLIC:
        return set(world.users)
    if privacy is Visibility.FRIENDS_ONLY:
        return {author} | world.friends[author]
    return {author}


def _mutate(world: WorldState, actor: int, action: Action) -> tuple[tuple[int, ...], set[int], Optional[tuple[int, str, int]]]:
    """Apply the state delta of a validated action.

    Returns (affected entities, privacy-derived audience, notification) where
    notification is (user, kind, entity) or None.
    """
    home = world.users[actor].partition
    if isinstance(action, SendFriendRequest):
        world.pending.add((actor, action.to))
        return (action.to,), {action.to}, (action.to, "friend_request", actor)
    if isinstance(action, AcceptFriendRequest):
        world.pending.discard((action.sender, actor))
        world.friends[actor].add(action.sender)
        world.friends[action.sender].add(actor)
        return (action.sender,), {action.sender}, (action.sender, "friend_accept", actor)
    if isinstance(action, CreatePost):
        pid = world.next_entity
        world.next_entity += 1
        world.posts[pid] = Post(pid, actor, action.tag, home)
        world.policies[pid] = action.privacy
        return (pid,), _post_audience(world, actor, action.privacy), None
    if isinstance(action, SendMessage):
        mid = world.next_entity
        world.next_entity += 1
        world.messages[mid] = Message(mid, actor, action.to, action.tag, home)
        world.policies[mid] = Visibility.OWNER_ONLY
        return (mid, action.to), {action.to}, (action.to, "message", mid)
    if isinstance(action, GetMessage):
        msg = world.messages[action.message]
        world.messages[msg.id] = replace(msg, fetched=True)
        return (msg.id, msg.sender), {msg.sender}, (msg.sender, "message_read", msg.id)
    if isinstance(action, JoinGroup):
        world.members[action.group].add(actor)
        return (action.group,), set(world.members[action.group]), None
    if isinstance(action, ShareData):
        return (action.entity, action.to), {action.to}, (action.to, "share", action.entity)
    raise InvalidAction(f"unsupported action {action!r}")


def _emit(
    world: WorldState,
    actor: int,
    action: Action,
    vtime: int,
    origin: Origin,
    affected: tuple[int, ...],
    visibility: tuple[int, ...],
    note: Optional[tuple[int, str, int]],
) -> Event:
    seq = world.action_counter
    world.action_counter += 1
    ev = Event(seq, vtime, actor, action, affected, visibility, origin)
    world.events.append(ev)
    for uid in visibility:
        world.feeds.setdefault(uid, []).append(seq)
    if note is not None and note[0] in visibility:
        world.notifications[note[0]].append(Notification(seq, note[1], actor, note[2]))
    return ev


def _audience_filter(world: WorldState, actor: int, audience: set[int]) -> set[int]:
    home = world.users[actor].partition
    return {u for u in audience if world.users[u].partition is home}


def apply_action(
    world: WorldState,
    actor: int,
    bot_class: Optional[BotClass],
    action: Action,
    vtime: int,
    *,
    origin: Origin = Origin.BOT,
    faults: FaultConfig = NO_FAULTS,
) -> ActionOutcome:
    """Execute one action in place.

    Refusals (isolation, privacy, unknown entities, invalid requests) leave
    the world untouched and are reported in the outcome, never raised.
    """
    if actor not in world.users:
        return ActionOutcome(UnknownEntity.outcome, f"actor {actor} does not exist")
    try:
        _check_exists(world, action)
        _check_action_isolation(world, actor, bot_class, _targets(action), origin)
        _validate(world, actor, action, faults)
    except PlatformError as exc:
        return ActionOutcome(exc.outcome, str(exc))

    if (
        isinstance(action, SendMessage)
        and faults.message_drop > 0
        and unit_draw(faults.seed, "message-drop", world.action_counter, actor, vtime) < faults.message_drop
    ):
        return ActionOutcome(DROPPED, "message dropped by platform fault")

    affected, audience, note = _mutate(world, actor, action)
    visible = _audience_filter(world, actor, audience)
    if (
        note is not None
        and faults.notification_loss > 0
        and unit_draw(faults.seed, "notification-loss", world.action_counter) < faults.notification_loss
    ):
        visible.discard(note[0])
    ev = _emit(world, actor, action, vtime, origin, affected, tuple(sorted(visible)), note)
    return ActionOutcome(OK, "", (ev,))


def get_message(world: WorldState, actor: int, message: int, vtime: int = 0, *, origin: Origin = Origin.BOT) -> MessageHandle:
    """Fetch a message once; the sender is notified that it was read."""
    _require(world, message, world.messages)
    action = GetMessage(message)
    _validate(world, actor, action, NO_FAULTS)
    affected, audience, note = _mutate(world, actor, action)
    visible = tuple(sorted(_audience_filter(world, actor, audience)))
    _emit(world, actor, action, vtime, origin, affected, visible, note)
    return MessageHandle(message)


# --- observations -----------------------------------------------------------


def _within_hops(world: WorldState, start: int, hops: int) -> set[int]:
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        node, depth = frontier.popleft()
        if depth == hops:
            continue
        for nxt in world.friends[node]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append((nxt, depth + 1))
    return seen


def observe(
    world: WorldState,
    actor: int,
    bot_class: Optional[BotClass],
    query: Query,
    *,
    faults: FaultConfig = NO_FAULTS,
) -> ObservationResult:
    """Answer a query without touching the world.

    Raises UnknownEntity, IsolationViolation or PrivacyDenied.
    """
    if actor not in world.users:
        raise UnknownEntity(f"actor {actor} does not exist")

    if isinstance(query, ReadMessage):
        _require(world, query.handle, world.messages)
        _check_read_isolation(world, bot_class, query.handle)
        msg = world.messages[query.handle]
        if actor not in (msg.sender, msg.recipient):
            raise PrivacyDenied("not a participant")
        if not msg.fetched:
            raise InvalidAction("message has not been fetched")
        return ObservationResult(query, (msg.id,), (msg.sender, msg.tag))

    if isinstance(query, ViewPost):
        _require(world, query.post, world.posts)
        _check_read_isolation(world, bot_class, query.post)
        if not can_view(world, actor, query.post, faults):
            raise PrivacyDenied("post not visible")
        post = world.posts[query.post]
        return ObservationResult(query, (post.id,), (post.author, post.tag))

    if isinstance(query, (ViewProfile, ListFriends)):
        _require(world, query.user, world.users)
        _check_read_isolation(world, bot_class, query.user)
        if not can_view(world, actor, query.user, faults):
            raise PrivacyDenied("profile not visible")
        user = world.users[query.user]
        if isinstance(query, ViewProfile):
            return ObservationResult(query, (user.id,), (user.id, user.vulnerable, user.bad_actor))
        friends = sorted(world.friends[user.id])
        if bot_class is BotClass.FULLY_ISOLATED:
            friends = [f for f in friends if world.users[f].partition is not Partition.PROTECTED]
        return ObservationResult(query, (user.id,), tuple(friends))

    if isinstance(query, SearchUsers):
        if query.trait is not None and query.trait not in SEARCHABLE_TRAITS:
            raise InvalidAction(f"trait {query.trait!r} is not searchable")
        if query.limit <= 0:
            return ObservationResult(query, (), ())
        if query.within_hops is not None:
            pool = sorted(_within_hops(world, actor, query.within_hops))
        else:
            pool = sorted(world.users)
        found = []
        for uid in pool:
            if uid == actor:
                continue
            user = world.users[uid]
            if bot_class is BotClass.FULLY_ISOLATED and user.partition is Partition.PROTECTED:
                continue
            if query.trait is not None and not user.trait(query.trait):
                continue
            if not can_view(world, actor, uid, faults):
                continue
            found.append(uid)
            if len(found) == query.limit:
                break
        return ObservationResult(query, tuple(found), tuple(found))

    raise InvalidAction(f"unsupported query {query!r}")


def visible_events(world: WorldState, user: int, since: int = -1) -> list[Event]:
    """Events visible to ``user`` with sequence number greater than ``since``."""
    feed = world.feeds.get(user)
    if not feed:
        return []
    start = bisect_right(feed, since)
    return [world.events[seq] for seq in feed[start:]]


# --- event sourcing ---------------------------------------------------------


def _field(rec: Any, name: str) -> Any:
    return rec[name] if isinstance(rec, Mapping) else getattr(rec, name)


def replay(world: WorldState, records: Iterable[Any]) -> WorldState:
    """Re-apply the successful actions of an episode log to ``world`` in place.

    Records may be log-record objects or the dicts read back from a JSONL log.
    Visibility is taken from the log, so fault-induced notification loss is
    reproduced without re-drawing it.
    """
    for rec in records:
        if _field(rec, "outcome") != OK:
            continue
        action = _field(rec, "action")
        if isinstance(action, Mapping):
            action = from_dict(dict(action))
        if not is_action(action):
            continue
        actor = _field(rec, "actor")
        affected, _, note = _mutate(world, actor, action)
        visibility = tuple(_field(rec, "visibility"))
        _emit(world, actor, action, _field(rec, "vtime"), Origin(_field(rec, "origin")), affected, visibility, note)
    return world
