"""Platform state, actions, observation queries and events."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from enum import Enum, IntEnum
from typing import Any, ClassVar, Optional, Union

CONTENT_TAGS = 8
VIOLATING_TAG = CONTENT_TAGS - 1


class Partition(str, Enum):
    SYNTHETIC = "synthetic"
    PROTECTED = "protected"


class BotClass(str, Enum):
    READ_ONLY = "read_only"
    WRITER = "writer"
    FULLY_ISOLATED = "fully_isolated"


class Visibility(str, Enum):
    PUBLIC = "public"
    FRIENDS_ONLY = "friends"
    OWNER_ONLY = "owner"

    @property
    def strictness(self) -> int:
        return _STRICTNESS[self]


_STRICTNESS = {Visibility.PUBLIC: 0, Visibility.FRIENDS_ONLY: 1, Visibility.OWNER_ONLY: 2}


class Origin(str, Enum):
    BOT = "bot"
    REAL_USER = "real_user"


class ActionType(IntEnum):
    SEND_FRIEND_REQUEST = 0
    ACCEPT_FRIEND_REQUEST = 1
    CREATE_POST = 2
    SEND_MESSAGE = 3
    GET_MESSAGE = 4
    JOIN_GROUP = 5
    SHARE_DATA = 6


N_ACTIONS = len(ActionType)


# --- actions ---------------------------------------------------------------


@dataclass(frozen=True)
class SendFriendRequest:
    to: int
    ordinal: ClassVar[ActionType] = ActionType.SEND_FRIEND_REQUEST


@dataclass(frozen=True)
class AcceptFriendRequest:
    sender: int
    ordinal: ClassVar[ActionType] = ActionType.ACCEPT_FRIEND_REQUEST


@dataclass(frozen=True)
class CreatePost:
    tag: int
    privacy: Visibility = Visibility.PUBLIC
    ordinal: ClassVar[ActionType] = ActionType.CREATE_POST


@dataclass(frozen=True)
class SendMessage:
    to: int
    tag: int = 0
    ordinal: ClassVar[ActionType] = ActionType.SEND_MESSAGE


@dataclass(frozen=True)
class GetMessage:
    message: int
    ordinal: ClassVar[ActionType] = ActionType.GET_MESSAGE


@dataclass(frozen=True)
class JoinGroup:
    group: int
    ordinal: ClassVar[ActionType] = ActionType.JOIN_GROUP


@dataclass(frozen=True)
class ShareData:
    entity: int
    to: int
    ordinal: ClassVar[ActionType] = ActionType.SHARE_DATA


Action = Union[
    SendFriendRequest, AcceptFriendRequest, CreatePost, SendMessage, GetMessage, JoinGroup, ShareData
]

ACTION_CLASSES: dict[str, type] = {
    cls.__name__: cls
    for cls in (SendFriendRequest, AcceptFriendRequest, CreatePost, SendMessage, GetMessage, JoinGroup, ShareData)
}
ACTION_BY_ORDINAL: dict[ActionType, type] = {cls.ordinal: cls for cls in ACTION_CLASSES.values()}


# --- observation queries ----------------------------------------------------


@dataclass(frozen=True)
class ReadMessage:
    handle: int


@dataclass(frozen=True)
class ViewPost:
    post: int


@dataclass(frozen=True)
class ViewProfile:
    user: int


@dataclass(frozen=True)
class ListFriends:
    user: int


@dataclass(frozen=True)
class SearchUsers:
    trait: Optional[str] = None
    limit: int = 10
    within_hops: Optional[int] = None


Query = Union[ReadMessage, ViewPost, ViewProfile, ListFriends, SearchUsers]

QUERY_CLASSES: dict[str, type] = {
    cls.__name__: cls for cls in (ReadMessage, ViewPost, ViewProfile, ListFriends, SearchUsers)
}

SEARCHABLE_TRAITS = ("vulnerable", "bad_actor")


def to_dict(item: Any) -> dict[str, Any]:
    """Flat JSON-ready dict for an action or query, type name first."""
    out: dict[str, Any] = {"type": type(item).__name__}
    for f in fields(item):
        value = getattr(item, f.name)
        out[f.name] = value.value if isinstance(value, Enum) else value
    return out


def from_dict(data: dict[str, Any]) -> Any:
    kind = data["type"]
    cls = ACTION_CLASSES.get(kind) or QUERY_CLASSES.get(kind)
    if cls is None:
        raise ValueError(f"unknown action or query type {kind!r}")
    kwargs = {k: v for k, v in data.items() if k != "type"}
    if cls is CreatePost and "privacy" in kwargs:
        kwargs["privacy"] = Visibility(kwargs["privacy"])
    return cls(**kwargs)


def is_action(item: Any) -> bool:
    return type(item).__name__ in ACTION_CLASSES


# --- entities ---------------------------------------------------------------


@dataclass(frozen=True)
class User:
    id: int
    partition: Partition
    vulnerable: bool = False
    bad_actor: bool = False

    def trait(self, name: str) -> bool:
        return bool(getattr(self, name))


@dataclass(frozen=True)
class Group:
    id: int
    partition: Partition


@dataclass(frozen=True)
class Post:
    id: int
    author: int
    tag: int
    partition: Partition


@dataclass(frozen=True)
class Message:
    id: int
    sender: int
    recipient: int
    tag: int
    partition: Partition
    fetched: bool = False


@dataclass(frozen=True)
class Notification:
    seq: int
    kind: str
    source: int
    entity: int


@dataclass(frozen=True)
class Event:
    seq: int
    vtime: int
    actor: int
    action: Action
    affected: tuple[int, ...]
    visibility: tuple[int, ...]
    origin: Origin

    @property
    def ordinal(self) -> ActionType:
        return self.action.ordinal


@dataclass(frozen=True)
class ObservationResult:
    query: Query
    entities: tuple[int, ...]
    payload: Any = None


@dataclass
class WorldState:
    """The single mutable simulation state.

    Entity ids share one counter (``next_entity``) across users, groups,
    posts and messages, so an id names exactly one entity and is never
    reused.  ``feeds`` is a derived per-user index into ``events`` and is not
    part of the canonical state.
    """

    users: dict[int, User] = field(default_factory=dict)
    friends: dict[int, set[int]] = field(default_factory=dict)
    pending: set[tuple[int, int]] = field(default_factory=set)
    groups: dict[int, Group] = field(default_factory=dict)
    members: dict[int, set[int]] = field(default_factory=dict)
    posts: dict[int, Post] = field(default_factory=dict)
    messages: dict[int, Message] = field(default_factory=dict)
    notifications: dict[int, list[Notification]] = field(default_factory=dict)
    policies: dict[int, Visibility] = field(default_factory=dict)
    events: list[Event] = field(default_factory=list)
    next_entity: int = 0
    action_counter: int = 0
    cross_partition_edges: bool = False
    feeds: dict[int, list[int]] = field(default_factory=dict)

    def add_user(
        self,
        partition: Partition = Partition.SYNTHETIC,
        *,
        vulnerable: bool = False,
        bad_actor: bool = False,
        policy: Visibility = Visibility.PUBLIC,
    ) -> int:
        uid = self.next_entity
        self.next_entity += 1
        self.users[uid] = User(uid, partition, vulnerable, bad_actor)
        self.friends[uid] = set()
        self.notifications[uid] = []
        self.policies[uid] = policy
        return uid

    def add_group(self, partition: Partition = Partition.SYNTHETIC, policy: Visibility = Visibility.PUBLIC) -> int:
        gid = self.next_entity
        self.next_entity += 1
        self.groups[gid] = Group(gid, partition)
        self.members[gid] = set()
        self.policies[gid] = policy
        return gid

    def add_edge(self, a: int, b: int) -> None:
        if a == b:
            raise ValueError("self-loops are not friendships")
        if a not in self.users or b not in self.users:
            raise KeyError("edge endpoints must be existing users")
        if not self.cross_partition_edges and self.users[a].partition is not self.users[b].partition:
            raise ValueError("cross-partition edge in a world not configured for it")
        self.friends[a].add(b)
        self.friends[b].add(a)

    def exists(self, eid: int) -> bool:
        return eid in self.users or eid in self.posts or eid in self.messages or eid in self.groups

    def entity(self, eid: int) -> Union[User, Group, Post, Message]:
        for table in (self.users, self.posts, self.messages, self.groups):
            if eid in table:
                return table[eid]
        raise KeyError(eid)

    def partition_of(self, eid: int) -> Partition:
        return self.entity(eid).partition

    def owner_of(self, eid: int) -> int:
        ent = self.entity(eid)
        if isinstance(ent, User):
            return ent.id
        if isinstance(ent, Post):
            return ent.author
        if isinstance(ent, Message):
            return ent.sender
        return -1

    def edges(self) -> list[tuple[int, int]]:
        return sorted((a, b) for a, nbrs in self.friends.items() for b in nbrs if a < b)

    def are_friends(self, a: int, b: int) -> bool:
        return b in self.friends.get(a, ())

    def copy(self) -> "WorldState":
        return WorldState(
            users=dict(self.users),
            friends={k: set(v) for k, v in self.friends.items()},
            pending=set(self.pending),
            groups=dict(self.groups),
            members={k: set(v) for k, v in self.members.items()},
            posts=dict(self.posts),
            messages=dict(self.messages),
            notifications={k: list(v) for k, v in self.notifications.items()},
            policies=dict(self.policies),
            events=list(self.events),
            next_entity=self.next_entity,
            action_counter=self.action_counter,
            cross_partition_edges=self.cross_partition_edges,
            feeds={k: list(v) for k, v in self.feeds.items()},
        )
