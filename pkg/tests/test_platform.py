import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuzz import mixed_world, populate, random_action, random_query
from wes_sim.platform import (
    DROPPED,
    AlreadyFetched,
    FaultConfig,
    IsolationViolation,
    NotRecipient,
    PartitionWatcher,
    PlatformError,
    PrivacyDenied,
    UnknownEntity,
    apply_action,
    get_message,
    observe,
    partition_hash,
    replay,
    visible_events,
    world_hash,
)
from wes_sim.platform.model import (
    AcceptFriendRequest,
    BotClass,
    CreatePost,
    GetMessage,
    JoinGroup,
    ListFriends,
    Origin,
    Partition,
    ReadMessage,
    SearchUsers,
    SendFriendRequest,
    SendMessage,
    ShareData,
    ViewPost,
    ViewProfile,
    Visibility,
    WorldState,
    from_dict,
    to_dict,
)

W = BotClass.WRITER


def two_users(policy=Visibility.PUBLIC):
    w = WorldState()
    a = w.add_user(policy=policy)
    b = w.add_user(policy=policy)
    return w, a, b


def friends_world():
    w, a, b = two_users()
    w.add_edge(a, b)
    return w, a, b


# --- apply_action ---------------------------------------------------------------


def test_friend_request_creates_pending_and_one_event_for_recipient():
    w, a, b = two_users()
    out = apply_action(w, a, W, SendFriendRequest(b), 0)
    assert out.ok
    assert w.pending == {(a, b)}
    assert len(out.events) == 1 and out.events[0].visibility == (b,)
    assert [e.seq for e in visible_events(w, b)] == [0]
    assert visible_events(w, a) == []


def test_accept_completes_friendship_and_notifies_sender():
    w, a, b = two_users()
    apply_action(w, a, W, SendFriendRequest(b), 0)
    out = apply_action(w, b, W, AcceptFriendRequest(a), 1)
    assert out.ok and w.are_friends(a, b) and not w.pending
    assert out.events[0].visibility == (a,)
    assert w.notifications[a][-1].kind == "friend_accept"


def test_accept_without_request_is_invalid():
    w, a, b = two_users()
    assert apply_action(w, b, W, AcceptFriendRequest(a), 0).status == "invalid"


@pytest.mark.parametrize("action", [
    CreatePost(0), SendFriendRequest(1), SendMessage(1), JoinGroup(2), ShareData(0, 1),
])
def test_read_only_bots_never_change_the_world(action):
    w, a, b = friends_world()
    w.add_group()
    before = world_hash(w)
    out = apply_action(w, a, BotClass.READ_ONLY, action, 0)
    assert out.status == IsolationViolation.outcome
    assert world_hash(w) == before


def test_fully_isolated_bot_cannot_message_protected_user():
    w = WorldState(cross_partition_edges=True)
    a = w.add_user()
    p = w.add_user(Partition.PROTECTED)
    w.add_edge(a, p)
    before = world_hash(w)
    out = apply_action(w, a, BotClass.FULLY_ISOLATED, SendMessage(p, 1), 0)
    assert out.status == IsolationViolation.outcome
    assert world_hash(w) == before


def test_writer_cannot_target_protected_entities():
    w = WorldState()
    a = w.add_user()
    p = w.add_user(Partition.PROTECTED)
    assert apply_action(w, a, W, SendFriendRequest(p), 0).status == IsolationViolation.outcome


def test_bots_cannot_act_from_protected_accounts_and_real_users_cannot_act_from_synthetic():
    w = WorldState()
    a = w.add_user()
    p = w.add_user(Partition.PROTECTED)
    assert apply_action(w, p, W, CreatePost(0), 0).status == IsolationViolation.outcome
    assert apply_action(w, a, W, CreatePost(0), 0, origin=Origin.REAL_USER).status == IsolationViolation.outcome
    assert apply_action(w, p, None, CreatePost(0), 0, origin=Origin.REAL_USER).ok


def test_message_to_non_friend_is_privacy_denied():
    w, a, b = two_users()
    assert apply_action(w, a, W, SendMessage(b), 0).status == PrivacyDenied.outcome


def test_unknown_entities_are_reported():
    w, a, b = two_users()
    assert apply_action(w, a, W, SendMessage(99), 0).status == UnknownEntity.outcome
    assert apply_action(w, 99, W, CreatePost(0), 0).status == UnknownEntity.outcome
    assert apply_action(w, a, W, GetMessage(b), 0).status == UnknownEntity.outcome


def test_post_visibility_follows_privacy():
    w = WorldState()
    a, b, c = (w.add_user() for _ in range(3))
    w.add_edge(a, b)
    pub = apply_action(w, a, W, CreatePost(1, Visibility.PUBLIC), 0).events[0]
    fr = apply_action(w, a, W, CreatePost(1, Visibility.FRIENDS_ONLY), 0).events[0]
    own = apply_action(w, a, W, CreatePost(1, Visibility.OWNER_ONLY), 0).events[0]
    assert pub.visibility == (a, b, c)
    assert fr.visibility == (a, b)
    assert own.visibility == (a,)


def test_public_post_is_seen_by_every_user():
    w = WorldState()
    ids = [w.add_user() for _ in range(6)]
    apply_action(w, ids[2], W, CreatePost(3), 0)
    for u in ids:
        assert len(visible_events(w, u)) == 1


def test_user_outside_every_visibility_set_sees_nothing():
    w = WorldState()
    a, b, c = (w.add_user() for _ in range(3))
    apply_action(w, a, W, SendFriendRequest(b), 0)
    assert visible_events(w, c) == []


def test_visible_events_respects_since():
    w, a, b = friends_world()
    for t in range(5):
        apply_action(w, a, W, SendMessage(b, 1), t)
    assert [e.seq for e in visible_events(w, b, since=2)] == [3, 4]
    assert visible_events(w, b, since=4) == []


def test_event_sequence_numbers_strictly_increase():
    w = populate(mixed_world(3), random.Random(3), steps=300)
    seqs = [e.seq for e in w.events]
    assert seqs == sorted(set(seqs)) and seqs == list(range(len(seqs)))


# --- get_message -----------------------------------------------------------------


def _message_world():
    w, a, b = friends_world()
    out = apply_action(w, a, W, SendMessage(b, 4), 0)
    return w, a, b, out.events[0].affected[0]


def test_get_message_notifies_sender_once():
    w, a, b, mid = _message_world()
    handle = get_message(w, b, mid, 1)
    assert handle.message == mid and w.messages[mid].fetched
    assert w.notifications[a][-1].kind == "message_read"
    assert visible_events(w, a)[-1].visibility == (a,)
    with pytest.raises(AlreadyFetched):
        get_message(w, b, mid, 2)


def test_get_message_by_non_recipient_fails():
    w, a, b, mid = _message_world()
    with pytest.raises(NotRecipient):
        get_message(w, a, mid)


def test_repeated_reads_return_same_content_and_change_nothing():
    w, a, b, mid = _message_world()
    get_message(w, b, mid, 1)
    before = world_hash(w)
    results = [observe(w, b, W, ReadMessage(mid)) for _ in range(3)]
    assert len({(r.entities, r.payload) for r in results}) == 1
    assert results[0].payload == (a, 4)
    assert world_hash(w) == before


# --- observe ----------------------------------------------------------------------


def test_view_own_profile_always_allowed():
    w, a, b = two_users(Visibility.OWNER_ONLY)
    assert observe(w, a, W, ViewProfile(a)).entities == (a,)
    with pytest.raises(PrivacyDenied):
        observe(w, b, W, ViewProfile(a))


def test_friends_only_post_denied_to_non_friend():
    w = WorldState()
    a, b, c = (w.add_user() for _ in range(3))
    w.add_edge(a, b)
    pid = apply_action(w, a, W, CreatePost(1, Visibility.FRIENDS_ONLY), 0).events[0].affected[0]
    assert observe(w, b, W, ViewPost(pid)).entities == (pid,)
    with pytest.raises(PrivacyDenied):
        observe(w, c, W, ViewPost(pid))


def test_fully_isolated_sees_no_protected_entities_but_read_only_may():
    w = WorldState(cross_partition_edges=True)
    a = w.add_user()
    p = w.add_user(Partition.PROTECTED)
    w.add_edge(a, p)
    with pytest.raises(IsolationViolation):
        observe(w, a, BotClass.FULLY_ISOLATED, ViewProfile(p))
    assert observe(w, a, BotClass.FULLY_ISOLATED, ListFriends(a)).payload == ()
    assert p not in observe(w, a, BotClass.FULLY_ISOLATED, SearchUsers()).entities
    assert observe(w, a, BotClass.READ_ONLY, ViewProfile(p)).entities == (p,)
    assert p in observe(w, a, BotClass.READ_ONLY, SearchUsers()).entities


def test_search_filters_by_trait_limit_and_hops():
    w = WorldState()
    ids = [w.add_user(vulnerable=i % 2 == 1) for i in range(8)]
    for i in range(7):
        w.add_edge(ids[i], ids[i + 1])
    assert observe(w, 0, W, SearchUsers("vulnerable", 10)).entities == (1, 3, 5, 7)
    assert observe(w, 0, W, SearchUsers(None, 3)).entities == (1, 2, 3)
    assert observe(w, 0, W, SearchUsers(None, 10, 2)).entities == (1, 2)
    assert observe(w, 0, W, SearchUsers(None, 0)).entities == ()


@given(st.integers(0, 2**32), st.integers(1, 300))
def test_observation_purity(seed, steps):
    rng = random.Random(seed)
    w = populate(mixed_world(seed % 7), rng, steps=steps)
    before = world_hash(w)
    for _ in range(30):
        actor = rng.randrange(len(w.users))
        try:
            observe(w, actor, rng.choice(list(BotClass)), random_query(w, rng))
        except PlatformError:
            pass
    assert world_hash(w) == before


LEVEL_ORDER = (Visibility.PUBLIC, Visibility.FRIENDS_ONLY, Visibility.OWNER_ONLY)


def _result_set(w, actor, bot_class, query):
    try:
        res = observe(w, actor, bot_class, query)
    except PlatformError:
        return set()
    return set(res.entities) | (set(res.payload) if isinstance(query, ListFriends) else set())


@given(st.integers(0, 2**32))
def test_tightening_a_policy_never_enlarges_results(seed):
    rng = random.Random(seed)
    w = populate(mixed_world(seed % 5), rng, steps=150)
    eid = rng.choice(sorted(set(w.users) | set(w.posts) | set(w.groups)))
    level = w.policies[eid]
    if level is Visibility.OWNER_ONLY:
        return
    tighter = w.copy()
    tighter.policies[eid] = LEVEL_ORDER[LEVEL_ORDER.index(level) + 1]
    for _ in range(25):
        actor = rng.randrange(len(w.users))
        bot_class = rng.choice(list(BotClass))
        q = random_query(w, random.Random(rng.random()))
        loose, tight = _result_set(w, actor, bot_class, q), _result_set(tighter, actor, bot_class, q)
        # a capped search may fill the freed slot with the next match, so only its size is bounded
        assert len(tight) <= len(loose)
        if isinstance(q, SearchUsers):
            q = SearchUsers(q.trait, 10**6, q.within_hops)
            loose, tight = _result_set(w, actor, bot_class, q), _result_set(tighter, actor, bot_class, q)
        assert tight <= loose


# --- visibility oracle -----------------------------------------------------------


def _expected_visibility(w, ev):
    """Brute force over every user, on the world as it stood before the event."""
    a = ev.action
    home = w.users[ev.actor].partition

    def sees(u):
        if w.users[u].partition is not home:
            return False
        if isinstance(a, SendFriendRequest) or isinstance(a, SendMessage) or isinstance(a, ShareData):
            return u == a.to
        if isinstance(a, AcceptFriendRequest):
            return u == a.sender
        if isinstance(a, GetMessage):
            return u == w.messages[a.message].sender
        if isinstance(a, CreatePost):
            if a.privacy is Visibility.PUBLIC:
                return True
            if a.privacy is Visibility.FRIENDS_ONLY:
                return u == ev.actor or u in w.friends[ev.actor]
            return u == ev.actor
        if isinstance(a, JoinGroup):
            return u == ev.actor or u in w.members[a.group]
        raise AssertionError(a)

    return tuple(u for u in sorted(w.users) if sees(u))


@pytest.mark.parametrize("seed", range(5))
def test_stored_visibility_matches_brute_force(seed):
    rng = random.Random(seed)
    initial = mixed_world(seed)
    w = initial.copy()
    while len(w.events) < 50:
        uid = rng.randrange(len(w.users))
        origin = Origin.REAL_USER if w.users[uid].partition is Partition.PROTECTED else Origin.BOT
        apply_action(w, uid, W, random_action(w, rng), len(w.events), origin=origin)
    shadow = initial.copy()
    for ev in w.events[:50]:
        assert ev.visibility == _expected_visibility(shadow, ev)
        replay(shadow, [{"outcome": "ok", "action": to_dict(ev.action), "actor": ev.actor,
                         "vtime": ev.vtime, "visibility": ev.visibility, "origin": ev.origin.value}])


# --- isolation and event sourcing --------------------------------------------------


@given(st.integers(0, 2**32))
def test_protected_hash_changes_only_through_real_user_actions(seed):
    rng = random.Random(seed)
    w = mixed_world(seed % 4, n=30, n_protected=8)
    watcher = PartitionWatcher(w)
    last = watcher.digest()
    for t in range(150):
        uid = rng.randrange(len(w.users))
        origin = rng.choice(list(Origin))
        apply_action(w, uid, rng.choice(list(BotClass)), random_action(w, rng), t, origin=origin)
        now = watcher.digest()
        if now != last:
            assert origin is Origin.REAL_USER
        last = now
    assert last == partition_hash(w)


@given(st.integers(0, 2**32))
def test_replaying_the_event_log_reproduces_the_world(seed):
    rng = random.Random(seed)
    initial = mixed_world(seed % 4)
    w = populate(initial.copy(), rng, steps=200)
    records = [
        {"outcome": "ok", "action": to_dict(ev.action), "actor": ev.actor, "vtime": ev.vtime,
         "visibility": list(ev.visibility), "origin": ev.origin.value}
        for ev in w.events
    ]
    assert world_hash(replay(initial.copy(), records)) == world_hash(w)


def test_action_dict_round_trip():
    for action in (SendFriendRequest(3), CreatePost(2, Visibility.FRIENDS_ONLY), ShareData(4, 5), SearchUsers("vulnerable", 3, 1)):
        assert from_dict(to_dict(action)) == action


# --- faults -------------------------------------------------------------------------


def test_message_drop_fault_changes_nothing_and_is_deterministic():
    w, a, b = friends_world()
    before = world_hash(w)
    out = apply_action(w, a, W, SendMessage(b), 0, faults=FaultConfig(message_drop=1.0, seed=5))
    assert out.status == DROPPED and world_hash(w) == before
    draws = []
    for _ in range(2):
        w2, a2, b2 = friends_world()
        f = FaultConfig(message_drop=0.5, seed=11)
        draws.append([apply_action(w2, a2, W, SendMessage(b2), t, faults=f).status for t in range(40)])
    assert draws[0] == draws[1] and "ok" in draws[0] and DROPPED in draws[0]


def test_notification_loss_hides_event_from_recipient():
    w, a, b = friends_world()
    out = apply_action(w, a, W, SendMessage(b), 0, faults=FaultConfig(notification_loss=1.0))
    assert out.ok and out.events[0].visibility == ()
    assert not w.notifications[b] and visible_events(w, b) == []


def test_privacy_downgrade_treats_friends_only_as_public():
    w, a, b = two_users(Visibility.FRIENDS_ONLY)
    with pytest.raises(PrivacyDenied):
        observe(w, a, W, ViewProfile(b))
    assert observe(w, a, W, ViewProfile(b), faults=FaultConfig(privacy_downgrade=True)).entities == (b,)


def test_partition_watcher_matches_full_hash():
    rng = random.Random(9)
    w = mixed_world(2)
    watcher = PartitionWatcher(w)
    for _ in range(5):
        populate(w, rng, steps=40)
        assert watcher.digest() == partition_hash(w)
