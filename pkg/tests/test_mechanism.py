import random
from collections import deque

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuzz import mixed_world, random_action
from wes_sim.mechanism import (
    COST_MAX,
    GENOME_BOUNDS,
    MASKED,
    RATE_LIMITED,
    RATE_MAX,
    WINDOW_MAX,
    Allow,
    Deny,
    GenomeSpace,
    MechanismParams,
    OutOfBounds,
    RateLedger,
    RateLimit,
    Transform,
    decode,
    encode,
    identity_params,
    mediate_action,
    mediate_observation,
    params_from_dict,
    params_to_dict,
)
from wes_sim.platform import apply_action, observe, world_hash
from wes_sim.platform.model import (
    N_ACTIONS,
    ActionType,
    BotClass,
    CreatePost,
    Origin,
    Partition,
    SearchUsers,
    SendFriendRequest,
    SendMessage,
    ViewProfile,
    Visibility,
)


@st.composite
def params_strategy(draw):
    limits = tuple(RateLimit(draw(st.integers(1, WINDOW_MAX)), draw(st.integers(0, RATE_MAX))) for _ in range(N_ACTIONS))
    return MechanismParams(
        limits,
        draw(st.integers(0, 32)),
        draw(st.integers(0, 4)),
        tuple(draw(st.booleans()) for _ in range(N_ACTIONS)),
        tuple(draw(st.integers(1, COST_MAX)) for _ in range(N_ACTIONS)),
    )


def test_identity_allows_everything_at_unit_cost():
    p = identity_params()
    assert all(p.action_mask) and p.action_cost == (1,) * N_ACTIONS
    ledger = RateLedger()
    for t in range(50):
        assert mediate_action(p, ledger, 0, SendMessage(1), t // 3) == Allow(1)


def test_three_messages_in_window_of_ten():
    p = identity_params().with_rate_limit(ActionType.SEND_MESSAGE, 10, 2)
    ledger = RateLedger()
    got = [mediate_action(p, ledger, 0, SendMessage(1), t) for t in (1, 2, 3)]
    assert got == [Allow(1), Allow(1), Deny(RATE_LIMITED)]
    assert mediate_action(p, ledger, 0, SendMessage(1), 11) == Allow(1)


def test_mask_wins_over_an_empty_ledger():
    p = identity_params().with_mask(ActionType.SEND_FRIEND_REQUEST, False)
    assert mediate_action(p, RateLedger(), 0, SendFriendRequest(1), 0) == Deny(MASKED)
    assert mediate_action(p, RateLedger(), 0, CreatePost(1), 0) == Allow(1)


def test_limits_are_per_actor_and_per_action():
    p = identity_params().with_rate_limit(ActionType.SEND_MESSAGE, 5, 1)
    ledger = RateLedger()
    assert mediate_action(p, ledger, 0, SendMessage(1), 0) == Allow(1)
    assert mediate_action(p, ledger, 1, SendMessage(0), 0) == Allow(1)
    assert mediate_action(p, ledger, 0, CreatePost(1), 0) == Allow(1)
    assert mediate_action(p, ledger, 0, SendMessage(1), 1) == Deny(RATE_LIMITED)


def _trace(rng, n=200):
    t, out = 0, []
    for _ in range(n):
        t += rng.choice((0, 0, 1, 1, 2, 5))
        out.append((rng.randrange(3), rng.choice((SendMessage(1), CreatePost(0), SendFriendRequest(2))), t))
    return out


@given(st.integers(1, WINDOW_MAX), st.integers(0, RATE_MAX), st.integers(0, 2**32))
def test_sliding_window_matches_brute_force_recount(window, mx, seed):
    p = MechanismParams(rate_limits=(RateLimit(window, mx),) * N_ACTIONS)
    ledger = RateLedger()
    allowed: dict = {}
    for actor, action, t in _trace(random.Random(seed)):
        d = mediate_action(p, ledger, actor, action, t)
        times = allowed.setdefault((actor, action.ordinal), [])
        in_window = sum(1 for s in times if t - window < s <= t)
        assert isinstance(d, Allow) == (in_window < mx)
        if isinstance(d, Allow):
            times.append(t)
    for times in allowed.values():
        for t in times:
            assert sum(1 for s in times if t - window < s <= t) <= mx


def _tighter(p, rng):
    limits = [RateLimit(min(WINDOW_MAX, rl.window + rng.randrange(3)), max(0, rl.max - rng.randrange(3))) for rl in p.rate_limits]
    masks = [m and rng.random() > 0.2 for m in p.action_mask]
    return MechanismParams(tuple(limits), max(0, p.search_result_cap - rng.randrange(5)), max(0, p.visibility_hops - rng.randrange(2)), tuple(masks), p.action_cost)


@given(params_strategy(), st.integers(0, 2**32))
def test_tightening_never_allows_more(p, seed):
    rng = random.Random(seed)
    q = _tighter(p, rng)
    trace = _trace(rng, 150)
    for prefix in (50, 150):
        counts = []
        for params in (p, q):
            ledger = RateLedger()
            counts.append(sum(isinstance(mediate_action(params, ledger, a, x, t), Allow) for a, x, t in trace[:prefix]))
        assert counts[1] <= counts[0]
    w = mixed_world(seed % 3)
    for actor in range(0, 30, 7):
        sizes = []
        for params in (p, q):
            query = SearchUsers(None, 20)
            d = mediate_observation(params, actor, query)
            if isinstance(d, Transform):
                query = d.query
            sizes.append(len(observe(w, actor, BotClass.WRITER, query).entities))
        assert sizes[1] <= sizes[0]


def _bfs(world, src, hops):
    seen, frontier = {src: 0}, deque([src])
    while frontier:
        u = frontier.popleft()
        if seen[u] == hops:
            continue
        for v in world.friends[u]:
            if v not in seen:
                seen[v] = seen[u] + 1
                frontier.append(v)
    return set(seen) - {src}


@pytest.mark.parametrize("hops", [0, 1, 2, 3])
def test_search_radius_matches_bfs(hops):
    w = mixed_world(5, n=60, n_protected=0)
    p = MechanismParams(visibility_hops=hops)
    for actor in range(0, 60, 5):
        d = mediate_observation(p, actor, SearchUsers(None, 100))
        assert isinstance(d, Transform)
        got = set(observe(w, actor, BotClass.WRITER, d.query).entities)
        reach = _bfs(w, actor, hops)
        assert got <= reach
        # the limit is large enough that only profile privacy removes anyone
        visible = {u for u in reach if w.policies[u] is Visibility.PUBLIC
                   or (w.policies[u] is Visibility.FRIENDS_ONLY and w.are_friends(actor, u))}
        assert got == visible


def test_zero_cap_is_an_empty_search():
    d = mediate_observation(MechanismParams(search_result_cap=0), 0, SearchUsers("vulnerable", 10))
    assert d == Transform(SearchUsers("vulnerable", 0, None))
    assert observe(mixed_world(0), 0, BotClass.WRITER, d.query).entities == ()


def test_identity_leaves_queries_unchanged():
    p = identity_params()
    for q in (SearchUsers(None, 10), SearchUsers("vulnerable", 100, 2), ViewProfile(3)):
        assert isinstance(mediate_observation(p, 0, q), Allow)


def test_identity_composition_is_a_pass_through():
    rng = random.Random(42)
    direct = mixed_world(1)
    mediated = direct.copy()
    p, ledger = identity_params(), RateLedger()
    for t in range(10_000):
        uid = rng.randrange(len(direct.users))
        origin = Origin.REAL_USER if direct.users[uid].partition is Partition.PROTECTED else Origin.BOT
        action = random_action(direct, rng)
        a = apply_action(direct, uid, BotClass.WRITER, action, t, origin=origin)
        assert mediate_action(p, ledger, uid, action, t) == Allow(1)
        b = apply_action(mediated, uid, BotClass.WRITER, action, t, origin=origin)
        assert a.status == b.status
    assert world_hash(direct) == world_hash(mediated)


@given(params_strategy())
def test_genome_round_trip(p):
    assert decode(encode(p)) == p
    assert params_from_dict(params_to_dict(p)) == p


def test_identity_sits_at_upper_bounds():
    assert list(encode(identity_params())) == [g.high for g in GENOME_BOUNDS]
    assert len(GENOME_BOUNDS) == 30


def test_out_of_bounds_is_an_error_not_a_clamp():
    g = encode(identity_params())
    g[1] = RATE_MAX + 1
    with pytest.raises(OutOfBounds):
        decode(g)
    with pytest.raises(OutOfBounds):
        decode(g[:-1])
    with pytest.raises(OutOfBounds):
        MechanismParams(action_cost=(0,) * N_ACTIONS).validate()
    with pytest.raises(OutOfBounds):
        params_from_dict({"action_mask": {"Teleport": False}})
    with pytest.raises(OutOfBounds):
        params_from_dict({"speed": 3})


def test_genome_space_pins_unnamed_genes():
    base = identity_params().with_cost(ActionType.CREATE_POST, 3)
    space = GenomeSpace(base, genes=("SendMessage.max", "SendMessage.mask"), bounds=(("SendMessage.max", 0, 3),))
    assert len(space) == 2 and space.size() == 8
    assert len(space.enumerate()) == 8
    p = space.decode((1, 0))
    assert p.rate_limits[ActionType.SEND_MESSAGE].max == 1
    assert p.action_mask[ActionType.SEND_MESSAGE] is False
    assert p.action_cost[ActionType.CREATE_POST] == 3
    assert space.encode(p) == (1, 0)
    assert not space.contains((4, 0))
    with pytest.raises(OutOfBounds):
        space.decode((4, 0))
    with pytest.raises(OutOfBounds):
        GenomeSpace(genes=("nope",)).free
    genome = space.random(np.random.default_rng(0))
    assert space.contains(genome)
