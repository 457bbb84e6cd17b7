import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wes_sim.mechanism import GenomeSpace, identity_params
from wes_sim.optimize import (
    Archive,
    CoevolutionConfig,
    Individual,
    MechanismEvaluator,
    coevolve,
    crowding_distance,
    dominates,
    environmental_selection,
    episode_objectives,
    evaluate_mechanism,
    knee_point,
    make_offspring,
    non_dominated_sort,
    nsga2_step,
    pareto_json,
    run_nsga2,
)
from wes_sim.runner import frozen, scammer_script, train_policy
from wes_sim.seeding import split_seed


def brute_ranks(points):
    """Peel fronts with an O(n^2 m) dominance check."""
    left = set(range(len(points)))
    ranks = [None] * len(points)
    r = 0
    while left:
        front = {i for i in left if not any(
            all(points[j][k] <= points[i][k] for k in range(len(points[i])))
            and any(points[j][k] < points[i][k] for k in range(len(points[i])))
            for j in left if j != i)}
        for i in front:
            ranks[i] = r
        left -= front
        r += 1
    return ranks


def test_hand_checkable_ranks():
    assert non_dominated_sort([(1, 2), (2, 1), (2, 2)]) == [0, 0, 1]
    assert non_dominated_sort([(3, 3)] * 4) == [0, 0, 0, 0]
    assert dominates((1, 1), (1, 2)) and not dominates((1, 1), (1, 1))


@pytest.mark.parametrize("seed", range(20))
def test_sort_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    pts = [tuple(p) for p in rng.integers(0, 6, size=(50, int(rng.integers(2, 4)))).tolist()]
    assert non_dominated_sort(pts) == brute_ranks(pts)


def test_crowding_examples():
    assert crowding_distance([(0, 1), (1, 0)]) == [math.inf, math.inf]
    pts = [(i, 4 - i) for i in range(5)]
    d = crowding_distance(pts)
    assert d[0] == d[4] == math.inf
    assert d[1] == d[2] == d[3] == pytest.approx(1.0)


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=15), st.randoms())
def test_crowding_ignores_input_order(points, rnd):
    perm = list(range(len(points)))
    rnd.shuffle(perm)
    d = crowding_distance(points)
    dp = crowding_distance([points[i] for i in perm])
    assert [d[i] for i in perm] == dp


def toy(genome):
    a, b = genome
    return (float((a - 3) ** 2 + b), float(abs(a - 8) + (5 - b) % 6))


def toy_many(genomes):
    return [toy(g) for g in genomes]


SPACE2 = GenomeSpace(genes=("SendMessage.max", "SendFriendRequest.max"), bounds=(("SendMessage.max", 0, 15), ("SendFriendRequest.max", 0, 3)))


def test_closure_without_variation():
    rng = np.random.default_rng(0)
    pop = [Individual(g, toy(g)) for g in [(1, 2), (5, 0), (9, 3), (12, 1)]]
    kids = make_offspring(pop, SPACE2, rng, crossover=False, mutation_prob=0.0)
    assert set(kids) <= {ind.genome for ind in pop}


@pytest.mark.parametrize("seed", range(20))
def test_elitism_and_constant_population(seed):
    rng = np.random.default_rng(seed)
    pop = [Individual(g, toy(g)) for g in {SPACE2.random(rng) for _ in range(8)}][:8]
    while len(pop) < 8:
        pop.append(pop[0])
    for _ in range(5):
        new = nsga2_step(pop, rng, SPACE2, toy_many)
        assert len(new) == len(pop)
        ranks = non_dominated_sort([i.objectives for i in new])
        best = [ind for ind, r in zip(new, ranks) if r == 0]
        for ind in best:
            assert not any(dominates(old.objectives, ind.objectives) for old in pop)
        pop = new


def test_clones_give_a_single_genome_front():
    pop = [Individual((4, 1), toy((4, 1)))] * 6
    assert {i.genome for i in environmental_selection(pop, 6)} == {(4, 1)}
    archive = Archive()
    for ind in pop:
        archive.add(ind)
    assert [i.genome for i in archive.front()] == [(4, 1)]


def test_selection_prefers_distinct_genomes():
    a = Individual((0, 0), (0.0, 0.0))
    b = Individual((1, 1), (5.0, 5.0))
    assert environmental_selection([a, a, a, b], 2) == [a, b]


def test_enumerable_front_equals_the_exhaustive_pareto_set():
    everything = SPACE2.enumerate()
    assert len(everything) == 64
    objs = toy_many(everything)
    exhaustive = {g for g, r in zip(everything, non_dominated_sort(objs)) if r == 0}
    result = run_nsga2(SPACE2, toy_many, population=16, generations=20, seed=3)
    assert {i.genome for i in result.front} == exhaustive
    assert len(result.generations) == 21


def test_search_is_seed_deterministic():
    a = run_nsga2(SPACE2, toy_many, population=8, generations=5, seed=9)
    b = run_nsga2(SPACE2, toy_many, population=8, generations=5, seed=9)
    assert [i.genome for i in a.population] == [i.genome for i in b.population]


def test_population_must_be_even():
    with pytest.raises(ValueError):
        run_nsga2(SPACE2, toy_many, population=7)


def test_knee_point():
    front = [Individual((0,), (0.0, 10.0)), Individual((1,), (4.0, 4.0)), Individual((2,), (10.0, 0.0))]
    assert knee_point(front).genome == (1,)
    tied = [Individual((5,), (0.0, 1.0)), Individual((3,), (1.0, 0.0))]
    assert knee_point(tied).genome == (3,)


# --- episode fitness -----------------------------------------------------------------


@pytest.fixture(scope="module")
def trained():
    script = scammer_script(0)
    return script, frozen(train_policy(script, 60, seed=0).policy)


def test_seedwise_mean(trained):
    script, policy = trained
    space = GenomeSpace(genes=("SendMessage.max",))
    seeds = [split_seed(4, i) for i in range(5)]
    for genome in [(16,), (1,)]:
        params = space.decode(genome)
        singles = [episode_objectives(script, params, s, {"scammer": policy}) for s in seeds]
        f1, f2 = evaluate_mechanism(genome, script, {"scammer": policy}, seeds, space)
        assert f1 == pytest.approx(sum(x for x, _ in singles) / 5, abs=1e-12)
        assert f2 == pytest.approx(sum(y for _, y in singles) / 5, abs=1e-12)
        assert f1 >= 0 and 0 <= f2 <= 1


def test_identity_costs_normal_users_nothing(trained):
    script, policy = trained
    f1, f2 = evaluate_mechanism(tuple(GenomeSpace().encode(identity_params())), script, {"scammer": policy}, [0, 1])
    assert f2 == 0.0 and f1 > 0


def test_evaluator_matches_serial_and_keeps_order(trained):
    script, policy = trained
    space = GenomeSpace(genes=("SendMessage.max", "SendMessage.mask"))
    genomes = [(3, 1), (0, 0), (3, 1), (16, 1)]
    serial = MechanismEvaluator(script, {"scammer": policy}, (0, 1), space)
    parallel = MechanismEvaluator(script, {"scammer": policy}, (0, 1), space, workers=2)
    assert serial(genomes) == parallel(genomes)
    assert serial.evaluations == 3
    assert serial(genomes[:1]) == serial(genomes)[:1] and serial.evaluations == 3


def test_masking_messages_stops_the_scammer(trained):
    script, policy = trained
    space = GenomeSpace(genes=("SendMessage.mask",))
    f1, _ = evaluate_mechanism((0,), script, {"scammer": policy}, [0, 1, 2], space)
    assert f1 == 0.0


def test_pareto_json_lists_genes_and_seeds():
    import json

    front = [Individual((2, 1), (0.5, 0.0))]
    doc = json.loads(pareto_json(front, SPACE2, [7, 8]))
    assert doc["genes"] == ["SendMessage.max", "SendFriendRequest.max"]
    assert doc["front"][0]["seeds"] == [7, 8]
    assert doc["front"][0]["params"]["rate_limits"]["SendMessage"]["max"] == 2


# --- co-evolution -----------------------------------------------------------------


SMALL = CoevolutionConfig(rounds=1, generations=2, retrain_episodes=10, population=4, seeds_per_eval=2,
                          space=GenomeSpace(genes=("SendMessage.max", "SendFriendRequest.mask")))


def test_single_round_is_search_then_retrain():
    from dataclasses import replace

    script = scammer_script(1)
    base = train_policy(script, 20, seed=5).policy
    result = coevolve(SMALL, script, seed=2, policy=base.copy())
    assert len(result.history) == 1
    rec = result.history[0]

    seeds = tuple(split_seed(2, "round", 0, "eval", i) for i in range(2))
    evaluator = MechanismEvaluator(script, {"scammer": frozen(base)}, seeds, SMALL.space)
    search = run_nsga2(SMALL.space, evaluator, population=4, generations=2, seed=split_seed(2, "round", 0, "nsga2"))
    knee = knee_point(search.front)
    assert rec.knee == knee and rec.f1_frozen == knee.objectives[0] and rec.f2 == knee.objectives[1]
    retrained = train_policy(replace(script, mechanism=SMALL.space.decode(knee.genome)), 10,
                             split_seed(2, "round", 0, "train"), policy=base.copy()).policy
    assert np.array_equal(retrained.q, result.policy.q)
    f1, _ = evaluate_mechanism(knee.genome, script, {"scammer": frozen(retrained)}, seeds, SMALL.space)
    assert rec.f1_retrained == f1


def test_history_has_one_row_per_round():
    from dataclasses import replace

    cfg = replace(SMALL, rounds=3)
    result = coevolve(cfg, scammer_script(0), seed=1, pretrain_episodes=5)
    assert [r.round for r in result.history] == [0, 1, 2]
    assert len(result.history_csv().splitlines()) == 4


def test_invalid_coevolution_config():
    from dataclasses import replace

    with pytest.raises(ValueError):
        coevolve(replace(SMALL, population=3), scammer_script(0))
    with pytest.raises(ValueError):
        coevolve(replace(SMALL, rounds=0), scammer_script(0))
