"""NSGA-II over integer mechanism genomes (both objectives minimized)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..mechanism import GenomeSpace

Genome = tuple[int, ...]
Objectives = tuple[float, ...]
EvaluateMany = Callable[[Sequence[Genome]], list[Objectives]]


@dataclass(frozen=True)
class Individual:
    genome: Genome
    objectives: Objectives
    seeds: tuple[int, ...] = ()


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """a dominates b: no worse everywhere, strictly better somewhere."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def non_dominated_sort(points: Sequence[Sequence[float]]) -> list[int]:
    """Fast non-dominated sorting; rank 0 is the non-dominated set."""
    n = len(points)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    counts = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(points[i], points[j]):
                dominated_by[i].append(j)
                counts[j] += 1
            elif dominates(points[j], points[i]):
                dominated_by[j].append(i)
                counts[i] += 1
    ranks = [0] * n
    front = [i for i in range(n) if counts[i] == 0]
    rank = 0
    while front:
        nxt = []
        for i in front:
            ranks[i] = rank
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        front = nxt
        rank += 1
    return ranks


def crowding_distance(points: Sequence[Sequence[float]]) -> list[float]:
    """Crowding distance within one front.

    Every point sharing an objective's minimum or maximum value is a
    boundary point (infinite distance), and interior gaps are measured
    between the nearest distinct neighbouring values, so the result does not
    depend on input order.
    """
    n = len(points)
    if n == 0:
        return []
    dist = [0.0] * n
    m = len(points[0])
    for k in range(m):
        values = sorted({p[k] for p in points})
        lo, hi = values[0], values[-1]
        span = hi - lo
        position = {v: i for i, v in enumerate(values)}
        for i, p in enumerate(points):
            v = p[k]
            if v == lo or v == hi:
                dist[i] = math.inf
            elif span > 0 and dist[i] != math.inf:
                j = position[v]
                dist[i] += (values[j + 1] - values[j - 1]) / span
    return dist


def _rank_and_crowd(objs: Sequence[Objectives]) -> tuple[list[int], list[float]]:
    ranks = non_dominated_sort(objs)
    crowd = [0.0] * len(objs)
    for r in set(ranks):
        members = [i for i in range(len(objs)) if ranks[i] == r]
        for i, d in zip(members, crowding_distance([objs[i] for i in members])):
            crowd[i] = d
    return ranks, crowd


def _better(i: int, j: int, ranks: list[int], crowd: list[float]) -> bool:
    return ranks[i] < ranks[j] or (ranks[i] == ranks[j] and crowd[i] > crowd[j])


def environmental_selection(pool: Sequence[Individual], size: int) -> list[Individual]:
    """Pick ``size`` survivors by (rank, crowding).  Distinct genomes are
    preferred; repeated genomes only fill places no distinct genome can."""
    seen: set[Genome] = set()
    unique, repeats = [], []
    for ind in pool:
        (repeats if ind.genome in seen else unique).append(ind)
        seen.add(ind.genome)
    chosen: list[Individual] = []
    if unique:
        objs = [ind.objectives for ind in unique]
        ranks = non_dominated_sort(objs)
        for r in range(max(ranks) + 1):
            members = [i for i in range(len(unique)) if ranks[i] == r]
            if len(chosen) + len(members) <= size:
                chosen.extend(unique[i] for i in members)
                continue
            crowd = crowding_distance([objs[i] for i in members])
            order = sorted(range(len(members)), key=lambda k: (-crowd[k], unique[members[k]].genome))
            chosen.extend(unique[members[k]] for k in order[: size - len(chosen)])
            break
    chosen.extend(repeats[: size - len(chosen)])
    return chosen


@dataclass
class Archive:
    """Every genome evaluated so far, with its objectives."""

    entries: dict[Genome, Individual] = field(default_factory=dict)

    def add(self, ind: Individual) -> None:
        self.entries.setdefault(ind.genome, ind)

    def front(self) -> list[Individual]:
        inds = sorted(self.entries.values(), key=lambda i: i.genome)
        ranks = non_dominated_sort([i.objectives for i in inds])
        return [ind for ind, r in zip(inds, ranks) if r == 0]


def _mutate(genome: list[int], space: GenomeSpace, rng: np.random.Generator, prob: float) -> None:
    lows, highs = space.lows, space.highs
    for g in range(len(genome)):
        if rng.random() < prob:
            genome[g] = int(rng.integers(lows[g], highs[g] + 1))


def make_offspring(
    population: Sequence[Individual],
    space: GenomeSpace,
    rng: np.random.Generator,
    *,
    crossover: bool = True,
    mutation_prob: Optional[float] = None,
    avoid: Optional[set[Genome]] = None,
    retries: int = 10,
) -> list[Genome]:
    """Binary tournament, uniform crossover and per-gene uniform mutation.

    With ``avoid`` (the genomes already evaluated), a child that repeats one
    is mutated again, a gene at a time, up to ``retries`` times.
    """
    n = len(population)
    if n % 2:
        raise ValueError("population size must be even")
    length = len(space)
    pm = 1.0 / length if mutation_prob is None else mutation_prob
    ranks, crowd = _rank_and_crowd([ind.objectives for ind in population])

    def tournament() -> int:
        i, j = (int(x) for x in rng.integers(n, size=2))
        return j if _better(j, i, ranks, crowd) else i

    children: list[Genome] = []
    for _ in range(n // 2):
        a = list(population[tournament()].genome)
        b = list(population[tournament()].genome)
        if crossover:
            for g in range(length):
                if rng.random() < 0.5:
                    a[g], b[g] = b[g], a[g]
        for child in (a, b):
            _mutate(child, space, rng, pm)
            if avoid is not None and pm > 0:
                tries = 0
                while tuple(child) in avoid and tries < retries:
                    g = int(rng.integers(length))
                    child[g] = int(rng.integers(space.lows[g], space.highs[g] + 1))
                    tries += 1
                avoid.add(tuple(child))
            children.append(tuple(child))
    return children


def nsga2_step(
    population: Sequence[Individual],
    rng: np.random.Generator,
    space: GenomeSpace,
    evaluate: EvaluateMany,
    *,
    crossover: bool = True,
    mutation_prob: Optional[float] = None,
    archive: Optional[Archive] = None,
) -> list[Individual]:
    """One generation: offspring creation, evaluation and mu+lambda selection."""
    avoid = set(archive.entries) if archive is not None else None
    children = make_offspring(population, space, rng, crossover=crossover, mutation_prob=mutation_prob, avoid=avoid)
    objs = evaluate(children)
    offspring = [Individual(g, o) for g, o in zip(children, objs)]
    if archive is not None:
        for ind in offspring:
            archive.add(ind)
    return environmental_selection(list(population) + offspring, len(population))


@dataclass
class NSGA2Result:
    population: list[Individual]
    front: list[Individual]
    archive: Archive
    generations: list[list[Individual]]


def run_nsga2(
    space: GenomeSpace,
    evaluate: EvaluateMany,
    *,
    population: int = 16,
    generations: int = 20,
    seed: int = 0,
    include_base: bool = True,
    crossover: bool = True,
    mutation_prob: Optional[float] = None,
    on_generation: Optional[Callable[[int, list[Individual]], None]] = None,
) -> NSGA2Result:
    """Evolve ``population`` genomes for ``generations`` steps.

    The initial population holds the base mechanism (when ``include_base``
    and it lies inside the space)
    and distinct random genomes.  The returned front is the non-dominated set
    of every genome evaluated during the run.
    """
    if population < 2 or population % 2:
        raise ValueError("population must be even and at least 2")
    rng = np.random.default_rng(seed)
    genomes: list[Genome] = []
    if include_base and space.contains(space.encode(space.base)):
        genomes.append(space.encode(space.base))
    attempts = 0
    while len(genomes) < population:
        g = space.random(rng)
        attempts += 1
        if g not in genomes or attempts > 50 * population:
            genomes.append(g)
    archive = Archive()
    pop = [Individual(g, o) for g, o in zip(genomes, evaluate(genomes))]
    for ind in pop:
        archive.add(ind)
    history = [pop]
    for gen in range(generations):
        pop = nsga2_step(pop, rng, space, evaluate, crossover=crossover, mutation_prob=mutation_prob, archive=archive)
        history.append(pop)
        if on_generation is not None:
            on_generation(gen, pop)
    return NSGA2Result(pop, archive.front(), archive, history)


def knee_point(front: Sequence[Individual]) -> Individual:
    """Front member with the smallest sum of min-max normalized objectives
    (ties: smallest genome)."""
    if not front:
        raise ValueError("empty front")
    objs = np.array([ind.objectives for ind in front], dtype=float)
    lo, hi = objs.min(axis=0), objs.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    scores = ((objs - lo) / span).sum(axis=1)
    best = min(range(len(front)), key=lambda i: (scores[i], front[i].genome))
    return front[best]
