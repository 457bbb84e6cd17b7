"""Seeded synthetic social graphs used as episode environments."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np

from .platform.model import Partition, Visibility, WorldState


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class PreferentialAttachment:
    """Grow from an m-clique; each arrival links to m distinct nodes chosen by degree."""

    m: int


@dataclass(frozen=True)
class ErdosRenyi:
    p: float


@dataclass(frozen=True)
class Ring:
    """Each node linked to its k nearest ring neighbours (k even)."""

    k: int


GraphModel = Union[PreferentialAttachment, ErdosRenyi, Ring]


@dataclass(frozen=True)
class GroupSpec:
    count: int = 0
    membership: float = 0.0


@dataclass(frozen=True)
class GraphSpec:
    n_users: int
    model: GraphModel = field(default_factory=lambda: PreferentialAttachment(1))
    vulnerability: float = 0.0
    n_vulnerable: int | None = None
    bad_actors: int = 0
    groups: GroupSpec = field(default_factory=GroupSpec)
    profile_privacy: tuple[float, float, float] = (1.0, 0.0, 0.0)
    n_protected: int = 0
    cross_partition_edges: bool = False
    seed: int = 0

    def validate(self) -> None:
        n = self.n_users
        if n < 1:
            raise InvalidSpec("n_users must be at least 1")
        if not 0.0 <= self.vulnerability <= 1.0:
            raise InvalidSpec("vulnerability probability must lie in [0, 1]")
        if not 0 <= self.bad_actors < n:
            raise InvalidSpec("bad-actor count must be below n_users")
        if self.n_vulnerable is not None and not 0 <= self.n_vulnerable <= n - self.bad_actors:
            raise InvalidSpec("n_vulnerable must fit beside the bad actors")
        if self.n_protected < 0:
            raise InvalidSpec("n_protected must be non-negative")
        if self.groups.count < 0 or not 0.0 <= self.groups.membership <= 1.0:
            raise InvalidSpec("bad group spec")
        weights = self.profile_privacy
        if len(weights) != 3 or min(weights) < 0 or sum(weights) <= 0:
            raise InvalidSpec("profile_privacy needs three non-negative weights")
        model = self.model
        if isinstance(model, PreferentialAttachment):
            if not 0 <= model.m < n:
                raise InvalidSpec("preferential attachment needs 0 <= m < n_users")
        elif isinstance(model, ErdosRenyi):
            if not 0.0 <= model.p <= 1.0:
                raise InvalidSpec("edge probability must lie in [0, 1]")
        elif isinstance(model, Ring):
            if model.k < 0 or model.k % 2 or (n > 1 and model.k >= n) or (n == 1 and model.k):
                raise InvalidSpec("ring degree k must be even and below n_users")
        else:
            raise InvalidSpec(f"unknown graph model {model!r}")


def _pa_edges(n: int, m: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    edges = [(a, b) for a in range(m) for b in range(a + 1, m)]
    # each node appears once per incident edge: sampling from it is degree-proportional
    repeated = [v for e in edges for v in e]
    for v in range(m, n):
        chosen: set[int] = set()
        if not repeated:
            chosen = set(range(min(m, v)))
        while len(chosen) < m:
            chosen.add(repeated[int(rng.integers(len(repeated)))])
        for u in sorted(chosen):
            edges.append((u, v))
            repeated.extend((u, v))
    return edges


def _er_edges(n: int, p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    if n < 2 or p == 0.0:
        return []
    rows, cols = np.triu_indices(n, k=1)
    keep = rng.random(rows.size) < p
    return list(zip(rows[keep].tolist(), cols[keep].tolist()))


def _ring_edges(n: int, k: int) -> list[tuple[int, int]]:
    edges = set()
    for v in range(n):
        for step in range(1, k // 2 + 1):
            a, b = v, (v + step) % n
            edges.add((min(a, b), max(a, b)))
    return sorted(edges)


def model_edges(model: GraphModel, n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    if isinstance(model, PreferentialAttachment):
        return _pa_edges(n, model.m, rng)
    if isinstance(model, ErdosRenyi):
        return _er_edges(n, model.p, rng)
    return _ring_edges(n, model.k)


def generate(spec: GraphSpec) -> WorldState:
    """Build a fresh world from ``spec``; identical specs give identical worlds."""
    return _generate_cached(spec).copy()


@lru_cache(maxsize=64)
def _generate_cached(spec: GraphSpec) -> WorldState:
    spec.validate()
    rng = np.random.default_rng(spec.seed & ((1 << 64) - 1))
    n, n_prot = spec.n_users, spec.n_protected
    total = n + n_prot

    synthetic_edges = model_edges(spec.model, n, rng)
    protected_edges = [(a + n, b + n) for a, b in model_edges(spec.model, n_prot, rng)] if n_prot > 1 else []
    cross: list[tuple[int, int]] = []
    if spec.cross_partition_edges and n_prot:
        for v in range(n, total):
            cross.append((int(rng.integers(n)), v))

    if spec.n_vulnerable is not None:
        vuln_ids = set(rng.choice(n, size=spec.n_vulnerable, replace=False).tolist()) if spec.n_vulnerable else set()
    else:
        vuln_ids = set(np.flatnonzero(rng.random(n) < spec.vulnerability).tolist())
    candidates = [u for u in range(n) if u not in vuln_ids]
    bad_ids = set(rng.choice(candidates, size=spec.bad_actors, replace=False).tolist()) if spec.bad_actors else set()

    weights = np.asarray(spec.profile_privacy, dtype=float)
    levels = (Visibility.PUBLIC, Visibility.FRIENDS_ONLY, Visibility.OWNER_ONLY)
    policy_draws = rng.choice(3, size=total, p=weights / weights.sum())

    world = WorldState(cross_partition_edges=spec.cross_partition_edges)
    for uid in range(total):
        partition = Partition.SYNTHETIC if uid < n else Partition.PROTECTED
        world.add_user(
            partition,
            vulnerable=uid in vuln_ids,
            bad_actor=uid in bad_ids,
            policy=levels[int(policy_draws[uid])],
        )
    for a, b in synthetic_edges + protected_edges + cross:
        world.add_edge(a, b)

    for _ in range(spec.groups.count):
        gid = world.add_group(Partition.SYNTHETIC)
        joined = np.flatnonzero(rng.random(n) < spec.groups.membership).tolist()
        world.members[gid].update(joined)
    return world


@dataclass(frozen=True)
class DegreeStats:
    min: int
    max: int
    mean: float
    histogram: dict[int, int]


def degree_stats(world: WorldState) -> DegreeStats:
    degrees = [len(world.friends[u]) for u in world.users]
    if not degrees:
        return DegreeStats(0, 0, 0.0, {})
    return DegreeStats(min(degrees), max(degrees), sum(degrees) / len(degrees), dict(sorted(Counter(degrees).items())))
