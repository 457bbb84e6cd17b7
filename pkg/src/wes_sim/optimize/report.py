"""Serialized outputs of a mechanism search."""

from __future__ import annotations

import json
from typing import Sequence

from ..mechanism import GenomeSpace, params_to_dict
from .nsga2 import Individual


def pareto_json(front: Sequence[Individual], space: GenomeSpace, seeds: Sequence[int]) -> str:
    genes = [g.name for g in space.free]
    rows = [
        {
            "genome": list(ind.genome),
            "params": params_to_dict(space.decode(ind.genome)),
            "objectives": {"f1": ind.objectives[0], "f2": ind.objectives[1]},
            "seeds": list(seeds),
        }
        for ind in sorted(front, key=lambda i: i.genome)
    ]
    return json.dumps({"genes": genes, "front": rows}, indent=2) + "\n"
