"""Exhaustive reference computations for tiny graphs.

These enumerate every mapping or every subgraph and share no code with the
branch-and-bound search; they exist to cross-check it.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterator

from ..graph import LabeledGraph
from .policy import DistancePolicy, NodeMapping, ged_under_mapping


def all_mappings(n1: int, n2: int) -> Iterator[NodeMapping]:
    """Every bijection between the dummy-padded node sets."""
    targets = list(range(n2)) + [None] * n1
    seen = set()
    for combo in itertools.permutations(targets, n1):
        if combo in seen:
            continue
        seen.add(combo)
        assign = [-1 if w is None else w for w in combo]
        yield NodeMapping.from_assignment(assign, n2)


def brute_force_ged(g1: LabeledGraph, g2: LabeledGraph, policy: DistancePolicy | None = None) -> float:
    policy = policy or DistancePolicy.ged()
    best = math.inf
    for pi in all_mappings(g1.node_count, g2.node_count):
        best = min(best, ged_under_mapping(g1, g2, pi, policy))
    return best


def all_subgraphs(g: LabeledGraph) -> Iterator[LabeledGraph]:
    """Every subgraph: any node subset with any subset of its induced edges."""
    n = g.node_count
    for k in range(n + 1):
        for nodes in itertools.combinations(range(n), k):
            index = {v: i for i, v in enumerate(nodes)}
            induced = [(index[u], index[v]) for u, v in g.sorted_edges() if u in index and v in index]
            labels = [g.labels[v] for v in nodes]
            for r in range(len(induced) + 1):
                for edges in itertools.combinations(induced, r):
                    yield LabeledGraph(labels, edges)


def brute_force_sed(
    gq: LabeledGraph,
    gt: LabeledGraph,
    ged: Callable[[LabeledGraph, LabeledGraph], float] | None = None,
) -> float:
    """Minimum GED from ``gq`` to any subgraph of ``gt``.

    ``ged`` defaults to :func:`brute_force_ged` with the binary policy.
    """
    ged = ged or brute_force_ged
    return min(ged(gq, s) for s in all_subgraphs(gt))
