"""Backtracking label-preserving (sub)graph isomorphism tests."""

from __future__ import annotations

from ..graph import LabeledGraph


def _match(g1: LabeledGraph, g2: LabeledGraph, induced: bool, exact_size: bool) -> dict[int, int] | None:
    n1, n2 = g1.node_count, g2.node_count
    if n1 > n2 or (exact_size and (n1 != n2 or g1.edge_count != g2.edge_count)):
        return None
    if not exact_size and g1.edge_count > g2.edge_count:
        return None
    order = sorted(range(n1), key=lambda v: -g1.degree(v))
    fwd: dict[int, int] = {}
    used: set[int] = set()

    def ok(v: int, w: int) -> bool:
        if g1.labels[v] != g2.labels[w] or g1.degree(v) > g2.degree(w):
            return False
        if exact_size and g1.degree(v) != g2.degree(w):
            return False
        for u, pu in fwd.items():
            e1 = g1.has_edge(u, v)
            e2 = g2.has_edge(pu, w)
            if e1 and not e2:
                return False
            if induced and e2 and not e1:
                return False
        return True

    def rec(i: int) -> bool:
        if i == n1:
            return True
        v = order[i]
        for w in range(n2):
            if w in used or not ok(v, w):
                continue
            fwd[v] = w
            used.add(w)
            if rec(i + 1):
                return True
            del fwd[v]
            used.discard(w)
        return False

    return dict(fwd) if rec(0) else None


def is_isomorphic(g1: LabeledGraph, g2: LabeledGraph) -> bool:
    return _match(g1, g2, induced=True, exact_size=True) is not None


def is_subgraph_isomorphic(g1: LabeledGraph, g2: LabeledGraph) -> bool:
    """Whether ``g1`` embeds into ``g2`` as a (not necessarily induced) subgraph."""
    return _match(g1, g2, induced=False, exact_size=False) is not None


def subgraph_embedding(g1: LabeledGraph, g2: LabeledGraph, ignore_labels: bool = False) -> dict[int, int] | None:
    if ignore_labels:
        g1 = LabeledGraph(["x"] * g1.node_count, g1.edges)
        g2 = LabeledGraph(["x"] * g2.node_count, g2.edges)
    return _match(g1, g2, induced=False, exact_size=False)
