"""Exact GED and SED by branch-and-bound over node assignments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..graph import EPSILON, LabeledGraph
from . import _backend
from .policy import (
    COST_TOL,
    DistanceBounds,
    DistancePolicy,
    Mode,
    NodeMapping,
    ged_under_mapping,
)

DEFAULT_NODE_CAP = 20
DEFAULT_BUDGET = 1_000_000


@dataclass
class ExactResult:
    bounds: DistanceBounds
    mapping: NodeMapping | None
    expansions: int
    complete: bool
    trace: list[float] = field(default_factory=list, repr=False)

    @property
    def value(self) -> float:
        """Exact distance; only meaningful when ``complete``."""
        return self.bounds.upper

    @property
    def lower(self) -> float:
        return self.bounds.lower

    @property
    def upper(self) -> float:
        return self.bounds.upper


def assignment_order(g: LabeledGraph) -> list[int]:
    """Left-node branching order: highest degree first, then grow along edges.

    Each next node is the unplaced one with the most already-placed
    neighbours, ties broken by degree (descending) then index.
    """
    n = g.node_count
    placed = [False] * n
    links = [0] * n
    order = []
    for _ in range(n):
        best = -1
        for v in range(n):
            if placed[v]:
                continue
            if best < 0 or (links[v], g.degree(v), -v) > (links[best], g.degree(best), -best):
                best = v
        placed[best] = True
        order.append(best)
        for u in g.adjacency[best]:
            links[u] += 1
    return order


def _prepare(g1: LabeledGraph, g2: LabeledGraph, policy: DistancePolicy):
    n1, n2 = g1.node_count, g2.node_count
    ids: dict[str, int] = {}
    lab1 = [ids.setdefault(l, len(ids)) for l in g1.labels]
    lab2 = [ids.setdefault(l, len(ids)) for l in g2.labels]
    cost = np.empty((n1, n2 + 1), dtype=np.float64)
    cache: dict[tuple, float] = {}

    def c(a, b):
        key = (a, b)
        if key not in cache:
            cache[key] = policy.node_cost(a, b)
        return cache[key]

    for v, a in enumerate(g1.labels):
        for w, b in enumerate(g2.labels):
            cost[v, w] = c(a, b)
        cost[v, n2] = c(a, EPSILON)
    ins = np.array([c(EPSILON, b) for b in g2.labels], dtype=np.float64)
    binary = policy.label_distance is None
    return dict(
        n1=n1,
        n2=n2,
        adj1=g1.adjacency_matrix(),
        adj2=g2.adjacency_matrix(),
        nbrs1=[list(a) for a in g1.adjacency],
        nbrs2=[list(a) for a in g2.adjacency],
        deg1=np.array([g1.degree(v) for v in range(n1)], dtype=np.intc),
        deg2=np.array([g2.degree(w) for w in range(n2)], dtype=np.intc),
        cost=cost,
        ins=ins,
        e_del=policy.edge_delete_cost,
        e_ins=policy.edge_insert_cost,
        lab1=np.array(lab1, dtype=np.intc),
        lab2=np.array(lab2, dtype=np.intc),
        n_lab=max(len(ids), 1),
        binary=binary,
        ins_unit=0.0 if policy.is_sed else 1.0,
        order=np.array(assignment_order(g1), dtype=np.intc),
    )


def _as_lists(args: dict) -> dict:
    out = dict(args)
    for key in ("adj1", "adj2", "deg1", "deg2", "cost", "ins", "lab1", "lab2", "order"):
        out[key] = args[key].tolist()
    return out


def exact_ged(
    g1: LabeledGraph,
    g2: LabeledGraph,
    policy: DistancePolicy | None = None,
    budget: int = DEFAULT_BUDGET,
    node_cap: int | None = DEFAULT_NODE_CAP,
    cutoff: float = math.inf,
    backend: str | None = None,
) -> ExactResult:
    """Graph edit distance from ``g1`` to ``g2`` under ``policy``.

    Branch-and-bound over assignments of ``g1``'s nodes to ``g2``'s nodes or
    to deletion; unmatched ``g2`` nodes are inserted.  The search stops after
    ``budget`` node expansions and then reports the best admissible bounds
    with ``complete=False``.  A finite ``cutoff`` only looks for mappings
    cheaper than it; if none exists the result has no mapping and
    ``lower >= cutoff``.
    """
    if policy is None:
        policy = DistancePolicy.ged()
    if budget <= 0:
        raise ValueError("budget must be positive")
    if node_cap is not None and g1.node_count + g2.node_count > node_cap:
        raise ValueError(
            f"combined node count {g1.node_count + g2.node_count} exceeds node_cap={node_cap}"
        )
    args = _prepare(g1, g2, policy)
    if backend == "python" or (backend is None and _backend.BACKEND == "python"):
        fn = _backend.python_bnb_search
        args = _as_lists(args)
    elif backend in (None, "cython"):
        fn = _backend.compiled_bnb_search
        if fn is None:
            raise RuntimeError("compiled kernel is not available")
    else:
        raise ValueError(f"unknown backend {backend!r}")
    lower, upper, assign, expansions, complete, trace = fn(
        **args, budget=int(budget), init_ub=float(cutoff)
    )
    mapping = None
    if assign is not None:
        mapping = NodeMapping.from_assignment(assign, g2.node_count, cost=float(upper))
    if not math.isinf(upper):
        lower = min(lower, upper)
    return ExactResult(DistanceBounds(float(lower), float(upper)), mapping, int(expansions), bool(complete), list(trace))


def exact_sed(
    gq: LabeledGraph,
    gt: LabeledGraph,
    policy: DistancePolicy | None = None,
    budget: int = DEFAULT_BUDGET,
    node_cap: int | None = DEFAULT_NODE_CAP,
    cutoff: float = math.inf,
    backend: str | None = None,
) -> ExactResult:
    """Subgraph edit distance from query ``gq`` to target ``gt``.

    Computed as GED with insertion costs zeroed; the witness mapping's image
    gives a closest subgraph (see :func:`closest_subgraph`).
    """
    if policy is None:
        policy = DistancePolicy.sed()
    elif not policy.is_sed:
        policy = DistancePolicy(Mode.SED, policy.label_distance, policy.edge_cost)
    return exact_ged(gq, gt, policy, budget=budget, node_cap=node_cap, cutoff=cutoff, backend=backend)


def closest_subgraph(gq: LabeledGraph, gt: LabeledGraph, mapping: NodeMapping, graph_id: str | None = None) -> LabeledGraph:
    """Subgraph of ``gt`` matched by an SED witness.

    Keeps the target nodes that receive a query node and the target edges
    whose preimage is a query edge, so the result is also a subgraph of the
    query's shape.
    """
    fwd = mapping.forward()
    nodes = mapping.image()
    index = {w: i for i, w in enumerate(nodes)}
    edges = []
    for u, v in gq.edges:
        pu, pv = fwd[u], fwd[v]
        if pu is not None and pv is not None and gt.has_edge(pu, pv):
            edges.append((index[pu], index[pv]))
    sub = LabeledGraph([gt.labels[w] for w in nodes], edges, graph_id=graph_id)
    sub.meta["original_nodes"] = nodes
    return sub


def verify_sed_triangle(
    g1: LabeledGraph,
    g2: LabeledGraph,
    g3: LabeledGraph,
    policy: DistancePolicy | None = None,
    budget: int = DEFAULT_BUDGET,
    node_cap: int | None = DEFAULT_NODE_CAP,
) -> bool | None:
    """Whether SED(g1, g3) <= SED(g1, g2) + SED(g2, g3); ``None`` if any search ran out of budget."""
    r13 = exact_sed(g1, g3, policy, budget, node_cap)
    r12 = exact_sed(g1, g2, policy, budget, node_cap)
    r23 = exact_sed(g2, g3, policy, budget, node_cap)
    if not (r13.complete and r12.complete and r23.complete):
        return None
    return r13.value <= r12.value + r23.value + COST_TOL


def check_witness(g1: LabeledGraph, g2: LabeledGraph, result: ExactResult, policy: DistancePolicy) -> bool:
    """Recompute the witness mapping's cost independently of the search."""
    if result.mapping is None:
        return False
    return abs(ged_under_mapping(g1, g2, result.mapping, policy) - result.upper) <= COST_TOL
