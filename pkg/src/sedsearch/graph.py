"""Labeled undirected graphs, the JSON-lines graph format, and sampling helpers."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

EPSILON = None  # reserved empty label; never carried by a real node
EPSILON_ID = -1


class GraphFormatError(ValueError):
    """Raised when a graph record is malformed or violates graph invariants."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LabelAlphabet:
    """Bijection between label strings and dense integer ids.

    The empty label has the fixed id ``EPSILON_ID`` and is never interned.
    """

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list[str] = []
        self._ids: dict[str, int] = {}
        for label in labels:
            self.intern(label)

    def intern(self, label: str) -> int:
        if not isinstance(label, str) or label == "":
            raise GraphFormatError(f"invalid label {label!r}")
        idx = self._ids.get(label)
        if idx is None:
            idx = len(self._labels)
            self._labels.append(label)
            self._ids[label] = idx
        return idx

    def id_of(self, label: str) -> int:
        try:
            return self._ids[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in alphabet") from None

    def label_of(self, idx: int) -> str | None:
        if idx == EPSILON_ID:
            return EPSILON
        return self._labels[idx]

    def __contains__(self, label: object) -> bool:
        return label in self._ids

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self._labels)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._labels)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LabelAlphabet) and self._labels == other._labels

    def __repr__(self) -> str:
        return f"LabelAlphabet({self._labels!r})"


@dataclass(frozen=True, eq=False)
class LabeledGraph:
    """Immutable simple undirected graph with one categorical label per node.

    Edges are stored as sorted ``(u, v)`` pairs with ``u < v``; ``adjacency``
    holds each node's sorted neighbor tuple.
    """

    labels: tuple[str, ...]
    edges: frozenset[tuple[int, int]]
    graph_id: str | None = None
    meta: dict = field(default_factory=dict, repr=False)
    adjacency: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __init__(
        self,
        labels: Sequence[str],
        edges: Iterable[tuple[int, int]] = (),
        graph_id: str | None = None,
        meta: dict | None = None,
    ):
        labels = tuple(labels)
        n = len(labels)
        for label in labels:
            if not isinstance(label, str) or label == "":
                raise GraphFormatError(f"invalid node label {label!r}")
        canon = set()
        for e in edges:
            u, v = (int(x) for x in e)
            if u == v:
                raise GraphFormatError(f"self-loop on node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"edge ({u}, {v}) out of range for {n} nodes")
            key = (u, v) if u < v else (v, u)
            if key in canon:
                raise GraphFormatError(f"duplicate edge ({u}, {v})")
            canon.add(key)
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for u, v in canon:
            nbrs[u].append(v)
            nbrs[v].append(u)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "edges", frozenset(canon))
        object.__setattr__(self, "graph_id", graph_id)
        object.__setattr__(self, "meta", dict(meta or {}))
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(a)) for a in nbrs))

    @property
    def node_count(self) -> int:
        return len(self.labels)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def has_edge(self, u: int, v: int) -> bool:
        return ((u, v) if u < v else (v, u)) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def is_connected(self) -> bool:
        n = self.node_count
        if n <= 1:
            return True
        return len(bfs_distances(self, 0)) == n

    def adjacency_matrix(self) -> np.ndarray:
        n = self.node_count
        mat = np.zeros((n, n), dtype=np.uint8)
        for u, v in self.edges:
            mat[u, v] = mat[v, u] = 1
        return mat

    def induced_subgraph(self, nodes: Sequence[int], graph_id: str | None = None) -> "LabeledGraph":
        """Induced subgraph on ``nodes``; new index i corresponds to ``nodes[i]``."""
        index = {v: i for i, v in enumerate(nodes)}
        if len(index) != len(nodes):
            raise ValueError("repeated node in induced_subgraph")
        edges = []
        for v in nodes:
            for u in self.adjacency[v]:
                if u in index and index[v] < index[u]:
                    edges.append((index[v], index[u]))
        return LabeledGraph(
            [self.labels[v] for v in nodes],
            edges,
            graph_id=graph_id,
            meta={"original_nodes": list(nodes)},
        )

    def relabeled(self, perm: Sequence[int], graph_id: str | None = None) -> "LabeledGraph":
        """Isomorphic copy where old node ``v`` becomes ``perm[v]``."""
        n = self.node_count
        labels = [""] * n
        for v in range(n):
            labels[perm[v]] = self.labels[v]
        edges = [(perm[u], perm[v]) for u, v in self.edges]
        return LabeledGraph(labels, edges, graph_id=graph_id)

    def structurally_equal(self, other: "LabeledGraph") -> bool:
        return self.labels == other.labels and self.edges == other.edges

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabeledGraph):
            return NotImplemented
        return self.structurally_equal(other)

    def __hash__(self) -> int:
        return hash((self.labels, self.edges))

    def __repr__(self) -> str:
        return (
            f"LabeledGraph(id={self.graph_id!r}, n={self.node_count}, "
            f"m={self.edge_count}, labels={''.join(self.labels) if all(len(x) == 1 for x in self.labels) else self.labels})"
        )


# ---------------------------------------------------------------------------
# JSON-lines I/O


def parse_graph(
    record: str | dict,
    alphabet: LabelAlphabet | None = None,
    line: int | None = None,
    allow_disconnected: bool = False,
) -> LabeledGraph:
    """Parse one graph record ``{"id": ..., "nodes": [...], "edges": [[u, v], ...]}``.

    Labels are interned into ``alphabet`` when one is given.  Disconnected
    graphs are rejected unless ``allow_disconnected`` is set.
    """
    if isinstance(record, str):
        try:
            obj = json.loads(record)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"malformed JSON: {exc.msg}", line) from None
    else:
        obj = record
    if not isinstance(obj, dict):
        raise GraphFormatError("record is not a JSON object", line)
    nodes = obj.get("nodes")
    edges = obj.get("edges", [])
    if not isinstance(nodes, list):
        raise GraphFormatError("missing or invalid 'nodes' list", line)
    if not isinstance(edges, list) or any(
        not isinstance(e, list) or len(e) != 2 or not all(isinstance(x, int) and not isinstance(x, bool) for x in e)
        for e in edges
    ):
        raise GraphFormatError("'edges' must be a list of [u, v] integer pairs", line)
    gid = obj.get("id")
    if gid is not None and not isinstance(gid, str):
        gid = str(gid)
    try:
        g = LabeledGraph(nodes, [tuple(e) for e in edges], graph_id=gid)
    except GraphFormatError as exc:
        raise GraphFormatError(str(exc), line) from None
    if not allow_disconnected and not g.is_connected():
        raise GraphFormatError("graph is disconnected", line)
    if alphabet is not None:
        for label in g.labels:
            alphabet.intern(label)
    return g


def graph_to_record(g: LabeledGraph) -> dict:
    rec: dict = {}
    if g.graph_id is not None:
        rec["id"] = g.graph_id
    rec["nodes"] = list(g.labels)
    rec["edges"] = [list(e) for e in g.sorted_edges()]
    return rec


def serialize_graph(g: LabeledGraph) -> str:
    return json.dumps(graph_to_record(g), separators=(",", ":"))


def read_graphs(
    path,
    alphabet: LabelAlphabet | None = None,
    allow_disconnected: bool = False,
) -> list[LabeledGraph]:
    graphs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            g = parse_graph(raw, alphabet, line=lineno, allow_disconnected=allow_disconnected)
            if g.graph_id is None:
                g = LabeledGraph(g.labels, g.edges, graph_id=str(len(graphs)))
            graphs.append(g)
    return graphs


def write_graphs(path, graphs: Iterable[LabeledGraph]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in graphs:
            fh.write(serialize_graph(g))
            fh.write("\n")


# ---------------------------------------------------------------------------
# traversal


def bfs_distances(g: LabeledGraph, source: int, limit: int | None = None) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        d = dist[v]
        if limit is not None and d >= limit:
            continue
        for u in g.adjacency[v]:
            if u not in dist:
                dist[u] = d + 1
                queue.append(u)
    return dist


def khop_neighborhood(g: LabeledGraph, center: int, k: int, graph_id: str | None = None) -> LabeledGraph:
    """Induced subgraph on nodes within ``k`` hops of ``center``.

    Nodes are ordered by (distance, original index); ``meta["original_nodes"]``
    maps back to ``g`` and ``meta["center"]`` records the center.
    """
    if not 0 <= center < g.node_count:
        raise ValueError(f"center {center} out of range")
    if k < 0:
        raise ValueError("k must be non-negative")
    dist = bfs_distances(g, center, limit=k)
    nodes = sorted(dist, key=lambda v: (dist[v], v))
    sub = g.induced_subgraph(nodes, graph_id=graph_id)
    sub.meta["center"] = center
    return sub


def random_bfs_sample(
    g: LabeledGraph,
    max_depth: int,
    max_nodes: int,
    rng: np.random.Generator,
    root: int | None = None,
    graph_id: str | None = None,
) -> LabeledGraph:
    """Connected induced subgraph grown breadth-first from a random root.

    Each BFS layer is visited in shuffled order and the sample stops once
    ``max_nodes`` nodes are collected or ``max_depth`` layers are exhausted.
    """
    if g.node_count == 0:
        raise ValueError("cannot sample from an empty graph")
    if max_depth < 0 or max_nodes < 1:
        raise ValueError("max_depth must be >= 0 and max_nodes >= 1")
    if root is None:
        root = int(rng.integers(g.node_count))
    chosen = [root]
    seen = {root}
    frontier = [root]
    depth = 0
    while frontier and depth < max_depth and len(chosen) < max_nodes:
        layer = sorted({u for v in frontier for u in g.adjacency[v] if u not in seen})
        layer = [layer[i] for i in rng.permutation(len(layer))]
        layer = layer[: max_nodes - len(chosen)]
        chosen.extend(layer)
        seen.update(layer)
        frontier = layer
        depth += 1
    sub = g.induced_subgraph(chosen, graph_id=graph_id)
    sub.meta["root"] = root
    return sub


def longest_path_upper_bound(g: LabeledGraph, refine_trees: bool = False) -> int:
    """Upper bound on the edge count of the longest simple path.

    ``node_count - 1`` is always valid; on trees the exact diameter is
    returned when ``refine_trees`` is set.
    """
    if not g.is_connected():
        raise ValueError("longest_path_upper_bound requires a connected graph")
    n = g.node_count
    if n == 0:
        return 0
    if refine_trees and g.edge_count == n - 1:
        far = bfs_distances(g, 0)
        a = max(far, key=lambda v: (far[v], -v))
        da = bfs_distances(g, a)
        return max(da.values())
    return n - 1


# ---------------------------------------------------------------------------
# generators


def default_label_names(count: int) -> list[str]:
    if count <= 26:
        return [chr(ord("a") + i) for i in range(count)]
    return [f"L{i}" for i in range(count)]


def random_tree(n: int, n_labels: int, rng: np.random.Generator, graph_id: str | None = None) -> LabeledGraph:
    names = default_label_names(n_labels)
    labels = [names[int(i)] for i in rng.integers(n_labels, size=n)]
    edges = [(int(rng.integers(v)), v) for v in range(1, n)]
    return LabeledGraph(labels, edges, graph_id=graph_id)


def random_connected_graph(
    n: int,
    edge_prob: float,
    n_labels: int,
    rng: np.random.Generator,
    graph_id: str | None = None,
) -> LabeledGraph:
    """Random spanning tree plus independent extra edges with probability ``edge_prob``."""
    tree = random_tree(n, n_labels, rng)
    edges = set(tree.edges)
    if n > 1 and edge_prob > 0:
        iu, ju = np.triu_indices(n, k=1)
        mask = rng.random(iu.shape[0]) < edge_prob
        edges.update(zip(iu[mask].tolist(), ju[mask].tolist()))
    return LabeledGraph(tree.labels, edges, graph_id=graph_id)


def random_graph(
    n: int,
    edge_prob: float,
    n_labels: int,
    rng: np.random.Generator,
    graph_id: str | None = None,
) -> LabeledGraph:
    """Plain Erdős–Rényi graph, possibly disconnected."""
    names = default_label_names(n_labels)
    labels = [names[int(i)] for i in rng.integers(n_labels, size=n)]
    edges = []
    if n > 1:
        iu, ju = np.triu_indices(n, k=1)
        mask = rng.random(iu.shape[0]) < edge_prob
        edges = list(zip(iu[mask].tolist(), ju[mask].tolist()))
    return LabeledGraph(labels, edges, graph_id=graph_id)
