"""Four-way metric tree for possibly asymmetric distances.

Every internal node keeps a pivot ``p`` and two medians: ``m1`` over
``d(p, y)`` and ``m2`` over ``d(y, p)``.  The remaining items are split into
four children by whether each distance is at most its median.  Range and
k-NN queries prune children using only the triangle inequality, so their
answers match an exhaustive scan.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .distances import Distance

# Children order: (d(p,y) <= m1, d(y,p) <= m2) = TT, TF, FT, FF.
T1, T2, T3, T4 = range(4)


@dataclass
class TreeNode:
    pivot: int = -1
    m1: float = 0.0
    m2: float = 0.0
    children: list = field(default_factory=lambda: [None, None, None, None])
    items: np.ndarray | None = None  # set on leaves only
    size: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.items is not None


@dataclass
class QueryStats:
    distance_evals: int = 0
    pruned_subtrees: int = 0
    bulk_accepted: int = 0
    nodes_visited: int = 0
    truncated: bool = False  # k-NN asked for more items than exist

    def merge(self, other: "QueryStats") -> None:
        self.distance_evals += other.distance_evals
        self.pruned_subtrees += other.pruned_subtrees
        self.bulk_accepted += other.bulk_accepted
        self.nodes_visited += other.nodes_visited


def _lower_median(values: np.ndarray) -> float:
    return float(np.sort(values, kind="stable")[(len(values) - 1) // 2])


def _slack(*values: float) -> float:
    # Guards pruning decisions against rounding in the distance arithmetic.
    return 1e-9 * max(1.0, *(abs(v) for v in values if np.isfinite(v)))


class MetricTree:
    def __init__(self, vectors: np.ndarray, dist: Distance, leaf_cap: int = 8, seed: int = 0, root: TreeNode | None = None):
        if leaf_cap < 1:
            raise ValueError("leaf_cap must be >= 1")
        self.vectors = np.asarray(vectors)
        if self.vectors.ndim != 2 or len(self.vectors) == 0:
            raise ValueError("need a non-empty 2-D array of item vectors")
        self.dist = dist
        self.leaf_cap = leaf_cap
        self.seed = seed
        self.root = root if root is not None else self._build()

    def __len__(self) -> int:
        return len(self.vectors)

    # -- build -------------------------------------------------------------

    def _build(self) -> TreeNode:
        rng = np.random.default_rng(self.seed)
        root = TreeNode()
        stack = [(root, np.arange(len(self.vectors)))]
        while stack:
            node, ids = stack.pop()
            node.size = len(ids)
            if len(ids) <= self.leaf_cap:
                node.items = ids
                continue
            k = int(rng.integers(len(ids)))
            p = int(ids[k])
            rest = np.delete(ids, k)
            out = self.dist.to_many(self.vectors[p], self.vectors[rest])  # d(p, y)
            back = self.dist.from_many(self.vectors[rest], self.vectors[p])  # d(y, p)
            if not out.any() and not back.any():
                node.items = ids
                continue
            node.pivot = p
            node.m1 = _lower_median(out)
            node.m2 = _lower_median(back)
            near_out = out <= node.m1
            near_back = back <= node.m2
            parts = (near_out & near_back, near_out & ~near_back, ~near_out & near_back, ~near_out & ~near_back)
            for c in range(3, -1, -1):
                sel = rest[parts[c]]
                if len(sel):
                    child = TreeNode()
                    node.children[c] = child
                    stack.append((child, sel))
        return root

    # -- traversal helpers -------------------------------------------------

    def nodes(self):
        """Pre-order iteration over all nodes."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.extend(c for c in reversed(node.children) if c is not None)

    def subtree_items(self, node: TreeNode) -> list[int]:
        out = []
        stack = [node]
        while stack:
            n = stack.pop()
            if n.is_leaf:
                out.extend(int(i) for i in n.items)
            else:
                out.append(n.pivot)
                stack.extend(c for c in n.children if c is not None)
        return out

    def depth(self) -> int:
        best = 0
        stack = [(self.root, 1)]
        while stack:
            n, d = stack.pop()
            best = max(best, d)
            if not n.is_leaf:
                stack.extend((c, d + 1) for c in n.children if c is not None)
        return best

    # -- queries -----------------------------------------------------------

    def range_query(self, q: np.ndarray, r: float, stats: QueryStats | None = None) -> list[int]:
        """Indices ``y`` with ``d(q, y) <= r``, in ascending order."""
        if r < 0:
            raise ValueError("radius must be non-negative")
        stats = stats if stats is not None else QueryStats()
        before = self.dist.evaluations
        q = np.asarray(q)
        found: list[int] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            stats.nodes_visited += 1
            if node.is_leaf:
                d = self.dist.to_many(q, self.vectors[node.items])
                found.extend(int(i) for i in node.items[d <= r])
                continue
            pv = self.vectors[node.pivot]
            d_qp = self.dist.pair(q, pv)
            d_pq = self.dist.pair(pv, q)
            if d_qp <= r:
                found.append(node.pivot)
            prune = set()
            if d_pq <= node.m1 - r - _slack(d_pq, node.m1, r):
                prune |= {T3, T4}
            if d_qp > node.m2 + r + _slack(d_qp, node.m2, r):
                prune |= {T1, T3}
            bulk = set()
            if d_qp <= r - node.m1 - _slack(d_qp, node.m1, r):
                bulk = {T1, T2}
            for c, child in enumerate(node.children):
                if child is None:
                    continue
                if c in bulk and c not in prune:
                    items = self.subtree_items(child)
                    stats.bulk_accepted += len(items)
                    found.extend(items)
                elif c in prune and c not in bulk:
                    stats.pruned_subtrees += 1
                else:
                    stack.append(child)
        stats.distance_evals += self.dist.evaluations - before
        return sorted(found)

    def knn_query(self, q: np.ndarray, k: int, stats: QueryStats | None = None) -> list[tuple[int, float]]:
        """The ``k`` nearest items as ``(index, distance)``, sorted by distance then index."""
        if k < 1:
            raise ValueError("k must be >= 1")
        stats = stats if stats is not None else QueryStats()
        stats.truncated = k > len(self.vectors)
        before = self.dist.evaluations
        q = np.asarray(q)
        heap: list[tuple[float, int]] = []  # max-heap on (distance, index) via negation

        def offer(i: int, d: float) -> None:
            key = (-d, -i)
            if len(heap) < k:
                heapq.heappush(heap, key)
            elif key > heap[0]:
                heapq.heapreplace(heap, key)

        def radius() -> float:
            return -heap[0][0] if len(heap) >= k else np.inf

        stack = [self.root]
        while stack:
            node = stack.pop()
            stats.nodes_visited += 1
            if node.is_leaf:
                d = self.dist.to_many(q, self.vectors[node.items])
                for i, di in zip(node.items, d):
                    offer(int(i), float(di))
                continue
            pv = self.vectors[node.pivot]
            d_qp = self.dist.pair(q, pv)
            d_pq = self.dist.pair(pv, q)
            offer(node.pivot, d_qp)
            r = radius()
            prune = set()
            if d_pq <= node.m1 - r - _slack(d_pq, node.m1, r):
                prune |= {T3, T4}
            if d_qp > node.m2 + r + _slack(d_qp, node.m2, r):
                prune |= {T1, T3}
            # Push far children first so the likely-near ones are searched first.
            for c in (T4, T3, T2, T1):
                child = node.children[c]
                if child is None:
                    continue
                if c in prune:
                    stats.pruned_subtrees += 1
                else:
                    stack.append(child)
        stats.distance_evals += self.dist.evaluations - before
        return sorted(((-ni, -nd) for nd, ni in heap), key=lambda t: (t[1], t[0]))

    # -- audit -------------------------------------------------------------

    def audit(self) -> list[str]:
        """Re-check every node's partition invariants by direct evaluation."""
        problems = []
        seen: list[int] = []
        for node in self.nodes():
            if node.is_leaf:
                seen.extend(int(i) for i in node.items)
                continue
            seen.append(node.pivot)
            pv = self.vectors[node.pivot]
            for c, child in enumerate(node.children):
                if child is None:
                    continue
                for y in self.subtree_items(child):
                    out = self.dist.pair(pv, self.vectors[y]) <= node.m1
                    back = self.dist.pair(self.vectors[y], pv) <= node.m2
                    expected = (T1, T2, T3, T4)[(0 if out else 2) + (0 if back else 1)]
                    if expected != c:
                        problems.append(f"item {y} under pivot {node.pivot} is in child {c + 1}, expected {expected + 1}")
        if sorted(seen) != list(range(len(self.vectors))):
            problems.append("tree does not hold every item exactly once")
        return problems


def linear_scan_range(vectors: np.ndarray, q: np.ndarray, r: float, dist: Distance) -> list[int]:
    d = dist.to_many(np.asarray(q), np.asarray(vectors))
    return [int(i) for i in np.flatnonzero(d <= r)]


def linear_scan_knn(vectors: np.ndarray, q: np.ndarray, k: int, dist: Distance) -> list[tuple[int, float]]:
    if k < 1:
        raise ValueError("k must be >= 1")
    d = dist.to_many(np.asarray(q), np.asarray(vectors))
    order = np.lexsort((np.arange(len(d)), d))[:k]
    return [(int(i), float(d[i])) for i in order]
