"""Edit cost policies, node mappings and the cost of a mapping."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from ..graph import EPSILON, LabeledGraph

COST_TOL = 1e-9

LabelDistance = Callable[[str | None, str | None], float]


class Mode(str, enum.Enum):
    GED = "ged"
    SED = "sed"


class MappingError(ValueError):
    """A node mapping is not a bijection between dummy-padded node sets."""


def binary_label_distance(a: str | None, b: str | None) -> float:
    return 0.0 if a == b else 1.0


class DistancePolicy:
    """Edit costs for GED, or for SED via zeroed insertion costs.

    ``label_distance(a, b)`` compares node labels, with ``None`` standing for
    the empty label (``a is None`` is an insertion, ``b is None`` a deletion).
    Edges are unlabeled; deleting or inserting one costs ``edge_cost``.

    In SED mode every operation whose source label is empty costs nothing,
    which makes GED under this policy equal to subgraph edit distance.
    Custom SED distances must never charge more for a replacement than for
    deleting the source label; pass ``labels`` to have that checked.
    """

    def __init__(
        self,
        mode: Mode | str = Mode.GED,
        label_distance: LabelDistance | None = None,
        edge_cost: float = 1.0,
        labels: Iterable[str] | None = None,
    ):
        self.mode = Mode(mode)
        self.label_distance = label_distance
        self.edge_cost = float(edge_cost)
        if self.edge_cost < 0:
            raise ValueError("edge_cost must be non-negative")
        if label_distance is not None and labels is not None:
            self.validate(labels)

    @classmethod
    def ged(cls) -> "DistancePolicy":
        return cls(Mode.GED)

    @classmethod
    def sed(cls) -> "DistancePolicy":
        return cls(Mode.SED)

    @property
    def is_binary(self) -> bool:
        return self.label_distance is None and self.edge_cost == 1.0

    @property
    def is_sed(self) -> bool:
        return self.mode is Mode.SED

    def base(self, a: str | None, b: str | None) -> float:
        if self.label_distance is None:
            return binary_label_distance(a, b)
        return float(self.label_distance(a, b))

    def node_cost(self, a: str | None, b: str | None) -> float:
        if a is EPSILON and b is EPSILON:
            raise MappingError("dummy mapped to dummy")
        if self.is_sed and a is EPSILON:
            return 0.0
        return self.base(a, b)

    @property
    def edge_delete_cost(self) -> float:
        return self.edge_cost

    @property
    def edge_insert_cost(self) -> float:
        return 0.0 if self.is_sed else self.edge_cost

    def validate(self, labels: Iterable[str]) -> None:
        labels = list(labels)
        for a in labels:
            if self.base(a, EPSILON) < 0 or self.base(EPSILON, a) < 0:
                raise ValueError("label distance must be non-negative")
            for b in labels:
                d = self.base(a, b)
                if d < 0:
                    raise ValueError("label distance must be non-negative")
                if self.is_sed and d > self.base(a, EPSILON) + COST_TOL:
                    raise ValueError(
                        f"replacing {a!r} by {b!r} costs more than deleting {a!r}; "
                        "SED needs d(a, b) <= d(a, eps)"
                    )

    def __repr__(self) -> str:
        kind = "binary" if self.label_distance is None else "custom"
        return f"DistancePolicy(mode={self.mode.value}, {kind}, edge_cost={self.edge_cost})"


@dataclass(frozen=True)
class DistanceBounds:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper + COST_TOL:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")

    @property
    def exact(self) -> bool:
        return abs(self.upper - self.lower) <= COST_TOL

    @property
    def midpoint(self) -> float:
        return (self.lower + self.upper) / 2.0


@dataclass(frozen=True)
class NodeMapping:
    """Bijection between dummy-padded node sets as ``(left, right)`` pairs.

    ``None`` on either side is a dummy node: ``(v, None)`` deletes ``v`` and
    ``(None, w)`` inserts ``w``.
    """

    pairs: tuple[tuple[int | None, int | None], ...]
    cost: float | None = None

    @classmethod
    def from_assignment(cls, assignment: Sequence[int], n2: int, cost: float | None = None) -> "NodeMapping":
        """Build from ``assignment[v] = w`` (or ``-1`` for deletion)."""
        pairs: list[tuple[int | None, int | None]] = []
        used = set()
        for v, w in enumerate(assignment):
            if w < 0:
                pairs.append((v, None))
            else:
                pairs.append((v, int(w)))
                used.add(int(w))
        pairs.extend((None, w) for w in range(n2) if w not in used)
        return cls(tuple(pairs), cost)

    def forward(self) -> dict[int, int | None]:
        return {a: b for a, b in self.pairs if a is not None}

    def image(self) -> list[int]:
        """Right-side nodes matched to a real left node."""
        return sorted(b for a, b in self.pairs if a is not None and b is not None)

    def check(self, n1: int, n2: int) -> None:
        lefts = [a for a, _ in self.pairs if a is not None]
        rights = [b for _, b in self.pairs if b is not None]
        if any(a is None and b is None for a, b in self.pairs):
            raise MappingError("dummy mapped to dummy")
        if sorted(lefts) != list(range(n1)):
            raise MappingError("left side does not cover each node exactly once")
        if sorted(rights) != list(range(n2)):
            raise MappingError("right side does not cover each node exactly once")


def ged_under_mapping(g1: LabeledGraph, g2: LabeledGraph, pi: NodeMapping, policy: DistancePolicy) -> float:
    """Total edit cost implied by mapping ``g1`` onto ``g2`` through ``pi``."""
    pi.check(g1.node_count, g2.node_count)
    total = 0.0
    for a, b in pi.pairs:
        la = EPSILON if a is None else g1.labels[a]
        lb = EPSILON if b is None else g2.labels[b]
        total += policy.node_cost(la, lb)
    fwd = pi.forward()
    back = {b: a for a, b in pi.pairs if a is not None and b is not None}
    for u, v in g1.edges:
        pu, pv = fwd[u], fwd[v]
        if pu is None or pv is None or not g2.has_edge(pu, pv):
            total += policy.edge_delete_cost
    for u, v in g2.edges:
        qu, qv = back.get(u), back.get(v)
        if qu is None or qv is None or not g1.has_edge(qu, qv):
            total += policy.edge_insert_cost
    return total


def label_multiset_lower_bound(g1: LabeledGraph, g2: LabeledGraph, policy: DistancePolicy) -> float:
    """Cheap admissible lower bound on GED (or SED) from label counts and edge counts.

    The node part and the edge part bound disjoint groups of edit operations,
    so they are added.
    """
    n1, n2 = g1.node_count, g2.node_count
    m1, m2 = g1.edge_count, g2.edge_count
    if policy.label_distance is None:
        c1, c2 = Counter(g1.labels), Counter(g2.labels)
        common = sum(min(c, c2[l]) for l, c in c1.items())
        nodes = float(n1 - common)
        if not policy.is_sed:
            nodes += max(0, n2 - n1)
    else:
        nodes = 0.0
        for a in g1.labels:
            best = policy.node_cost(a, EPSILON)
            for b in set(g2.labels):
                best = min(best, policy.node_cost(a, b))
            nodes += best
        if not policy.is_sed and n2 > n1:
            nodes += (n2 - n1) * min(policy.node_cost(EPSILON, b) for b in g2.labels)
    edges = policy.edge_delete_cost * max(0, m1 - m2) + policy.edge_insert_cost * max(0, m2 - m1)
    return nodes + edges
