"""Corpus generation: targets, queries, exact labels, augmentation and splits."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .exact import DistancePolicy, ExactResult, Mode, closest_subgraph, exact_ged, exact_sed
from .graph import (
    LabeledGraph,
    khop_neighborhood,
    random_bfs_sample,
    random_connected_graph,
    random_tree,
    read_graphs,
    write_graphs,
)


class SpecError(ValueError):
    """Invalid corpus spec; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


@dataclass
class SourceSpec:
    kind: str = "synthetic"  # synthetic | large_graph | database
    path: str | None = None
    generator: str = "erdos_renyi"  # erdos_renyi | tree
    nodes: int = 300
    edge_prob: float = 0.004
    labels: int = 3

    def validate(self, prefix: str = "source") -> None:
        if self.kind not in ("synthetic", "large_graph", "database"):
            raise SpecError(f"{prefix}.kind", f"unknown source kind {self.kind!r}")
        if self.kind == "synthetic":
            for name in ("nodes", "labels"):
                if not _is_int(getattr(self, name)):
                    raise SpecError(f"{prefix}.{name}", "must be an integer")
            if not _is_number(self.edge_prob):
                raise SpecError(f"{prefix}.edge_prob", "must be a number")
            if self.generator not in ("erdos_renyi", "tree"):
                raise SpecError(f"{prefix}.generator", f"unknown generator {self.generator!r}")
            if self.nodes < 1:
                raise SpecError(f"{prefix}.nodes", "must be >= 1")
            if not 0 <= self.edge_prob <= 1:
                raise SpecError(f"{prefix}.edge_prob", "must be in [0, 1]")
            if self.labels < 1:
                raise SpecError(f"{prefix}.labels", "must be >= 1")
        elif not self.path:
            raise SpecError(f"{prefix}.path", f"required for source kind {self.kind!r}")


@dataclass
class CorpusSpec:
    source: SourceSpec = field(default_factory=SourceSpec)
    target_hops: int = 2
    target_max_nodes: int = 12
    query_depth: int = 3
    query_min_nodes: int = 2
    query_max_nodes: int = 8
    noise_edits: int = 2
    positive_fraction: float = 0.5
    train_pairs: int = 1600
    val_pairs: int = 200
    test_pairs: int = 200
    mode: str = "sed"
    budget: int = 200_000
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Mapping) -> "CorpusSpec":
        if not isinstance(data, Mapping):
            raise SpecError("$", "corpus spec must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise SpecError(key, "unknown field")
        kwargs = dict(data)
        src = kwargs.pop("source", {})
        if not isinstance(src, Mapping):
            raise SpecError("source", "must be an object")
        src_known = {f.name for f in fields(SourceSpec)}
        for key in src:
            if key not in src_known:
                raise SpecError(f"source.{key}", "unknown field")
        spec = cls(source=SourceSpec(**src), **kwargs)
        spec.validate()
        return spec

    @classmethod
    def load(cls, path) -> "CorpusSpec":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SpecError("$", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        self.source.validate()
        ints = {
            "target_hops": 0, "target_max_nodes": 1, "query_depth": 0, "query_min_nodes": 1,
            "query_max_nodes": 1, "noise_edits": 0, "train_pairs": 1, "val_pairs": 1,
            "test_pairs": 1, "budget": 1,
        }
        for name, low in ints.items():
            value = getattr(self, name)
            if not _is_int(value):
                raise SpecError(name, "must be an integer")
            if value < low:
                raise SpecError(name, f"must be >= {low}")
        if self.query_min_nodes > self.query_max_nodes:
            raise SpecError("query_min_nodes", "exceeds query_max_nodes")
        if not _is_number(self.positive_fraction) or not 0 <= self.positive_fraction <= 1:
            raise SpecError("positive_fraction", "must be in [0, 1]")
        if self.mode not in ("sed", "ged"):
            raise SpecError("mode", "must be 'sed' or 'ged'")


# ---------------------------------------------------------------------------
# targets


def _tid(i: int) -> str:
    return f"t{i:06d}"


def _qid(i: int) -> str:
    return f"q{i:06d}"


def decompose_targets(
    g: LabeledGraph,
    hops: int,
    max_nodes: int | None = None,
    rng: np.random.Generator | None = None,
    start: int = 0,
) -> dict[str, LabeledGraph]:
    """One ``hops``-hop neighbourhood per node of ``g``, keyed by target id.

    With ``max_nodes`` set, oversized neighbourhoods are replaced by a random
    BFS sample of that size rooted at the same center.
    """
    store = {}
    for c in range(g.node_count):
        tid = _tid(start + c)
        t = khop_neighborhood(g, c, hops, graph_id=tid)
        if max_nodes is not None and t.node_count > max_nodes:
            if rng is None:
                raise ValueError("an rng is required when max_nodes truncates neighbourhoods")
            sample = random_bfs_sample(g, hops, max_nodes, rng, root=c, graph_id=tid)
            sample.meta["center"] = c
            t = sample
        store[tid] = t
    return store


def _source_graphs(spec: CorpusSpec, rng: np.random.Generator) -> list[LabeledGraph]:
    src = spec.source
    if src.kind == "synthetic":
        if src.generator == "tree":
            return [random_tree(src.nodes, src.labels, rng, graph_id="source")]
        return [random_connected_graph(src.nodes, src.edge_prob, src.labels, rng, graph_id="source")]
    graphs = read_graphs(src.path, allow_disconnected=True)
    if not graphs:
        raise SpecError("source.path", "file contains no graphs")
    if src.kind == "large_graph":
        return graphs[:1]
    return graphs


def build_targets(spec: CorpusSpec, rng: np.random.Generator) -> dict[str, LabeledGraph]:
    """Target store for ``spec``: small database graphs as-is, everything else decomposed."""
    store: dict[str, LabeledGraph] = {}
    for g in _source_graphs(spec, rng):
        if spec.source.kind == "database" and g.node_count <= spec.target_max_nodes:
            tid = _tid(len(store))
            store[tid] = LabeledGraph(g.labels, g.edges, graph_id=tid, meta={"source": g.graph_id})
        else:
            store.update(decompose_targets(g, spec.target_hops, spec.target_max_nodes, rng, start=len(store)))
    return store


# ---------------------------------------------------------------------------
# queries


def noisy_query(
    target: LabeledGraph,
    depth: int,
    size: int,
    noise: int,
    labels: Sequence[str],
    rng: np.random.Generator,
    graph_id: str | None = None,
) -> LabeledGraph:
    """Random BFS sample of ``target`` followed by up to ``noise`` random edits.

    Edits relabel a node or add a missing edge, so the query stays connected.
    """
    q = random_bfs_sample(target, depth, size, rng)
    lab = list(q.labels)
    edges = set(q.edges)
    n = len(lab)
    for _ in range(int(rng.integers(noise + 1)) if noise else 0):
        if n >= 2 and rng.random() < 0.5:
            u, v = sorted(int(x) for x in rng.choice(n, size=2, replace=False))
            edges.add((u, v))
        elif len(labels) > 1:
            v = int(rng.integers(n))
            others = [l for l in labels if l != lab[v]]
            lab[v] = others[int(rng.integers(len(others)))]
    return LabeledGraph(lab, edges, graph_id=graph_id, meta={"source_target": target.graph_id})


# ---------------------------------------------------------------------------
# labeling


@dataclass
class PairRecord:
    q: str
    t: str
    lb: float
    ub: float
    complete: bool
    expansions: int | None = None

    def to_json(self) -> str:
        d = {"q": self.q, "t": self.t, "lb": self.lb, "ub": self.ub, "complete": self.complete}
        if self.expansions is not None:
            d["expansions"] = self.expansions
        return json.dumps(d)

    @classmethod
    def from_dict(cls, d: Mapping) -> "PairRecord":
        return cls(str(d["q"]), str(d["t"]), float(d.get("lb", 0.0)), float(d.get("ub", 0.0)), bool(d.get("complete", True)), d.get("expansions"))


def _oracle(mode: Mode) -> Callable[..., ExactResult]:
    return exact_sed if mode == Mode.SED else exact_ged


def _label_one(args) -> tuple[float, float, bool, int]:
    q, t, mode, budget = args
    r = _oracle(mode)(q, t, budget=budget, node_cap=None)
    return r.lower, r.upper, r.complete, r.expansions


def label_pairs(
    pairs: Sequence[tuple[str, str]],
    graphs: Mapping[str, LabeledGraph],
    mode: Mode | str = Mode.SED,
    budget: int = 200_000,
    workers: int = 1,
) -> list[PairRecord]:
    """Exact bounds for every ``(query_id, target_id)`` pair, in input order.

    Budget-truncated pairs keep their admissible bounds and ``complete=False``.
    """
    mode = Mode(mode)
    jobs = [(graphs[q], graphs[t], mode, budget) for q, t in pairs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_label_one, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        results = [_label_one(j) for j in jobs]
    return [PairRecord(q, t, lb, ub, c, e) for (q, t), (lb, ub, c, e) in zip(pairs, results)]


# ---------------------------------------------------------------------------
# augmentation


def augment(
    query: LabeledGraph,
    result: ExactResult,
    target: LabeledGraph,
    count: int,
    rng: np.random.Generator,
    id_prefix: str = "aug",
) -> list[LabeledGraph]:
    """Random subgraphs of ``target`` that contain the witness's closest subgraph.

    Each one has the same SED to ``query`` as ``target`` itself.  Extra nodes
    are grown from the frontier of the current node set where possible, and
    each extra edge among chosen nodes is kept with a per-sample probability.
    """
    if not result.complete or result.mapping is None:
        raise ValueError("augmentation needs a complete search with a witness mapping")
    core = closest_subgraph(query, target, result.mapping)
    core_nodes = list(core.meta["original_nodes"])
    core_edges = {(min(core_nodes[a], core_nodes[b]), max(core_nodes[a], core_nodes[b])) for a, b in core.edges}
    out = []
    for i in range(count):
        chosen = list(core_nodes)
        in_set = set(chosen)
        extra = int(rng.integers(target.node_count - len(chosen) + 1))
        for _ in range(extra):
            frontier = sorted({u for v in chosen for u in target.adjacency[v]} - in_set)
            pool = frontier or sorted(set(range(target.node_count)) - in_set)
            v = pool[int(rng.integers(len(pool)))]
            chosen.append(v)
            in_set.add(v)
        keep = rng.random()
        edges = []
        for u, v in target.sorted_edges():
            if u in in_set and v in in_set and ((u, v) in core_edges or rng.random() < keep):
                edges.append((u, v))
        index = {v: k for k, v in enumerate(chosen)}
        g = LabeledGraph(
            [target.labels[v] for v in chosen],
            [(index[u], index[v]) for u, v in edges],
            graph_id=f"{id_prefix}{i}",
        )
        g.meta["original_nodes"] = chosen
        out.append(g)
    return out


# ---------------------------------------------------------------------------
# decomposition search


@dataclass
class BestTarget:
    target_id: str | None
    value: float
    complete: bool


def min_sed_over_targets(
    query: LabeledGraph,
    targets: Mapping[str, LabeledGraph],
    distance: Callable[[LabeledGraph, LabeledGraph], float] | None = None,
    budget: int = 1_000_000,
) -> BestTarget:
    """Target minimising the distance from ``query``; ties go to the smallest id.

    Without ``distance`` the exact SED oracle is used, each search seeded
    with the best value so far so it only looks for strict improvements.
    """
    if not targets:
        raise ValueError("target store is empty")
    best_id, best, complete = None, math.inf, True
    for tid in sorted(targets):
        t = targets[tid]
        if distance is not None:
            v = float(distance(query, t))
        else:
            r = exact_sed(query, t, budget=budget, node_cap=None, cutoff=best)
            complete &= r.complete
            if r.mapping is None:
                continue
            v = r.upper
        if v < best:
            best_id, best = tid, v
            if best == 0 and distance is None:
                break
    return BestTarget(best_id, best, complete)


# ---------------------------------------------------------------------------
# corpus


@dataclass
class Corpus:
    spec: CorpusSpec
    targets: dict[str, LabeledGraph]
    queries: dict[str, LabeledGraph]
    splits: dict[str, list[PairRecord]]

    @property
    def graphs(self) -> dict[str, LabeledGraph]:
        return {**self.targets, **self.queries}

    def labels(self) -> list[str]:
        seen = set()
        for g in self.graphs.values():
            seen.update(g.labels)
        return sorted(seen)


SPLITS = ("train", "val", "test")


def generate_corpus(spec: CorpusSpec, workers: int = 1) -> Corpus:
    """Build targets and queries, pair them, label every pair and split."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    targets = build_targets(spec, rng)
    tids = sorted(targets)
    label_set = sorted({l for t in targets.values() for l in t.labels})
    total = spec.train_pairs + spec.val_pairs + spec.test_pairs
    queries: dict[str, LabeledGraph] = {}
    pairs: list[tuple[str, str]] = []
    for i in range(total):
        src = tids[int(rng.integers(len(tids)))]
        t = targets[src]
        hi = min(spec.query_max_nodes, t.node_count)
        lo = min(spec.query_min_nodes, hi)
        size = int(rng.integers(lo, hi + 1))
        qid = _qid(i)
        queries[qid] = noisy_query(t, spec.query_depth, size, spec.noise_edits, label_set, rng, graph_id=qid)
        partner = src if rng.random() < spec.positive_fraction else tids[int(rng.integers(len(tids)))]
        pairs.append((qid, partner))
    graphs = {**targets, **queries}
    records = label_pairs(pairs, graphs, Mode(spec.mode), spec.budget, workers)
    cut1 = spec.train_pairs
    cut2 = cut1 + spec.val_pairs
    splits = {"train": records[:cut1], "val": records[cut1:cut2], "test": records[cut2:]}
    return Corpus(spec, targets, queries, splits)


def write_pairs(path, records: Iterable[PairRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def read_pairs(path) -> list[PairRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(PairRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad pair record ({exc})") from None
    return out


def write_corpus(corpus: Corpus, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "targets": out / "targets.jsonl",
        "queries": out / "queries.jsonl",
        "spec": out / "spec.json",
    }
    write_graphs(paths["targets"], [corpus.targets[k] for k in sorted(corpus.targets)])
    write_graphs(paths["queries"], [corpus.queries[k] for k in sorted(corpus.queries)])
    paths["spec"].write_text(json.dumps(corpus.spec.to_dict(), indent=2, sort_keys=True) + "\n")
    for name in SPLITS:
        paths[name] = out / f"{name}.jsonl"
        write_pairs(paths[name], corpus.splits[name])
    return paths


def load_corpus(out_dir) -> Corpus:
    out = Path(out_dir)
    spec = CorpusSpec.load(out / "spec.json")
    targets = {g.graph_id: g for g in read_graphs(out / "targets.jsonl", allow_disconnected=True)}
    queries = {g.graph_id: g for g in read_graphs(out / "queries.jsonl", allow_disconnected=True)}
    splits = {name: read_pairs(out / f"{name}.jsonl") for name in SPLITS}
    return Corpus(spec, targets, queries, splits)
