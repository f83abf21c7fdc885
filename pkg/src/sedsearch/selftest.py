"""Fast property checks over the whole stack, runnable from the command line."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .encoder import EncoderConfig, GraphBatch, Model, forward, head_ged, head_sed
from .exact import DistancePolicy, exact_ged, exact_sed, is_isomorphic
from .exact._backend import compiled_bnb_search
from .exact.brute import brute_force_sed
from .graph import LabelAlphabet, random_connected_graph
from .index import MetricTree, head_ged_distance, head_sed_distance, linear_scan_knn, linear_scan_range
from .nn import autograd as ag
from .nn import grad_check

LEVELS = {"quick": 1, "full": 5}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _graphs(rng, count, lo, hi, labels=3):
    return [random_connected_graph(int(rng.integers(lo, hi + 1)), 0.3, labels, rng) for _ in range(count)]


def check_sed_as_ged(rng, scale, inject=False):
    bad = 0
    n = 25 * scale
    for _ in range(n):
        q, t = _graphs(rng, 1, 1, 3)[0], _graphs(rng, 1, 1, 4)[0]
        got = exact_sed(q, t).value + (1 if inject else 0)
        bad += got != brute_force_sed(q, t, lambda a, b: exact_ged(a, b).value)
    return bad == 0, f"{n} pairs, {bad} mismatches"


def check_exact_axioms(rng, scale, inject=False):
    bad = 0
    n = 20 * scale
    for _ in range(n):
        a, b, c = _graphs(rng, 3, 1, 4)
        s = lambda x, y: exact_sed(x, y).value
        g = lambda x, y: exact_ged(x, y).value
        bad += s(a, c) > s(a, b) + s(b, c)
        bad += g(a, c) > g(a, b) + g(b, c)
        bad += g(a, b) != g(b, a)
        bad += (g(a, b) == 0) != is_isomorphic(a, b)
    return bad == 0, f"{n} triples, {bad} violations"


def check_head_axioms(rng, scale, inject=False):
    n = 2000 * scale
    x, y, z = (rng.normal(size=(n, 16)) for _ in range(3))
    bad = 0
    for a, b, c in zip(x, y, z):
        tol = 1e-6 * (1 + np.abs([a, b, c]).max())
        bad += head_sed(a, c) > head_sed(a, b) + head_sed(b, c) + tol
        bad += head_ged(a, c) > head_ged(a, b) + head_ged(b, c) + tol
        bad += head_ged(a, b) != head_ged(b, a)
        bad += head_sed(np.minimum(a, b), b) != 0
    return bad == 0, f"{n} vector triples, {bad} violations"


def check_gradients(rng, scale, inject=False):
    al = LabelAlphabet(["a", "b", "c"])
    cfg = EncoderConfig(3, gin_layers=2, hidden_dim=8, embedding_dim=8)
    model = Model.initialize(cfg, al, seed=int(rng.integers(1 << 31)))
    P = model.tensors(np.float64)
    names = [n for n, _ in cfg.param_shapes()]
    gs = _graphs(rng, 6, 2, 6)
    bq = GraphBatch.from_graphs(gs[:3], al)
    bt = GraphBatch.from_graphs(gs[3:], al)
    lb = rng.uniform(0, 2, size=3)
    ub = lb + 0.5

    def f(ps):
        d = dict(zip(names, ps))
        return ag.mean(ag.interval_sq(ag.relu_diff_norm(forward(bq, d, cfg), forward(bt, d, cfg)), lb, ub))

    rep = grad_check(f, [P[n] for n in names], max_coords=None if scale > 1 else 8, rng=rng)
    return rep.passed(1e-4), f"max rel error {rep.max_rel_error:.2e} over {rep.checked} coords"


def check_scan_equivalence(rng, scale, inject=False):
    n = 400 * scale
    centers = rng.normal(scale=3, size=(10, 16))
    X = (centers[rng.integers(10, size=n)] + rng.normal(scale=0.5, size=(n, 16))).astype(np.float32)
    bad = 0
    for make in (head_sed_distance, head_ged_distance):
        tree = MetricTree(X, make(), seed=int(rng.integers(1 << 31)))
        for q in X[rng.choice(n, size=10 * scale, replace=False)] + rng.normal(scale=0.2, size=(10 * scale, 16)).astype(np.float32):
            r = float(np.quantile(make().to_many(q, X), 0.05))
            bad += tree.range_query(q, r) != linear_scan_range(X, q, r, make())
            bad += tree.knn_query(q, 10) != linear_scan_knn(X, q, 10, make())
    return bad == 0, f"{n} items, {bad} mismatches"


def check_backend_parity(rng, scale, inject=False):
    if compiled_bnb_search is None:
        return True, "compiled kernel not built; skipped"
    bad = 0
    n = 20 * scale
    for _ in range(n):
        a, b = _graphs(rng, 1, 2, 6)[0], _graphs(rng, 1, 2, 8)[0]
        for policy in (DistancePolicy.ged(), DistancePolicy.sed()):
            r1 = exact_ged(a, b, policy, backend="python")
            r2 = exact_ged(a, b, policy, backend="cython")
            bad += (r1.lower, r1.upper, r1.expansions) != (r2.lower, r2.upper, r2.expansions)
    return bad == 0, f"{n} pairs, {bad} mismatches"


CHECKS: list[tuple[str, Callable]] = [
    ("sed_as_ged", check_sed_as_ged),
    ("exact_axioms", check_exact_axioms),
    ("head_axioms", check_head_axioms),
    ("gradients", check_gradients),
    ("scan_equivalence", check_scan_equivalence),
    ("backend_parity", check_backend_parity),
]


def run(level: str = "quick", seed: int = 0, inject_failure: bool = False) -> list[CheckResult]:
    scale = LEVELS[level]
    results = []
    for i, (name, fn) in enumerate(CHECKS):
        rng = np.random.default_rng([seed, i])
        t0 = time.perf_counter()
        ok, detail = fn(rng, scale, inject=inject_failure and name == "sed_as_ged")
        results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return results
