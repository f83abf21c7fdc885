"""Compare the compiled and pure-Python branch-and-bound kernels.

    python3 benchmarks/bench_kernels.py [--pairs 50] [--query 8] [--target 12]

Both kernels run on the same random SED and GED pairs; the script checks
that they agree and prints per-pair timings and the speedup.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from sedsearch.exact import DistancePolicy, exact_ged
from sedsearch.exact._backend import compiled_bnb_search
from sedsearch.graph import random_connected_graph


def bench(pairs, policy, backend, budget):
    times, expansions = [], 0
    results = []
    for q, t in pairs:
        t0 = time.perf_counter()
        r = exact_ged(q, t, policy, budget=budget, node_cap=None, backend=backend)
        times.append(time.perf_counter() - t0)
        expansions += r.expansions
        results.append((r.lower, r.upper, r.expansions))
    return times, expansions, results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=50)
    ap.add_argument("--query", type=int, default=8)
    ap.add_argument("--target", type=int, default=12)
    ap.add_argument("--labels", type=int, default=3)
    ap.add_argument("--budget", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if compiled_bnb_search is None:
        raise SystemExit("compiled kernel is not built; run `pip install -e . --no-build-isolation` first")
    rng = np.random.default_rng(args.seed)
    pairs = [
        (
            random_connected_graph(args.query, 0.2, args.labels, rng),
            random_connected_graph(args.target, 0.2, args.labels, rng),
        )
        for _ in range(args.pairs)
    ]
    print(f"{args.pairs} pairs, query {args.query} nodes, target {args.target} nodes, {args.labels} labels")
    print(f"{'mode':<5} {'backend':<8} {'median ms':>10} {'total s':>9} {'expansions':>11}")
    for name, policy in (("sed", DistancePolicy.sed()), ("ged", DistancePolicy.ged())):
        out = {}
        for backend in ("cython", "python"):
            times, exp, res = bench(pairs, policy, backend, args.budget)
            out[backend] = (times, res)
            print(f"{name:<5} {backend:<8} {1000 * statistics.median(times):>10.2f} {sum(times):>9.2f} {exp:>11}")
        if out["cython"][1] != out["python"][1]:
            raise SystemExit(f"{name}: backends disagree")
        speedup = sum(out["python"][0]) / sum(out["cython"][0])
        print(f"{name:<5} speedup  {speedup:.1f}x (results identical)")


if __name__ == "__main__":
    main()
