"""``sedsearch`` command-line entry point.

Exit codes: 0 on success, 1 for invalid input or configuration, 2 when an
internal consistency check fails.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2


class InvalidInput(Exception):
    pass


class InternalCheckFailed(Exception):
    pass


def _set_threads(n: int | None) -> int:
    """Cap BLAS threads; must run before numpy is imported."""
    if n is None:
        env = os.environ.get("NSED_THREADS")
        n = int(env) if env else 1
    if n < 1:
        raise InvalidInput("--threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")
    return n


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _manifest(args, config: dict, inputs, outputs, t0: float, path) -> None:
    doc = {
        "subcommand": args.command,
        "config": config,
        "seed": config.get("seed"),
        "inputs": {str(p): _sha256(p) for p in inputs if p and Path(p).is_file()},
        "outputs": {str(p): _sha256(p) for p in outputs if p and Path(p).is_file()},
        "wall_ms": round((time.perf_counter() - t0) * 1000, 1),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _manifest_path(args, default) -> Path:
    return Path(args.manifest) if getattr(args, "manifest", None) else Path(default)


def _read_graph_files(paths):
    from .graph import read_graphs

    graphs = {}
    for p in paths:
        for g in read_graphs(p, allow_disconnected=True):
            if g.graph_id in graphs:
                raise InvalidInput(f"duplicate graph id {g.graph_id!r} in {p}")
            graphs[g.graph_id] = g
    return graphs


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args, t0):
    from .datagen import CorpusSpec, generate_corpus, write_corpus

    spec = CorpusSpec.load(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
        spec.validate()
    corpus = generate_corpus(spec, workers=args.threads)
    paths = write_corpus(corpus, args.out)
    _manifest(args, spec.to_dict(), [args.spec], paths.values(), t0, _manifest_path(args, Path(args.out) / "manifest.json"))
    counts = {k: len(v) for k, v in corpus.splits.items()}
    incomplete = sum(not r.complete for v in corpus.splits.values() for r in v)
    print(f"wrote {len(corpus.targets)} targets, {len(corpus.queries)} queries, pairs {counts}, {incomplete} budget-truncated")


def cmd_oracle(args, t0):
    from .datagen import label_pairs, read_pairs, write_pairs

    graphs = _read_graph_files(args.graphs)
    pairs = read_pairs(args.pairs)
    for r in pairs:
        for gid in (r.q, r.t):
            if gid not in graphs:
                raise InvalidInput(f"pair references unknown graph id {gid!r}")
    records = label_pairs([(r.q, r.t) for r in pairs], graphs, args.mode, args.budget, workers=args.threads)
    write_pairs(args.out, records)
    config = {"mode": args.mode, "budget": args.budget, "seed": None}
    _manifest(args, config, [args.pairs, *args.graphs], [args.out], t0, _manifest_path(args, args.out + ".manifest.json"))
    print(f"labeled {len(records)} pairs, {sum(not r.complete for r in records)} budget-truncated")


def _train_config(args):
    from .trainer import TrainConfig

    base = json.loads(Path(args.config).read_text()) if args.config else {}
    train = dict(base.get("train", {}))
    enc = dict(base.get("encoder", {}))
    overrides = {
        "batch_size": args.batch_size, "max_lr": args.lr, "half_cycle_iters": args.half_cycle,
        "weight_decay": args.weight_decay, "patience_cycles": args.patience, "seed": args.seed,
        "loss": args.loss, "max_cycles": args.max_cycles,
    }
    train.update({k: v for k, v in overrides.items() if v is not None})
    enc_over = {"gin_layers": args.gin_layers, "hidden_dim": args.hidden_dim, "embedding_dim": args.embedding_dim}
    enc.update({k: v for k, v in enc_over.items() if v is not None})
    try:
        return TrainConfig(**train), enc
    except TypeError as exc:
        raise InvalidInput(f"train config: {exc}") from None


def cmd_train(args, t0):
    from .datagen import load_corpus
    from .encoder import EncoderConfig
    from .graph import LabelAlphabet
    from .trainer import TrainSample, train, write_history

    corpus = load_corpus(args.corpus)
    tc, enc = _train_config(args)
    alphabet = LabelAlphabet(corpus.labels())
    try:
        ec = EncoderConfig(alphabet_size=len(alphabet), **enc)
    except TypeError as exc:
        raise InvalidInput(f"encoder config: {exc}") from None
    to_samples = lambda recs: [TrainSample(r.q, r.t, r.lb, r.ub, r.complete) for r in recs]
    mode = args.mode or corpus.spec.mode
    res = train(
        to_samples(corpus.splits["train"]), to_samples(corpus.splits["val"]), corpus.graphs, alphabet, ec, tc, mode,
        on_cycle=lambda row: print(f"cycle {row.cycle}: train {row.train_loss:.4g} val {row.val_loss:.4g}", flush=True),
    )
    res.model.save(args.out)
    history = args.history or args.out + ".history.csv"
    write_history(res.history, history)
    from dataclasses import asdict

    config = {"mode": mode, "train": asdict(tc), "encoder": asdict(ec), "seed": tc.seed}
    _manifest(args, config, [Path(args.corpus) / f"{s}.jsonl" for s in ("train", "val")], [args.out, args.out + ".json", history], t0,
              _manifest_path(args, args.out + ".manifest.json"))
    print(f"best validation loss {res.best_val_loss:.4g} at cycle {res.best_cycle}")


def cmd_predict(args, t0):
    from .datagen import read_pairs
    from .encoder import Model

    model = Model.load(args.model)
    graphs = _read_graph_files(args.graphs)
    cache = {}

    def emb(gid):
        if gid not in graphs:
            raise InvalidInput(f"unknown graph id {gid!r}")
        if gid not in cache:
            cache[gid] = model.embed(graphs[gid])
        return cache[gid]

    with open(args.out, "w") as fh:
        for r in read_pairs(args.pairs):
            fh.write(json.dumps({"q": r.q, "t": r.t, "pred": model.head(emb(r.q), emb(r.t))}) + "\n")
    _manifest(args, {"seed": None}, [args.model, args.pairs, *args.graphs], [args.out], t0,
              _manifest_path(args, args.out + ".manifest.json"))


def cmd_embed(args, t0):
    from .encoder import Model
    from .graph import read_graphs
    from .index import save_embeddings

    model = Model.load(args.model)
    graphs = read_graphs(args.graphs, allow_disconnected=True)
    if not graphs:
        raise InvalidInput(f"{args.graphs}: no graphs to embed")
    emb = model.embed_many(graphs, unknown="zero" if args.allow_unknown else "error")
    save_embeddings(emb, args.out)
    _manifest(args, {"seed": None, "allow_unknown": args.allow_unknown}, [args.model, args.graphs], [args.out], t0,
              _manifest_path(args, args.out + ".manifest.json"))
    print(f"embedded {len(emb)} graphs (dim {emb.dim})")


def cmd_index_build(args, t0):
    from .index import MetricTree, by_tag, load_embeddings, save_tree

    emb = load_embeddings(args.embeddings)
    tree = MetricTree(emb.values, by_tag(args.dist), leaf_cap=args.leaf_cap, seed=args.seed)
    save_tree(tree, args.out)
    config = {"dist": args.dist, "leaf_cap": args.leaf_cap, "seed": args.seed}
    _manifest(args, config, [args.embeddings], [args.out], t0, _manifest_path(args, args.out + ".manifest.json"))
    print(f"indexed {len(tree)} items, depth {tree.depth()}")


def cmd_query(args, t0):
    from .encoder import Model
    from .graph import read_graphs
    from .index import QueryStats, by_tag, linear_scan_knn, linear_scan_range, load_embeddings, load_tree

    if (args.range is None) == (args.knn is None):
        raise InvalidInput("give exactly one of --range or --knn")
    if args.range is not None and args.range < 0:
        raise InvalidInput("--range must be non-negative")
    if args.knn is not None and args.knn < 1:
        raise InvalidInput("--knn must be >= 1")
    emb = load_embeddings(args.embeddings)
    model = Model.load(args.model)
    if args.index and not args.no_index:
        tree = load_tree(args.index, emb.values)
        dist = tree.dist
    else:
        if not args.no_index:
            raise InvalidInput("--index is required unless --no-index is given")
        tree = None
        dist = by_tag(args.dist or ("head_sed" if model.mode.value == "sed" else "head_ged"))
    queries = read_graphs(args.queries, allow_disconnected=True)
    stats = QueryStats()
    mismatches = 0
    with open(args.out, "w") as fh:
        for g in queries:
            z = model.embed(g)
            if args.range is not None:
                hits = tree.range_query(z, args.range, stats) if tree else linear_scan_range(emb.values, z, args.range, dist)
                d = dist.to_many(z, emb.values[hits]) if hits else []
                rows = [{"id": emb.ids[i], "distance": float(x)} for i, x in zip(hits, d)]
                if args.verify and tree:
                    ref = linear_scan_range(emb.values, z, args.range, dist)
                    if ref != hits:
                        mismatches += 1
                        print(f"MISMATCH {g.graph_id}: tree-only {sorted(set(hits) - set(ref))} scan-only {sorted(set(ref) - set(hits))}")
            else:
                hits = tree.knn_query(z, args.knn, stats) if tree else linear_scan_knn(emb.values, z, args.knn, dist)
                rows = [{"id": emb.ids[i], "distance": x} for i, x in hits]
                if args.verify and tree:
                    ref = linear_scan_knn(emb.values, z, args.knn, dist)
                    if ref != hits:
                        mismatches += 1
                        print(f"MISMATCH {g.graph_id}: tree {hits} scan {ref}")
            fh.write(json.dumps({"query": g.graph_id, "results": rows}) + "\n")
    config = {"seed": None, "range": args.range, "knn": args.knn, "index": bool(tree), "dist": dist.tag}
    _manifest(args, config, [p for p in (args.embeddings, args.model, args.index, args.queries) if p], [args.out], t0,
              _manifest_path(args, args.out + ".manifest.json"))
    if tree:
        print(f"{len(queries)} queries, {stats.distance_evals} distance evaluations, {stats.pruned_subtrees} subtrees pruned")
    if mismatches:
        raise InternalCheckFailed(f"{mismatches} queries differ between index and linear scan")


def cmd_eval(args, t0):
    from .datagen import read_pairs
    from .evalkit import ScoredPairs, report, write_report

    truth = {(r.q, r.t): 0.5 * (r.lb + r.ub) for r in read_pairs(args.truths)}
    pred, true, groups, ids = [], [], [], []
    with open(args.predictions) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            key = (str(rec["q"]), str(rec["t"]))
            if key not in truth:
                raise InvalidInput(f"{args.predictions}:{lineno}: no ground truth for pair {key}")
            pred.append(float(rec["pred"]))
            true.append(truth[key])
            groups.append(key[0])
            ids.append(key)
    if not pred:
        raise InvalidInput("no predictions to evaluate")
    percents = [float(p) for p in args.percents.split(",")]
    summary, rows = report(ScoredPairs(pred, true, ids), groups, percents, k=args.k)
    write_report(summary, rows, args.out, args.csv)
    _manifest(args, {"seed": None, "percents": percents, "k": args.k}, [args.predictions, args.truths],
              [args.out, args.csv], t0, _manifest_path(args, args.out + ".manifest.json"))
    print(json.dumps({k: v for k, v in summary.items() if k in ("rmse", "mae", "r2", "kendall_tau")}))


def cmd_selftest(args, t0):
    from . import selftest

    results = selftest.run(args.level, args.seed, args.inject_failure)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail} ({r.seconds:.1f}s)")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise InternalCheckFailed(f"selftest failed: {', '.join(failed)}")
    print("all checks passed")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sedsearch", description="Subgraph and graph edit distance learning and search.")
    p.add_argument("--threads", type=int, default=None, help="worker processes for labeling (env NSED_THREADS)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(func=fn)
        sp.add_argument("--manifest", help="where to write the run manifest")
        return sp

    sp = add("gen-data", cmd_gen_data, "generate and label a corpus from a JSON spec")
    sp.add_argument("spec")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)

    sp = add("oracle", cmd_oracle, "label pairs with exact distance bounds")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--graphs", required=True, nargs="+")
    sp.add_argument("--mode", choices=["sed", "ged"], default="sed")
    sp.add_argument("--budget", type=int, default=1_000_000)
    sp.add_argument("--out", required=True)

    sp = add("train", cmd_train, "train an encoder on a generated corpus")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--mode", choices=["sed", "ged"])
    sp.add_argument("--config", help="JSON file with 'train' and 'encoder' sections")
    sp.add_argument("--out", required=True)
    sp.add_argument("--history")
    for flag, typ in (("--batch-size", int), ("--lr", float), ("--half-cycle", int), ("--weight-decay", float),
                      ("--patience", int), ("--seed", int), ("--max-cycles", int), ("--gin-layers", int),
                      ("--hidden-dim", int), ("--embedding-dim", int)):
        sp.add_argument(flag, type=typ)
    sp.add_argument("--loss", choices=["interval", "mse"])

    sp = add("predict", cmd_predict, "predict distances for listed pairs")
    sp.add_argument("--model", required=True)
    sp.add_argument("--graphs", required=True, nargs="+")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--out", required=True)

    sp = add("embed", cmd_embed, "embed graphs with a trained model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--graphs", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--allow-unknown", action="store_true", help="embed unknown labels as zero vectors")

    sp = add("index-build", cmd_index_build, "build a metric tree over embeddings")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--dist", choices=["head_sed", "head_ged"], default="head_sed")
    sp.add_argument("--leaf-cap", type=int, default=8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("query", cmd_query, "range or k-NN queries over embeddings")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--queries", required=True)
    sp.add_argument("--index")
    sp.add_argument("--no-index", action="store_true", help="linear scan instead of the tree")
    sp.add_argument("--dist", choices=["head_sed", "head_ged"])
    sp.add_argument("--range", type=float)
    sp.add_argument("--knn", type=int)
    sp.add_argument("--verify", action="store_true", help="also run a linear scan and report differences")
    sp.add_argument("--out", required=True)

    sp = add("eval", cmd_eval, "score predictions against ground truth")
    sp.add_argument("--predictions", required=True)
    sp.add_argument("--truths", required=True)
    sp.add_argument("--percents", default="1,5,10,15,20")
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--out", required=True)
    sp.add_argument("--csv")

    sp = add("selftest", cmd_selftest, "run fast property checks")
    sp.add_argument("--level", choices=["quick", "full"], default="quick")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--inject-failure", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are invalid input here
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    t0 = time.perf_counter()
    try:
        args.threads = _set_threads(args.threads)
        import logging

        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        args.func(args, t0)
    except InternalCheckFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (InvalidInput, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AssertionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
