"""Minibatch training of the encoder against interval or exact targets."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .encoder import EncoderConfig, GraphBatch, Model, forward, init_params
from .exact.policy import Mode
from .graph import LabelAlphabet, LabeledGraph
from .nn import autograd as ag

log = logging.getLogger(__name__)


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TrainSample:
    query_id: str
    target_id: str
    lb: float
    ub: float
    complete: bool = True

    def __post_init__(self):
        if not (0 <= self.lb <= self.ub):
            raise ValueError(f"bad bounds for ({self.query_id}, {self.target_id}): {self.lb}, {self.ub}")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lb + self.ub)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 200
    max_lr: float = 1e-3
    half_cycle_iters: int = 2000
    weight_decay: float = 1e-3
    patience_cycles: int = 5
    seed: int = 0
    loss: str = "interval"
    max_cycles: int | None = None
    grad_clip: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    dtype: str = "float32"

    def __post_init__(self):
        if self.batch_size < 1 or self.half_cycle_iters < 1 or self.patience_cycles < 1:
            raise ValueError("batch_size, half_cycle_iters and patience_cycles must be >= 1")
        if self.max_lr <= 0 or self.weight_decay < 0:
            raise ValueError("max_lr must be positive and weight_decay non-negative")
        if self.loss not in ("interval", "mse"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.max_cycles is not None and self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")


# ---------------------------------------------------------------------------
# losses and schedule


def loss_interval(pred: float, lb: float, ub: float) -> float:
    if pred > ub:
        return (pred - ub) ** 2
    if pred < lb:
        return (lb - pred) ** 2
    return 0.0


def loss_mse(pred: float, truth: float) -> float:
    return (pred - truth) ** 2


def lr_at(iteration: int, max_lr: float = 1e-3, half_cycle_iters: int = 2000) -> float:
    """Triangular wave: 0 at cycle boundaries, ``max_lr`` at mid-cycle."""
    phase = iteration % (2 * half_cycle_iters)
    if phase <= half_cycle_iters:
        return max_lr * phase / half_cycle_iters
    return max_lr * (2 * half_cycle_iters - phase) / half_cycle_iters


class AdamW:
    """Adam moments with weight decay applied directly to the weights, scaled by lr."""

    def __init__(self, params: Mapping[str, np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=1e-3):
        self.beta1, self.beta2, self.eps, self.weight_decay = beta1, beta2, eps, weight_decay
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray], lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1**self.t
        c2 = 1 - b2**self.t
        for name in sorted(params):
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(params[name])
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            if lr == 0:
                continue
            update = (m / c1) / (np.sqrt(v / c2) + self.eps) + self.weight_decay * params[name]
            params[name] -= (lr * update).astype(params[name].dtype, copy=False)


# ---------------------------------------------------------------------------
# batching


class _GraphCache:
    """Per-graph label ids and directed edge arrays, reused across minibatches."""

    def __init__(self, graphs: Mapping[str, LabeledGraph], alphabet: LabelAlphabet):
        self.alphabet = alphabet
        self.entries = {}
        for gid, g in graphs.items():
            ids = np.array([alphabet.id_of(l) for l in g.labels], dtype=np.intp)
            e = np.array(g.sorted_edges(), dtype=np.intp).reshape(-1, 2)
            self.entries[gid] = (ids, np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))

    def batch(self, gids: Sequence[str], dtype) -> GraphBatch:
        ids, srcs, dsts, counts = [], [], [], []
        offset = 0
        for gid in gids:
            lab, s, d = self.entries[gid]
            ids.append(lab)
            srcs.append(s + offset)
            dsts.append(d + offset)
            counts.append(len(lab))
            offset += len(lab)
        x = np.zeros((offset, len(self.alphabet)), dtype=dtype)
        x[np.arange(offset), np.concatenate(ids)] = 1
        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        order = np.lexsort((src, dst))
        counts = np.array(counts, dtype=np.intp)
        node_graph = np.repeat(np.arange(len(gids), dtype=np.intp), counts)
        return GraphBatch(x, src[order], dst[order], node_graph, counts, list(gids), [])


def pair_predictions(
    cache: _GraphCache, samples: Sequence[TrainSample], P: dict[str, ag.Tensor], config: EncoderConfig, mode: Mode, dtype
) -> ag.Tensor:
    """Predicted distances for ``samples`` as an ``(n, 1)`` tensor."""
    slot: dict[str, int] = {}
    for s in samples:
        slot.setdefault(s.query_id, len(slot))
        slot.setdefault(s.target_id, len(slot))
    z = forward(cache.batch(list(slot), dtype), P, config)
    zq = ag.gather_rows(z, [slot[s.query_id] for s in samples])
    zt = ag.gather_rows(z, [slot[s.target_id] for s in samples])
    return ag.relu_diff_norm(zq, zt) if mode == Mode.SED else ag.diff_norm(zq, zt)


def batch_loss(pred: ag.Tensor, samples: Sequence[TrainSample], loss: str) -> ag.Tensor:
    lb = np.array([s.lb for s in samples])
    ub = np.array([s.ub for s in samples])
    if loss == "mse":
        mid = 0.5 * (lb + ub)
        lb = ub = mid
    return ag.mean(ag.interval_sq(pred, lb, ub))


# ---------------------------------------------------------------------------
# training loop


@dataclass
class HistoryRow:
    cycle: int
    train_loss: float
    val_loss: float
    lr_peak: float
    wall_ms: float


@dataclass
class TrainResult:
    model: Model
    history: list[HistoryRow] = field(default_factory=list)
    best_cycle: int = 0
    best_val_loss: float = float("inf")
    stopped_early: bool = False


def _check_resolvable(samples: Iterable[TrainSample], graphs: Mapping[str, LabeledGraph]) -> None:
    for s in samples:
        for gid in (s.query_id, s.target_id):
            if gid not in graphs:
                raise TrainingError(f"sample references unknown graph id {gid!r}")


def evaluate_loss(model_or_params, samples, graphs_or_cache, config: EncoderConfig, mode: Mode, loss: str, batch_size=500, dtype=np.float32) -> float:
    """Mean loss over ``samples`` without recording gradients."""
    params = model_or_params.params if isinstance(model_or_params, Model) else model_or_params
    cache = graphs_or_cache
    if not isinstance(cache, _GraphCache):
        cache = _GraphCache(graphs_or_cache, model_or_params.alphabet)
    P = {k: ag.Tensor(v.astype(dtype)) for k, v in params.items()}
    total, n = 0.0, 0
    for i in range(0, len(samples), batch_size):
        chunk = samples[i : i + batch_size]
        pred = pair_predictions(cache, chunk, P, config, mode, dtype)
        total += float(batch_loss(pred, chunk, loss).item()) * len(chunk)
        n += len(chunk)
    return total / n


def train(
    train_samples: Sequence[TrainSample],
    val_samples: Sequence[TrainSample],
    graphs: Mapping[str, LabeledGraph],
    alphabet: LabelAlphabet,
    encoder_config: EncoderConfig,
    config: TrainConfig = TrainConfig(),
    mode: Mode | str = Mode.SED,
    initial: Model | None = None,
    on_cycle: Callable[[HistoryRow], None] | None = None,
) -> TrainResult:
    """Cyclic-LR AdamW training with per-cycle validation and early stopping.

    Returns the parameters with the lowest validation loss.  Runs are
    bit-reproducible for a fixed seed and thread count.
    """
    mode = Mode(mode)
    train_samples = list(train_samples)
    val_samples = list(val_samples)
    if not train_samples:
        raise TrainingError("training set is empty")
    if not val_samples:
        raise TrainingError("validation set is empty")
    _check_resolvable(train_samples, graphs)
    _check_resolvable(val_samples, graphs)
    if encoder_config.alphabet_size != len(alphabet):
        raise TrainingError("encoder alphabet_size does not match the alphabet")

    dtype = np.dtype(config.dtype)
    rng = np.random.default_rng(config.seed)
    if initial is not None:
        params = {k: v.astype(dtype) for k, v in initial.params.items()}
    else:
        params = init_params(encoder_config, rng, dtype)
    cache = _GraphCache(graphs, alphabet)
    opt = AdamW(params, config.beta1, config.beta2, config.adam_eps, config.weight_decay)

    def snapshot():
        return Model(encoder_config, alphabet, {k: v.copy() for k, v in params.items()}, mode)

    best_val = evaluate_loss(snapshot(), val_samples, cache, encoder_config, mode, config.loss, dtype=dtype)
    best = snapshot()
    result = TrainResult(best, best_val_loss=best_val)
    log.info("initial validation loss %.6g", best_val)

    order = rng.permutation(len(train_samples))
    cursor = 0
    cycle_len = 2 * config.half_cycle_iters
    iteration = 0
    stale = 0
    cycle = 0
    while True:
        cycle += 1
        t0 = time.perf_counter()
        losses = []
        for _ in range(cycle_len):
            if cursor + config.batch_size > len(order):
                order = rng.permutation(len(train_samples))
                cursor = 0
            idx = order[cursor : cursor + config.batch_size]
            cursor += config.batch_size
            chunk = [train_samples[i] for i in idx]

            P = {k: ag.Tensor(v, requires_grad=True, name=k) for k, v in params.items()}
            with ag.Tape() as tape:
                loss = batch_loss(pair_predictions(cache, chunk, P, encoder_config, mode, dtype), chunk, config.loss)
            tape.backward(loss)
            grads = {k: t.grad for k, t in P.items()}
            if config.grad_clip is not None:
                norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values() if g is not None))
                if norm > config.grad_clip:
                    grads = {k: None if g is None else g * (config.grad_clip / norm) for k, g in grads.items()}
            iteration += 1
            opt.step(params, grads, lr_at(iteration, config.max_lr, config.half_cycle_iters))
            losses.append(loss.item())

        val = evaluate_loss(snapshot(), val_samples, cache, encoder_config, mode, config.loss, dtype=dtype)
        row = HistoryRow(cycle, float(np.mean(losses)), val, config.max_lr, (time.perf_counter() - t0) * 1000)
        result.history.append(row)
        log.info("cycle %d: train %.6g val %.6g", cycle, row.train_loss, val)
        if on_cycle:
            on_cycle(row)
        if val < result.best_val_loss:
            result.best_val_loss = val
            result.best_cycle = cycle
            result.model = snapshot()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience_cycles:
                result.stopped_early = True
                break
        if config.max_cycles is not None and cycle >= config.max_cycles:
            break
    return result


HISTORY_FIELDS = ("cycle", "train_loss", "val_loss", "lr_peak", "wall_ms")


def write_history(rows: Iterable[HistoryRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_FIELDS)
        for r in rows:
            w.writerow([r.cycle, repr(r.train_loss), repr(r.val_loss), repr(r.lr_peak), f"{r.wall_ms:.1f}"])
