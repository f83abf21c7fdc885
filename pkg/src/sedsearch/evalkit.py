"""Regression, ranking and retrieval metrics for predicted distances."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import kendalltau


class MetricError(ValueError):
    pass


@dataclass
class ScoredPairs:
    predicted: np.ndarray
    truth: np.ndarray
    ids: list | None = None

    def __post_init__(self):
        self.predicted = np.asarray(self.predicted, dtype=np.float64).ravel()
        self.truth = np.asarray(self.truth, dtype=np.float64).ravel()
        if len(self.predicted) != len(self.truth):
            raise MetricError("predicted and truth lengths differ")
        if len(self.truth) == 0:
            raise MetricError("no scored pairs")
        if not np.all(np.isfinite(self.truth)):
            raise MetricError("truth values must be finite")
        if self.ids is not None and len(self.ids) != len(self.truth):
            raise MetricError("ids and values lengths differ")


def rmse(s: ScoredPairs) -> float:
    return math.sqrt(float(np.mean((s.predicted - s.truth) ** 2)))


def mae(s: ScoredPairs) -> float:
    return float(np.mean(np.abs(s.predicted - s.truth)))


def r2(s: ScoredPairs) -> float:
    ss_tot = float(np.sum((s.truth - s.truth.mean()) ** 2))
    if ss_tot == 0:
        raise MetricError("R^2 is undefined for constant truths")
    return 1.0 - float(np.sum((s.truth - s.predicted) ** 2)) / ss_tot


def kendall_tau(a: Sequence[float], b: Sequence[float]) -> float:
    """Tie-corrected Kendall tau (tau-b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) != len(b):
        raise MetricError("rankings have different lengths")
    if len(a) < 2:
        raise MetricError("Kendall tau needs at least two items")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise MetricError("Kendall tau is undefined when one ranking is all ties")
    return float(kendalltau(a, b, variant="b").statistic)


def _top_k(dists: np.ndarray, k: int) -> set[int]:
    order = np.lexsort((np.arange(len(dists)), dists))
    return set(order[:k].tolist())


def precision_at_k(pred_dists: Sequence[float], true_dists: Sequence[float], k: int) -> float:
    pred = np.asarray(pred_dists, dtype=np.float64)
    true = np.asarray(true_dists, dtype=np.float64)
    if len(pred) != len(true):
        raise MetricError("distance vectors have different lengths")
    if not 1 <= k <= len(pred):
        raise MetricError(f"k must be in [1, {len(pred)}]")
    return len(_top_k(pred, k) & _top_k(true, k)) / k


@dataclass
class F1Result:
    f1: float
    precision: float
    recall: float
    degenerate: bool  # no predicted positives or no true positives


def range_f1(pred_dists: Sequence[float], true_dists: Sequence[float], threshold: float) -> F1Result:
    """F1 of "distance <= threshold" with the true distances as labels."""
    if threshold < 0:
        raise MetricError("threshold must be non-negative")
    pred = np.asarray(pred_dists, dtype=np.float64) <= threshold
    true = np.asarray(true_dists, dtype=np.float64) <= threshold
    if len(pred) != len(true):
        raise MetricError("distance vectors have different lengths")
    tp = int(np.sum(pred & true))
    n_pred, n_true = int(pred.sum()), int(true.sum())
    if n_pred == 0 or n_true == 0:
        return F1Result(0.0, 0.0, 0.0, True)
    p, r = tp / n_pred, tp / n_true
    f1 = 0.0 if tp == 0 else 2 * p * r / (p + r)
    return F1Result(f1, p, r, False)


DEFAULT_PERCENTS = (1, 5, 10, 15, 20)


def report(scored: ScoredPairs, groups: Sequence | None = None, percents: Sequence[float] = DEFAULT_PERCENTS, k: int = 10) -> tuple[dict, list[dict]]:
    """Metrics over all pairs plus a per-query breakdown.

    ``groups`` assigns each pair to a query; per-query rows report RMSE,
    Precision@k and the range F1 at each threshold (a percentage of the
    largest true distance overall).
    """
    out: dict = {"pairs": len(scored.truth), "rmse": rmse(scored), "mae": mae(scored)}
    for name, fn in (("r2", lambda: r2(scored)), ("kendall_tau", lambda: kendall_tau(scored.predicted, scored.truth))):
        try:
            out[name] = fn()
        except MetricError as exc:
            out[name] = None
            out[f"{name}_error"] = str(exc)
    max_true = float(scored.truth.max())
    rows = []
    if groups is not None:
        groups = list(groups)
        if len(groups) != len(scored.truth):
            raise MetricError("groups and values lengths differ")
        by_query: dict = {}
        for i, g in enumerate(groups):
            by_query.setdefault(g, []).append(i)
        f1_sums = {p: [] for p in percents}
        precs = []
        for g in sorted(by_query, key=str):
            idx = np.array(by_query[g])
            sub = ScoredPairs(scored.predicted[idx], scored.truth[idx])
            row = {"query": g, "pairs": len(idx), "rmse": rmse(sub)}
            kk = min(k, len(idx))
            row[f"precision_at_{k}"] = precision_at_k(sub.predicted, sub.truth, kk)
            precs.append(row[f"precision_at_{k}"])
            for p in percents:
                res = range_f1(sub.predicted, sub.truth, max_true * p / 100)
                row[f"f1_{p:g}pct"] = res.f1
                row[f"f1_{p:g}pct_degenerate"] = res.degenerate
                if not res.degenerate:
                    f1_sums[p].append(res.f1)
            rows.append(row)
        out[f"precision_at_{k}"] = float(np.mean(precs))
        for p in percents:
            out[f"f1_{p:g}pct"] = float(np.mean(f1_sums[p])) if f1_sums[p] else None
    else:
        for p in percents:
            res = range_f1(scored.predicted, scored.truth, max_true * p / 100)
            out[f"f1_{p:g}pct"] = None if res.degenerate else res.f1
    return out, rows


def write_report(summary: dict, rows: list[dict], json_path, csv_path=None) -> None:
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            if rows:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                w.writeheader()
                w.writerows(rows)
