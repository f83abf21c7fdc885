"""Distances over embedding rows, evaluated as ``d(query_side, item_side)``."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..encoder import ged_rows, sed_rows

TAGS = {"head_sed": 0, "head_ged": 1, "custom": 2}


class Distance:
    """A (possibly asymmetric) distance with a vectorised one-to-many form.

    ``to_many(a, B)`` returns ``d(a, B[i])`` and ``from_many(B, a)`` returns
    ``d(B[i], a)``; both must agree bit-for-bit with ``pair``.
    """

    def __init__(self, tag: str, rows: Callable[[np.ndarray, np.ndarray], np.ndarray], symmetric: bool = False):
        if tag not in TAGS:
            raise ValueError(f"unknown distance tag {tag!r}")
        self.tag = tag
        self._rows = rows
        self.symmetric = symmetric
        self.evaluations = 0

    def pair(self, a: np.ndarray, b: np.ndarray) -> float:
        self.evaluations += 1
        return float(self._rows(a[None, :], b[None, :])[0])

    def to_many(self, a: np.ndarray, B: np.ndarray) -> np.ndarray:
        self.evaluations += len(B)
        return np.asarray(self._rows(a[None, :], B), dtype=np.float64).reshape(len(B))

    def from_many(self, B: np.ndarray, a: np.ndarray) -> np.ndarray:
        self.evaluations += len(B)
        return np.asarray(self._rows(B, a[None, :]), dtype=np.float64).reshape(len(B))

    def __repr__(self) -> str:
        return f"Distance({self.tag})"


def head_sed_distance() -> Distance:
    return Distance("head_sed", sed_rows)


def head_ged_distance() -> Distance:
    return Distance("head_ged", ged_rows, symmetric=True)


def custom_distance(pair: Callable[[np.ndarray, np.ndarray], float]) -> Distance:
    """Wrap a scalar ``pair(a, b)`` function; the caller vouches for the triangle inequality."""

    def rows(A, B):
        n = max(len(A), len(B))
        A = np.broadcast_to(A, (n, A.shape[1]))
        B = np.broadcast_to(B, (n, B.shape[1]))
        return np.array([pair(a, b) for a, b in zip(A, B)], dtype=np.float64)

    return Distance("custom", rows)


def by_tag(tag: str) -> Distance:
    if tag == "head_sed":
        return head_sed_distance()
    if tag == "head_ged":
        return head_ged_distance()
    raise ValueError(f"distance {tag!r} cannot be rebuilt from its tag")
