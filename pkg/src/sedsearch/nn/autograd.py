"""Tape-based reverse-mode differentiation over 2-D numpy arrays.

Operations record themselves on the innermost active :class:`Tape` when at
least one input requires a gradient; outside a tape they only compute
values.  Broadcasting is limited to adding a ``(1, cols)`` bias row.
"""

from __future__ import annotations

import os
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

DEBUG = bool(os.environ.get("SEDSEARCH_DEBUG"))

_TAPES: list["Tape"] = []
_PATTERN_SINKS: list = []


def _pattern(*masks: np.ndarray) -> None:
    if _PATTERN_SINKS:
        sink = _PATTERN_SINKS[-1]
        for m in masks:
            sink.masks.append(np.packbits(np.asarray(m, dtype=bool)).tobytes())


class ShapeError(ValueError):
    pass


class Tensor:
    """A 2-D value with an optional gradient accumulator."""

    __slots__ = ("value", "grad", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(value)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.value = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.value.reshape(()))

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"


Backward = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Ordered record of operations; ``backward`` replays it in reverse."""

    def __init__(self):
        self.records: list[tuple[Tensor, tuple[Tensor, ...], Backward]] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.remove(self)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Backward) -> None:
        self.records.append((out, inputs, backward))

    def backward(self, loss: Tensor, seed: np.ndarray | None = None) -> None:
        """Accumulate d(loss)/d(x) into ``x.grad`` for every recorded input."""
        if seed is None:
            if loss.value.size != 1:
                raise ShapeError("backward() without a seed needs a scalar loss")
            seed = np.ones_like(loss.value)
        loss.grad = seed if loss.grad is None else loss.grad + seed
        for out, inputs, fn in reversed(self.records):
            if out.grad is None:
                continue
            grads = fn(out.grad)
            for inp, g in zip(inputs, grads):
                if g is None or not inp.requires_grad:
                    continue
                if g.shape != inp.shape:
                    raise ShapeError(f"gradient shape {g.shape} != input shape {inp.shape}")
                inp.grad = g if inp.grad is None else inp.grad + g


def _emit(value: np.ndarray, inputs: tuple[Tensor, ...], backward: Backward) -> Tensor:
    if DEBUG and not np.all(np.isfinite(value)):
        raise FloatingPointError("non-finite value produced")
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=needs)
    if needs and _TAPES:
        _TAPES[-1].record(out, inputs, backward)
    return out


def _check_same(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _emit(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may also be a ``(1, cols)`` row added to every row."""
    if a.shape == b.shape:
        return _emit(a.value + b.value, (a, b), lambda g: (g, g))
    if b.shape[0] == 1 and b.shape[1] == a.shape[1]:
        return _emit(a.value + b.value, (a, b), lambda g: (g, g.sum(axis=0, keepdims=True)))
    raise ShapeError(f"add: shape mismatch {a.shape} vs {b.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "sub")
    return _emit(a.value - b.value, (a, b), lambda g: (g, -g))


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0
    _pattern(mask)
    return _emit(np.where(mask, a.value, 0).astype(a.dtype, copy=False), (a,), lambda g: (g * mask,))


def scale(a: Tensor, s: Tensor | float, offset: float = 0.0) -> Tensor:
    """``a * (s + offset)`` with ``s`` a scalar or a 1x1 tensor."""
    if isinstance(s, Tensor):
        if s.shape != (1, 1):
            raise ShapeError(f"scale: factor must be 1x1, got {s.shape}")
        av = a.value
        f = s.value[0, 0] + offset
        return _emit(av * f, (a, s), lambda g: (g * f, np.array([[np.sum(g * av)]], dtype=s.dtype)))
    f = float(s) + offset
    return _emit(a.value * f, (a,), lambda g: (g * f,))


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ {[p.shape for p in parts]}")
    widths = np.cumsum([0] + [p.shape[1] for p in parts])

    def back(g):
        return [g[:, widths[i] : widths[i + 1]] for i in range(len(parts))]

    return _emit(np.concatenate([p.value for p in parts], axis=1), tuple(parts), back)


def gather_rows(a: Tensor, index) -> Tensor:
    index = np.asarray(index, dtype=np.intp)
    n = a.shape[0]
    if index.size and (index.min() < 0 or index.max() >= n):
        raise ShapeError(f"gather_rows: index out of range for {a.shape}")

    def back(g):
        return (np.asarray(indicator(index, n, g.dtype) @ g),)

    return _emit(a.value[index], (a,), back)


def indicator(segments, num_segments: int, dtype=np.float64) -> sp.csr_matrix:
    """Sparse ``(num_segments, rows)`` 0/1 matrix with row-major accumulation order."""
    segments = np.asarray(segments, dtype=np.intp)
    rows = segments.shape[0]
    return sp.csr_matrix(
        (np.ones(rows, dtype=dtype), (segments, np.arange(rows))),
        shape=(num_segments, rows),
    )


def segment_sum(a: Tensor, segments, num_segments: int) -> Tensor:
    """Sum rows of ``a`` sharing a segment id; rows are added in index order."""
    segments = np.asarray(segments, dtype=np.intp)
    if segments.shape[0] != a.shape[0]:
        raise ShapeError(f"segment_sum: segment ids {segments.shape} do not match rows of {a.shape}")
    if segments.size and (segments.min() < 0 or segments.max() >= num_segments):
        raise ShapeError("segment_sum: segment id out of range")
    mat = indicator(segments, num_segments, a.dtype)
    out = np.asarray(mat @ a.value)
    return _emit(out, (a,), lambda g: (g[segments],))


def l2_norm_rows(a: Tensor) -> Tensor:
    """Row-wise Euclidean norm as an ``(n, 1)`` column; gradient is 0 at the zero row."""
    norm = np.sqrt(np.sum(a.value * a.value, axis=1, keepdims=True))
    _pattern(norm > 0)
    safe = np.where(norm > 0, norm, 1)
    unit = np.where(norm > 0, a.value / safe, 0)
    return _emit(norm, (a,), lambda g: (g * unit,))


def relu_diff_norm(zq: Tensor, zt: Tensor) -> Tensor:
    """Row-wise ``||max(0, zq - zt)||``, fused."""
    _check_same(zq, zt, "relu_diff_norm")
    diff = np.maximum(zq.value - zt.value, 0)
    norm = np.sqrt(np.sum(diff * diff, axis=1, keepdims=True))
    _pattern(diff > 0, norm > 0)
    safe = np.where(norm > 0, norm, 1)
    unit = np.where(norm > 0, diff / safe, 0)

    def back(g):
        gq = g * unit
        return (gq, -gq)

    return _emit(norm, (zq, zt), back)


def diff_norm(z1: Tensor, z2: Tensor) -> Tensor:
    """Row-wise ``||z1 - z2||``, fused."""
    _check_same(z1, z2, "diff_norm")
    diff = z1.value - z2.value
    norm = np.sqrt(np.sum(diff * diff, axis=1, keepdims=True))
    _pattern(norm > 0)
    safe = np.where(norm > 0, norm, 1)
    unit = np.where(norm > 0, diff / safe, 0)

    def back(g):
        g1 = g * unit
        return (g1, -g1)

    return _emit(norm, (z1, z2), back)


def interval_sq(pred: Tensor, lb, ub) -> Tensor:
    """Elementwise squared distance from ``pred`` to the interval ``[lb, ub]``."""
    lb = np.asarray(lb, dtype=pred.dtype).reshape(pred.shape)
    ub = np.asarray(ub, dtype=pred.dtype).reshape(pred.shape)
    p = pred.value
    _pattern(p > ub, p < lb)
    gap = np.where(p > ub, p - ub, np.where(p < lb, p - lb, 0)).astype(pred.dtype, copy=False)
    return _emit(gap * gap, (pred,), lambda g: (2 * gap * g,))


def mean(a: Tensor) -> Tensor:
    n = a.value.size
    return _emit(np.array([[a.value.sum() / n]], dtype=a.dtype), (a,), lambda g: (np.full(a.shape, g[0, 0] / n, dtype=a.dtype),))


def total(a: Tensor) -> Tensor:
    return _emit(np.array([[a.value.sum()]], dtype=a.dtype), (a,), lambda g: (np.full(a.shape, g[0, 0], dtype=a.dtype),))
