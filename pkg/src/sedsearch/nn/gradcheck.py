"""Central finite-difference check of tape gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autograd as ag


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    excluded: int
    worst: tuple[int, tuple[int, int]] | None = None
    errors: list[float] = field(default_factory=list, repr=False)

    def passed(self, tolerance: float) -> bool:
        return self.checked > 0 and self.max_rel_error < tolerance


class _PatternRecorder:
    """Collects the on/off pattern of every piecewise op during one evaluation."""

    def __init__(self):
        self.masks: list[bytes] = []

    def __enter__(self):
        ag._PATTERN_SINKS.append(self)
        return self

    def __exit__(self, *exc):
        ag._PATTERN_SINKS.remove(self)

    def signature(self) -> tuple[bytes, ...]:
        return tuple(self.masks)


def _evaluate(f, params):
    with _PatternRecorder() as rec:
        val = f(params).item()
    return val, rec.signature()


def grad_check(
    f: Callable[[Sequence[ag.Tensor]], ag.Tensor],
    params: Sequence[ag.Tensor],
    epsilon: float = 1e-4,
    floor: float = 1e-6,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare tape gradients of scalar ``f(params)`` with central differences.

    Coordinates whose +/- ``epsilon`` perturbation changes any ReLU (or
    interval-loss) activation pattern sit on a kink and are excluded.  The
    relative error is ``|analytic - numeric| / max(|analytic|, |numeric|, floor * g)``
    where ``g`` is the largest analytic gradient entry (at least 1), so
    round-off at coordinates whose true gradient is 0 is measured against
    the gradient scale rather than against an absolute constant.
    ``max_coords`` samples that many coordinates per tensor.
    """
    for p in params:
        p.requires_grad = True
        p.zero_grad()
    with ag.Tape() as tape:
        loss = f(params)
    tape.backward(loss)
    analytic = [np.zeros_like(p.value) if p.grad is None else p.grad.copy() for p in params]
    _, base_sig = _evaluate(f, params)
    grad_scale = max([1.0] + [float(np.abs(a).max()) for a in analytic if a.size])
    denom_floor = floor * grad_scale

    worst_err, worst_at = 0.0, None
    errors: list[float] = []
    checked = excluded = 0
    for ti, p in enumerate(params):
        coords = list(np.ndindex(p.shape))
        if max_coords is not None and len(coords) > max_coords:
            rng = rng or np.random.default_rng(0)
            pick = rng.choice(len(coords), size=max_coords, replace=False)
            coords = [coords[i] for i in sorted(pick)]
        for idx in coords:
            old = p.value[idx]
            p.value[idx] = old + epsilon
            fp, sig_p = _evaluate(f, params)
            p.value[idx] = old - epsilon
            fm, sig_m = _evaluate(f, params)
            p.value[idx] = old
            if sig_p != base_sig or sig_m != base_sig:
                excluded += 1
                continue
            numeric = (fp - fm) / (2 * epsilon)
            a = float(analytic[ti][idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), denom_floor)
            errors.append(err)
            checked += 1
            if err > worst_err:
                worst_err, worst_at = err, (ti, idx)
    return GradCheckReport(worst_err, checked, excluded, worst_at, errors)
