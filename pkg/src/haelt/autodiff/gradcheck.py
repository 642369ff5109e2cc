"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Graph, Tensor, backward


def numerical_gradient(fn: Callable[[], Tensor], param: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar ``fn()`` w.r.t. every element of ``param``."""
    value = param.value
    grad = np.zeros_like(value)
    # index in place: reshape(-1) would silently copy a non-contiguous array
    for idx in np.ndindex(value.shape):
        orig = value[idx]
        value[idx] = orig + h
        up = float(fn().value.reshape(-1)[0])
        value[idx] = orig - h
        down = float(fn().value.reshape(-1)[0])
        value[idx] = orig
        grad[idx] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Max elementwise relative error; pairs below ``floor`` are compared absolutely."""
    a = np.asarray(analytic, dtype=float).ravel()
    n = np.asarray(numeric, dtype=float).ravel()
    scale = np.maximum(np.abs(a), np.abs(n))
    err = np.abs(a - n)
    small = scale < floor
    rel = np.where(small, err / floor, err / np.where(small, 1.0, scale))
    return float(rel.max()) if rel.size else 0.0


def gradient_check(fn: Callable[[], Tensor], params: Sequence[Tensor],
                   h: float = 1e-5) -> dict[str, float]:
    """Compare autodiff gradients of ``fn`` with central differences.

    ``fn`` must build its graph from ``params`` and return a scalar tensor. The
    result maps each parameter label to its max relative error.
    """
    with Graph():
        loss = fn()
        grads = backward(loss)
    report = {}
    for i, p in enumerate(params):
        analytic = grads.get(p, np.zeros_like(p.value))
        report[p.name or f"param[{i}]"] = relative_error(analytic, numerical_gradient(fn, p, h))
    return report
