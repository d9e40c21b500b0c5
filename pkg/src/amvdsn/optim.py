"""Optimizer update rules: Adam with bias correction, and plain SGD.

Both operate on dicts mapping tensor names to float64 arrays, matching the
gradient dicts produced by ``Tape.backward``. Updates are deterministic
functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

__all__ = ["AdamState", "adam_step", "sgd_step"]


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def _check_shapes(params, grads, state=None):
    for name, p in params.items():
        if name not in grads:
            raise ShapeError(f"missing gradient for parameter '{name}'")
        if grads[name].shape != p.shape:
            raise ShapeError(
                f"gradient shape {grads[name].shape} does not match parameter "
                f"'{name}' of shape {p.shape}"
            )
        if state is not None and name in state.m and state.m[name].shape != p.shape:
            raise ShapeError(f"stale optimizer state for '{name}'")


def adam_step(params, grads, state):
    """One Adam update with bias correction; epsilon is added outside the sqrt.

    Mutates ``params`` entries (rebinding new arrays) and ``state`` in place,
    and returns both for convenience.
    """
    _check_shapes(params, grads, state)
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        params[name] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def sgd_step(params, grads, lr):
    """Plain full-batch gradient descent update."""
    _check_shapes(params, grads)
    for name, p in params.items():
        params[name] = p - lr * grads[name]
    return params
