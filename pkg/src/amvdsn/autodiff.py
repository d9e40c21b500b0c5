"""Reverse-mode automatic differentiation over dense float64 matrices.

A ``Tape`` records every primitive operation applied during a forward pass.
``Tape.backward`` on a scalar result replays the recorded operations in
reverse order, accumulating gradients into every variable; fan-out (a value
consumed by several downstream operations) therefore sums contributions,
and leaves never touched by the loss keep a zero gradient.

Each tape is single use: one forward pass followed by at most one backward
pass. Values are plain 2-D ``numpy`` arrays; column vectors are stored as
``(n, 1)`` matrices and scalars as ``(1, 1)``.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

__all__ = ["Var", "Tape", "as_matrix", "softmax_stable"]


def as_matrix(value):
    """Coerce ``value`` to a 2-D float64 array; 1-D input becomes a column."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"expected a matrix, got an array with ndim={arr.ndim}")
    return arr


def softmax_stable(scores):
    """Softmax of a score vector, computed by subtracting the max before exp.

    The shift makes the result invariant to adding a constant to all scores
    and keeps the exponentials bounded. Output entries are positive and sum
    to one.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    if s.size == 0:
        raise ValueError("softmax of an empty score vector")
    if not np.all(np.isfinite(s)):
        raise ValueError("softmax scores must be finite")
    e = np.exp(s - s.max())
    return e / e.sum()


class Var:
    """A node of the computation graph: a value plus its accumulated gradient."""

    __slots__ = ("value", "grad", "name", "trainable")

    def __init__(self, value, name=None, trainable=False):
        self.value = value
        self.grad = None
        self.name = name
        self.trainable = trainable

    @property
    def shape(self):
        return self.value.shape

    def item(self):
        if self.value.size != 1:
            raise ValueError(f"item() on a non-scalar node of shape {self.shape}")
        return float(self.value[0, 0])

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    def __repr__(self):
        tag = self.name or "var"
        return f"Var({tag}, shape={self.shape})"


class Tape:
    """Ordered record of primitive operations; replayed backward exactly once."""

    def __init__(self):
        self._records = []  # (op_name, backward_closure)
        self._vars = []
        self._leaves = []
        self._used = False

    def __len__(self):
        return len(self._records)

    @property
    def operations(self):
        """Names of the recorded operations, in forward order."""
        return [name for name, _ in self._records]

    # -- node creation -------------------------------------------------------

    def leaf(self, value, name=None):
        """Register a trainable leaf; ``backward`` reports a gradient for it."""
        v = Var(as_matrix(value), name=name, trainable=True)
        self._vars.append(v)
        self._leaves.append(v)
        return v

    def constant(self, value, name=None):
        """Register a non-trainable input."""
        v = Var(as_matrix(value), name=name, trainable=False)
        self._vars.append(v)
        return v

    def _record(self, value, op_name, make_backward):
        out = Var(value)
        self._vars.append(out)
        self._records.append((op_name, make_backward(out)))
        return out

    # -- primitives ------------------------------------------------------------

    def matmul(self, a, b):
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul shape mismatch: {a.shape} by {b.shape}")

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                a._accumulate(g @ b.value.T)
                b._accumulate(a.value.T @ g)

            return backward

        return self._record(a.value @ b.value, "matmul", make)

    def affine(self, w, x):
        """``w[:, :-1] @ x + w[:, -1:]``, i.e. one layer block applied to [x; 1]."""
        if w.shape[1] != x.shape[0] + 1:
            raise ShapeError(f"affine shape mismatch: block {w.shape} on input {x.shape}")
        value = w.value[:, :-1] @ x.value + w.value[:, -1:]

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                gw = np.empty_like(w.value)
                gw[:, :-1] = g @ x.value.T
                gw[:, -1] = g.sum(axis=1)
                w._accumulate(gw)
                x._accumulate(w.value[:, :-1].T @ g)

            return backward

        return self._record(value, "affine", make)

    def add(self, a, b):
        if a.shape != b.shape:
            raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                a._accumulate(g)
                b._accumulate(g)

            return backward

        return self._record(a.value + b.value, "add", make)

    def sub(self, a, b):
        if a.shape != b.shape:
            raise ShapeError(f"sub shape mismatch: {a.shape} vs {b.shape}")

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                a._accumulate(g)
                b._accumulate(-g)

            return backward

        return self._record(a.value - b.value, "sub", make)

    def mul(self, a, b):
        """Elementwise product of same-shape matrices."""
        if a.shape != b.shape:
            raise ShapeError(f"mul shape mismatch: {a.shape} vs {b.shape}")

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                a._accumulate(g * b.value)
                b._accumulate(g * a.value)

            return backward

        return self._record(a.value * b.value, "mul", make)

    def scale(self, a, c):
        """Multiply by a Python scalar constant (works for matrices and scalars)."""
        c = float(c)

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                a._accumulate(g * c)

            return backward

        return self._record(a.value * c, "scale", make)

    def scale_columns(self, m, r):
        """Scale column ``n`` of ``m`` by entry ``n`` of the row vector ``r`` (1 x N)."""
        if r.shape[0] != 1 or r.shape[1] != m.shape[1]:
            raise ShapeError(f"scale_columns wants a 1x{m.shape[1]} row, got {r.shape}")

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                m._accumulate(g * r.value)
                r._accumulate((g * m.value).sum(axis=0, keepdims=True))

            return backward

        return self._record(m.value * r.value, "scale_columns", make)

    def transpose(self, a):
        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                a._accumulate(g.T)

            return backward

        return self._record(a.value.T.copy(), "transpose", make)

    def concat_rows(self, parts):
        """Stack matrices vertically; all operands must share a column count."""
        parts = list(parts)
        if not parts:
            raise ValueError("concat_rows of an empty sequence")
        cols = parts[0].shape[1]
        for p in parts:
            if p.shape[1] != cols:
                raise ShapeError(f"concat_rows column mismatch: {p.shape} vs {cols} columns")
        offsets = np.cumsum([0] + [p.shape[0] for p in parts])

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                    p._accumulate(g[lo:hi])

            return backward

        return self._record(np.concatenate([p.value for p in parts], axis=0), "concat_rows", make)

    def take_row(self, a, i):
        if not 0 <= i < a.shape[0]:
            raise ShapeError(f"take_row index {i} out of range for {a.shape}")

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                if a.grad is None:
                    a.grad = np.zeros_like(a.value)
                a.grad[i : i + 1] += g

            return backward

        return self._record(a.value[i : i + 1].copy(), "take_row", make)

    def relu(self, x):
        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                x._accumulate(g * (x.value > 0.0))

            return backward

        return self._record(np.maximum(x.value, 0.0), "relu", make)

    def tanh(self, x):
        t = np.tanh(x.value)

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                x._accumulate(g * (1.0 - t * t))

            return backward

        return self._record(t, "tanh", make)

    def softmax_columns(self, s):
        """Column-wise stable softmax: each column becomes a probability vector."""
        shifted = s.value - s.value.max(axis=0, keepdims=True)
        e = np.exp(shifted)
        p = e / e.sum(axis=0, keepdims=True)

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                s._accumulate(p * (g - (g * p).sum(axis=0, keepdims=True)))

            return backward

        return self._record(p, "softmax_columns", make)

    def zero_diag(self, c):
        """Copy with a zeroed diagonal.

        The mask is not differentiated through: the diagonal of ``c`` receives
        no gradient from any path that goes through this operation.
        """
        if c.shape[0] != c.shape[1]:
            raise ShapeError(f"zero_diag wants a square matrix, got {c.shape}")
        value = c.value.copy()
        np.fill_diagonal(value, 0.0)

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                gm = g.copy()
                np.fill_diagonal(gm, 0.0)
                c._accumulate(gm)

            return backward

        return self._record(value, "zero_diag", make)

    def total_sum(self, x):
        """Sum of all entries, as a 1x1 scalar node."""

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                x._accumulate(np.full_like(x.value, g[0, 0]))

            return backward

        return self._record(np.array([[float(x.value.sum())]]), "total_sum", make)

    def frob2(self, x):
        """Squared Frobenius norm as a 1x1 scalar node."""

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                x._accumulate((2.0 * g[0, 0]) * x.value)

            return backward

        return self._record(np.array([[float(np.sum(x.value * x.value))]]), "frob2", make)

    def abs_sum(self, x):
        """Entrywise absolute sum (l1) as a 1x1 scalar node; subgradient 0 at 0."""

        def make(out):
            def backward():
                g = out.grad
                if g is None:
                    return
                x._accumulate(g[0, 0] * np.sign(x.value))

            return backward

        return self._record(np.array([[float(np.abs(x.value).sum())]]), "abs_sum", make)

    # -- reverse pass ------------------------------------------------------------

    def backward(self, loss):
        """Replay the tape in reverse from a scalar ``loss`` node.

        Returns a dict mapping each named trainable leaf to its gradient;
        leaves the loss never touched map to zeros of the right shape. All
        variables also carry their gradient in ``.grad`` afterwards.
        """
        if self._used:
            raise RuntimeError("tape already replayed; build a new tape per forward pass")
        if loss.value.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        self._used = True
        for v in self._vars:
            v.grad = None
        loss.grad = np.ones((1, 1))
        for _, backward in reversed(self._records):
            backward()
        grads = {}
        for leaf in self._leaves:
            if leaf.grad is None:
                leaf.grad = np.zeros_like(leaf.value)
            if leaf.name is not None:
                grads[leaf.name] = leaf.grad
        return grads
