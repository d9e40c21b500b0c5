"""From self-expression matrix to cluster labels.

The affinity is ``(|C| + |C'|) / 2`` with a zeroed diagonal; the enhanced
variant first keeps, per column, only the largest-magnitude entries covering
an ``energy_fraction`` share of the column's absolute mass, then raises the
symmetrized affinity to an elementwise power. With ``energy_fraction=1`` and
``power=1`` the enhanced variant reduces exactly to the plain rule.

Spectral clustering embeds samples with the k bottom eigenvectors of the
symmetric normalized Laplacian ``I - D^{-1/2} A D^{-1/2}``, row-normalizes
the embedding, and runs k-means with restarts.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ShapeError
from .linalg import kmeans, sym_eig

__all__ = ["AffinityOptions", "affinity_plain", "affinity_enhanced", "spectral_cluster"]

_ZERO_DEGREE = 1e-12


@dataclass
class AffinityOptions:
    mode: str = "plain"
    energy_fraction: float = 1.0
    power: float = 1.0

    def validate(self):
        if self.mode not in ("plain", "enhanced"):
            raise ValueError(f"affinity mode must be 'plain' or 'enhanced', got {self.mode!r}")
        if not 0.0 < self.energy_fraction <= 1.0:
            raise ValueError("energy_fraction must be in (0, 1]")
        if self.power <= 0.0:
            raise ValueError("power must be > 0")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d).validate()


def _check_square(c):
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ShapeError(f"affinity wants a square matrix, got shape {c.shape}")
    return c


def affinity_plain(c):
    """``(|C| + |C'|) / 2`` with a zeroed diagonal; exactly symmetric."""
    c = _check_square(c)
    a = (np.abs(c) + np.abs(c.T)) / 2.0
    np.fill_diagonal(a, 0.0)
    return a


def affinity_enhanced(c, opts):
    """Column-thresholded, power-sharpened affinity."""
    opts.validate()
    c = _check_square(c)
    mag = np.abs(c)
    kept = c.copy()
    for j in range(c.shape[1]):
        order = np.argsort(-mag[:, j], kind="stable")
        csum = np.cumsum(mag[order, j])
        total = csum[-1]
        if total == 0.0:
            continue
        cut = int(np.searchsorted(csum, opts.energy_fraction * total, side="left"))
        kept[order[cut + 1 :], j] = 0.0
    a = (np.abs(kept) + np.abs(kept.T)) / 2.0
    np.fill_diagonal(a, 0.0)
    if opts.power != 1.0:
        a = a**opts.power
    return a


def affinity_from_options(c, opts):
    if opts.mode == "plain":
        return affinity_plain(c)
    return affinity_enhanced(c, opts)


def spectral_cluster(a, k, seed=None, restarts=20):
    """Normalized spectral clustering of a nonnegative symmetric affinity.

    Zero-degree samples get a tiny degree instead of raising: a fully
    disconnected sample is a data condition. Deterministic given the seed.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"spectral clustering wants a square affinity, got {a.shape}")
    n = a.shape[0]
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} samples")
    if not np.any(a):
        raise ValueError("affinity is identically zero")
    deg = a.sum(axis=1)
    deg = np.where(deg == 0.0, _ZERO_DEGREE, deg)
    dinv = 1.0 / np.sqrt(deg)
    lap = np.eye(n) - dinv[:, None] * a * dinv[None, :]
    _, vecs = sym_eig(lap, k, which="smallest")
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    embedding = np.where(norms > 0.0, vecs / np.where(norms == 0.0, 1.0, norms), 0.0)
    labels, _ = kmeans(embedding, k, restarts=restarts, seed=seed)
    return labels
