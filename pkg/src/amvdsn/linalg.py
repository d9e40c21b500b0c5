"""Symmetric eigensolver and k-means, the backends of spectral clustering."""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError

__all__ = ["sym_eig", "kmeans"]

_SYMMETRY_TOL = 1e-10
_RESIDUAL_REL = 1e-8


def sym_eig(a, k, which="smallest"):
    """Eigenpairs of a symmetric matrix.

    Parameters
    ----------
    a : array-like, shape (n, n)
        Symmetric within 1e-10; it is symmetrized internally before solving.
    k : int
        Number of eigenpairs to return, 1 <= k <= n.
    which : {"smallest", "largest"}
        Which end of the spectrum; eigenvalues come back sorted accordingly
        (ascending for "smallest", descending for "largest").

    Returns
    -------
    w : ndarray, shape (k,)
    v : ndarray, shape (n, k)
        Orthonormal eigenvectors as columns, satisfying
        ``||a @ v - w * v|| <= 1e-8 * ||a||_F``.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"sym_eig wants a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for a {n}x{n} matrix")
    if which not in ("smallest", "largest"):
        raise ValueError(f"unknown which={which!r}")
    asym = float(np.abs(a - a.T).max()) if n else 0.0
    if asym > _SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric: max |a - a.T| = {asym:.3e}")
    s = (a + a.T) / 2.0
    try:
        w, v = np.linalg.eigh(s)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"symmetric eigensolver failed to converge: {exc}") from exc
    if which == "smallest":
        w, v = w[:k], v[:, :k]
    else:
        w, v = w[::-1][:k].copy(), v[:, ::-1][:, :k].copy()
    a_norm = float(np.linalg.norm(a, "fro"))
    residual = float(np.linalg.norm(a @ v - v * w, axis=0).max()) if k else 0.0
    if residual > _RESIDUAL_REL * a_norm:
        raise NumericError(
            f"eigenpair residual {residual:.3e} exceeds {_RESIDUAL_REL:.0e} * ||a||_F = "
            f"{_RESIDUAL_REL * a_norm:.3e}"
        )
    return w, v


def _squared_distances(points, centers):
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeans_pp(points, k, rng):
    """k-means++ seeding; degenerate all-zero distance mass falls back to
    picking an unchosen point uniformly."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            remaining = np.setdiff1d(np.arange(n), np.array(chosen))
            pool = remaining if remaining.size else np.arange(n)
            idx = int(pool[rng.integers(pool.size)])
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def _lloyd(points, k, rng, max_iter=300, tol=1e-9):
    n = points.shape[0]
    centers = _kmeans_pp(points, k, rng)
    labels = np.zeros(n, dtype=np.intp)
    for _ in range(max_iter):
        d2 = _squared_distances(points, centers)
        labels = d2.argmin(axis=1)
        # repair empty clusters with the point farthest from its own center
        counts = np.bincount(labels, minlength=k)
        if (counts == 0).any():
            point_cost = d2[np.arange(n), labels]
            moved = set()
            for c in np.flatnonzero(counts == 0):
                order = np.argsort(-point_cost, kind="stable")
                pick = next(i for i in order if int(i) not in moved and counts[labels[i]] > 1)
                counts[labels[pick]] -= 1
                labels[pick] = c
                counts[c] += 1
                moved.add(int(pick))
                point_cost[pick] = -1.0
        new_centers = np.empty_like(centers)
        for c in range(k):
            new_centers[c] = points[labels == c].mean(axis=0)
        shift = float(np.linalg.norm(new_centers - centers, axis=1).max())
        centers = new_centers
        if shift < tol:
            break
    inertia = float(((points - centers[labels]) ** 2).sum())
    return labels, inertia


def kmeans(points, k, restarts=1, seed=None):
    """Lloyd's algorithm with k-means++ seeding, best inertia over restarts.

    ``points`` holds one sample per row. Restarts consume a single seeded
    random stream sequentially, so adding restarts can only improve (never
    worsen) the returned inertia for a fixed seed.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeError(f"kmeans wants rows-as-points, got shape {points.shape}")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for {n} points")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        labels, inertia = _lloyd(points, k, rng)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels, best_inertia
