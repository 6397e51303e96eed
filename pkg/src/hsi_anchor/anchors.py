"""Anchor generation by k-means."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

__all__ = ["AnchorSet", "kmeans_anchors", "default_anchor_count", "sq_distances", "random_anchors"]

_CHUNK = 4096


@dataclass(frozen=True)
class AnchorSet:
    vectors: np.ndarray
    inertia: float
    n_iter: int = 0
    inertia_history: tuple = field(default=(), repr=False)

    @property
    def m(self):
        return self.vectors.shape[0]


def default_anchor_count(n):
    return max(1, min(1000, math.ceil(n / 10)))


def sq_distances(X, C, x_norms=None):
    """Squared Euclidean distances between rows of ``X`` and rows of ``C``.

    ``x_norms`` optionally supplies the precomputed squared row norms of ``X``.
    """
    X = np.asarray(X, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if x_norms is None:
        x_norms = np.einsum("ij,ij->i", X, X)
    d = x_norms[:, None] - 2.0 * (X @ C.T) + np.einsum("ij,ij->i", C, C)[None, :]
    return np.maximum(d, 0.0)


def _assign(X, C, x_norms):
    labels = np.empty(X.shape[0], dtype=np.int64)
    dists = np.empty(X.shape[0])
    for start in range(0, X.shape[0], _CHUNK):
        stop = start + _CHUNK
        D = sq_distances(X[start:stop], C, x_norms[start:stop])
        lab = D.argmin(axis=1)
        labels[start:start + _CHUNK] = lab
        dists[start:start + _CHUNK] = D[np.arange(len(lab)), lab]
    return labels, dists


def _kmeanspp(X, m, rng, x_norms):
    n = X.shape[0]
    centers = np.empty((m, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = sq_distances(X, centers[:1], x_norms)[:, 0]
    for t in range(1, m):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            idx = int(rng.integers(n))
        centers[t] = X[idx]
        closest = np.minimum(closest, sq_distances(X, centers[t:t + 1], x_norms)[:, 0])
    return centers


def _centroids(X, labels, m):
    # one-hot CSR product: each row sums its members in index order
    n = X.shape[0]
    onehot = sparse.csr_matrix((np.ones(n), (labels, np.arange(n))), shape=(m, n))
    sums = onehot @ X
    counts = np.bincount(labels, minlength=m)
    return sums, counts


def kmeans_anchors(features, m, seed=0, max_iter=100, tol=1e-4):
    """Cluster the rows of ``features`` into ``m`` anchors.

    k-means++ seeding followed by Lloyd iterations. Stops when the summed
    squared centroid shift drops below ``tol`` times the mean per-column
    variance, or after ``max_iter`` iterations. A cluster that empties is
    re-seeded at the point currently farthest from its own centroid.

    Parameters
    ----------
    features : FeatureMatrix or ndarray of shape (n, d)
    m : int
        Number of anchors, ``1 <= m <= n``.
    seed : int
    max_iter : int
    tol : float

    Returns
    -------
    AnchorSet
        ``inertia_history`` holds the within-cluster sum of squares measured
        at every assignment step; it never increases.
    """
    X = np.asarray(getattr(features, "values", features), dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot cluster an empty feature matrix")
    if not 1 <= m <= n:
        raise ValueError(f"anchor count must lie in [1, {n}], got {m}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    rng = np.random.default_rng(seed)
    x_norms = np.einsum("ij,ij->i", X, X)
    centers = _kmeanspp(X, m, rng, x_norms)
    threshold = tol * float(X.var(axis=0).mean())

    labels, dists = _assign(X, centers, x_norms)
    history = [float(dists.sum())]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        sums, counts = _centroids(X, labels, m)
        new = centers.copy()
        full = counts > 0
        new[full] = sums[full] / counts[full, None]
        empty = np.flatnonzero(~full)
        if empty.size:
            order = np.argsort(-dists, kind="stable")
            for c, idx in zip(empty, order):
                new[c] = X[idx]
        shift = float(((new - centers) ** 2).sum())
        centers = new
        labels, dists = _assign(X, centers, x_norms)
        history.append(float(dists.sum()))
        if shift <= threshold:
            break
    return AnchorSet(centers, history[-1], n_iter, tuple(history))


def random_anchors(features, m, seed=0):
    """Uniformly sampled data rows as anchors; a baseline for tests."""
    X = np.asarray(getattr(features, "values", features), dtype=np.float64)
    if not 1 <= m <= X.shape[0]:
        raise ValueError(f"anchor count must lie in [1, {X.shape[0]}], got {m}")
    idx = np.sort(np.random.default_rng(seed).choice(X.shape[0], size=m, replace=False))
    V = X[idx]
    return AnchorSet(V, float(_assign(X, V, np.einsum("ij,ij->i", X, X))[1].sum()))
