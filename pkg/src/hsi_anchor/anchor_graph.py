"""Adaptive-neighbor anchor graphs and the matrices derived from them.

Each pixel is linked to its ``k`` nearest anchors with weights that solve a
simplex-constrained quadratic problem in closed form::

    min_{p >= 0, sum p = 1}  sum_j e_j p_j + gamma * ||p||^2

where ``e_j`` is the squared distance to anchor ``j``. Choosing
``gamma = k/2 e_(k+1) - 1/2 sum_{j<=k} e_(j)`` makes exactly the ``k``
nearest anchors active and gives

    p_j = (e_(k+1) - e_j) / sum_{j'<=k} (e_(k+1) - e_(j')).

The stacked rows form the sparse ``n x m`` matrix ``P``. With
``Lambda = diag(P^T 1)``, ``S = P Lambda^-1 P^T`` is symmetric, doubly
stochastic and PSD, so its Laplacian is ``I - S`` and the anchor-space
Laplacian ``P^T (I - S) P`` collapses to ``Z - Z Lambda^-1 Z`` with
``Z = P^T P``.
"""
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .anchors import sq_distances

__all__ = [
    "AnchorGraph",
    "DenseCapExceeded",
    "anchor_distances",
    "neighbor_gamma",
    "adaptive_weights",
    "build_graph",
    "normalized_adjacency",
    "reduced_laplacian",
    "dump_coo",
]

DENSE_CAP = 2048
_CHUNK = 2048


class DenseCapExceeded(ValueError):
    """An n x n matrix was requested for a graph larger than the dense cap."""


@dataclass(frozen=True)
class AnchorGraph:
    P: sparse.csr_matrix
    k: int
    lambda_diag: np.ndarray

    @property
    def n(self):
        return self.P.shape[0]

    @property
    def m(self):
        return self.P.shape[1]

    @property
    def active(self):
        """Mask of anchors with nonzero mass; the rest are pruned before inversion."""
        return self.lambda_diag > 0

    @property
    def n_pruned(self):
        return int((~self.active).sum())

    def row(self, i):
        lo, hi = self.P.indptr[i], self.P.indptr[i + 1]
        return self.P.indices[lo:hi], self.P.data[lo:hi]


def anchor_distances(x, anchors):
    """Squared Euclidean distance from one feature vector to every anchor."""
    U = np.asarray(getattr(anchors, "vectors", anchors), dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != U.shape[1]:
        raise ValueError(f"vector of dimension {x.shape} does not match anchors of dimension {U.shape[1]}")
    return ((U - x) ** 2).sum(axis=1)


def _check_k(k, m):
    if not 1 <= k <= m - 1:
        raise ValueError(f"k must lie in [1, m-1] = [1, {m - 1}], got {k}")


def _nearest(e, k):
    # stable sort keeps anchor-index order among equal distances
    return np.argsort(e, kind="stable")[: k + 1]


def neighbor_gamma(e, k):
    """Regularization weight that leaves exactly ``k`` active anchors."""
    e = np.asarray(e, dtype=np.float64)
    _check_k(k, e.shape[0])
    s = e[_nearest(e, k)]
    return 0.5 * k * s[k] - 0.5 * s[:k].sum()


def _row_weights(s, k):
    """Closed-form weights for ascending distances ``s`` of length k+1."""
    num = s[..., k:k + 1] - s[..., :k]
    den = num.sum(axis=-1, keepdims=True)
    # all k+1 nearest equidistant: the formula is 0/0, use the symmetric limit
    safe = np.where(den > 0, den, 1.0)
    return np.where(den > 0, num / safe, 1.0 / k)


def adaptive_weights(e, k):
    """Dense length-m weight row for squared anchor distances ``e``.

    Examples
    --------
    >>> adaptive_weights([1.0, 2.0, 4.0, 9.0], 2)
    array([0.6, 0.4, 0. , 0. ])
    """
    e = np.asarray(e, dtype=np.float64)
    if e.ndim != 1:
        raise ValueError("expected a single row of distances")
    _check_k(k, e.shape[0])
    if not np.all(np.isfinite(e)) or e.min() < 0:
        raise ValueError("distances must be finite and nonnegative")
    idx = _nearest(e, k)
    w = np.zeros_like(e)
    w[idx[:k]] = _row_weights(e[idx], k)
    return w


def build_graph(features, anchors, k=5):
    """Anchor graph ``P`` linking every feature row to its ``k`` nearest anchors.

    Parameters
    ----------
    features : FeatureMatrix or ndarray of shape (n, d)
    anchors : AnchorSet or ndarray of shape (m, d)
    k : int
        Active anchors per row, ``1 <= k <= m - 1``.

    Returns
    -------
    AnchorGraph
    """
    X = np.asarray(getattr(features, "values", features), dtype=np.float64)
    U = np.asarray(getattr(anchors, "vectors", anchors), dtype=np.float64)
    if X.shape[1] != U.shape[1]:
        raise ValueError(f"features have {X.shape[1]} columns, anchors {U.shape[1]}")
    n, m = X.shape[0], U.shape[0]
    _check_k(k, m)
    cols = np.empty((n, k), dtype=np.int64)
    vals = np.empty((n, k))
    for start in range(0, n, _CHUNK):
        xb = X[start:start + _CHUNK]
        cand = np.argsort(sq_distances(xb, U), axis=1, kind="stable")[:, : k + 1]
        # recompute candidate distances directly; the expanded form loses exact zeros
        exact = ((xb[:, None, :] - U[cand]) ** 2).sum(axis=2)
        order = np.lexsort((cand, exact), axis=1)
        cand = np.take_along_axis(cand, order, axis=1)
        exact = np.take_along_axis(exact, order, axis=1)
        cols[start:start + _CHUNK] = cand[:, :k]
        vals[start:start + _CHUNK] = _row_weights(exact, k)
    indptr = np.arange(0, n * k + 1, k)
    P = sparse.csr_matrix((vals.ravel(), cols.ravel(), indptr), shape=(n, m))
    P.sort_indices()
    P.eliminate_zeros()
    lam = np.asarray(P.sum(axis=0)).ravel()
    return AnchorGraph(P, k, lam)


def _inverse_mass(graph):
    lam = graph.lambda_diag
    return np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), 0.0)


def normalized_adjacency(graph, cap=DENSE_CAP):
    """Dense ``S = P Lambda^-1 P^T`` over the anchors with nonzero mass."""
    if graph.n > cap:
        raise DenseCapExceeded(
            f"n={graph.n} exceeds the dense cap {cap}; use reduced_laplacian instead"
        )
    active = graph.active
    Pa = graph.P[:, np.flatnonzero(active)].toarray()
    S = (Pa / graph.lambda_diag[active]) @ Pa.T
    return 0.5 * (S + S.T)


def reduced_laplacian(graph):
    """``m x m`` anchor Laplacian ``Z - Z Lambda^-1 Z`` with ``Z = P^T P``.

    Rows and columns of pruned (zero-mass) anchors are identically zero.
    """
    Z = (graph.P.T @ graph.P).toarray()
    L = Z - (Z * _inverse_mass(graph)) @ Z
    return 0.5 * (L + L.T)


def dump_coo(graph, path):
    """Write ``P`` as ``i j p_ij`` lines for inspection."""
    coo = graph.P.tocoo()
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
