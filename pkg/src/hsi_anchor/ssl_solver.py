"""Closed-form label propagation on anchor graphs, plus a full-graph reference.

The anchor path minimizes over the ``m x c`` anchor label matrix ``F_u``::

    ||P_l F_u - Y_l||_F^2 + alpha * Tr(F_u^T L_A F_u)

whose minimizer is ``(P_l^T P_l + alpha L_A)^-1 P_l^T Y_l``. Pixel scores are
``P F_u`` and each pixel takes the class with the largest score.
"""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .anchor_graph import DENSE_CAP, reduced_laplacian

__all__ = [
    "LabeledSet",
    "SslSolution",
    "SingularSystemError",
    "RIDGE",
    "solve_anchor_ssl",
    "objective_value",
    "objective_gradient",
    "predict",
    "solve_full_graph_reference",
]

RIDGE = 1e-10


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class LabeledSet:
    """Training pixels and their one-hot targets (column j is class j+1)."""

    indices: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        Y = np.asarray(self.Y, dtype=np.float64)
        if Y.ndim != 2 or Y.shape[0] != idx.shape[0]:
            raise ValueError("Y must have one row per labeled index")
        if len(np.unique(idx)) != len(idx):
            raise ValueError("labeled indices must be distinct")
        if Y.size and not (np.all((Y == 0) | (Y == 1)) and np.all(Y.sum(axis=1) == 1)):
            raise ValueError("every row of Y must be one-hot")
        missing = np.flatnonzero(Y.sum(axis=0) == 0) + 1
        if missing.size:
            warnings.warn(f"classes without labeled pixels: {missing.tolist()}", stacklevel=3)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "Y", Y)

    @classmethod
    def from_labels(cls, indices, labels, n_classes=None):
        """Build from class ids in ``1..c``."""
        labels = np.asarray(labels, dtype=np.int64)
        c = int(labels.max()) if n_classes is None else n_classes
        if labels.size and (labels.min() < 1 or labels.max() > c):
            raise ValueError(f"labels must lie in 1..{c}")
        Y = np.zeros((len(labels), c))
        Y[np.arange(len(labels)), labels - 1] = 1.0
        return cls(indices, Y)

    @property
    def n_classes(self):
        return self.Y.shape[1]

    @property
    def labels(self):
        return self.Y.argmax(axis=1) + 1


@dataclass(frozen=True)
class SslSolution:
    F_u: np.ndarray
    soft_scores: np.ndarray
    hard_labels: np.ndarray
    alpha: float
    ridge_used: float


def _check_labeled(graph, labeled):
    if labeled.indices.size and (labeled.indices.min() < 0 or labeled.indices.max() >= graph.n):
        raise ValueError(f"labeled indices must lie in [0, {graph.n})")


def _labeled_rows(graph, labeled):
    _check_labeled(graph, labeled)
    return graph.P[labeled.indices]


def solve_anchor_ssl(graph, labeled, alpha=0.01, ridge=RIDGE, L_A=None):
    """Anchor soft labels ``F_u`` in closed form, with pixel predictions.

    Parameters
    ----------
    graph : AnchorGraph
    labeled : LabeledSet
    alpha : float
        Weight of the graph smoothness term, > 0.
    ridge : float
        Added to the diagonal so the PSD system is positive definite.
    L_A : ndarray, optional
        Precomputed ``reduced_laplacian(graph)``.

    Raises
    ------
    SingularSystemError
        When the ridged system still fails to factor.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    Pl = _labeled_rows(graph, labeled)
    if L_A is None:
        L_A = reduced_laplacian(graph)
    if L_A.shape != (graph.m, graph.m):
        raise ValueError("L_A does not match the graph")
    A = (Pl.T @ Pl).toarray() + alpha * L_A
    A[np.diag_indices_from(A)] += ridge
    B = Pl.T @ labeled.Y
    try:
        F_u = linalg.cho_solve(linalg.cho_factor(A, lower=True), B)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(
            "anchor system is singular even after ridge; some anchor block "
            "carries no labels and no graph coupling"
        ) from exc
    if not np.all(np.isfinite(F_u)):
        raise SingularSystemError("anchor solve produced non-finite values")
    soft, hard = predict(graph, F_u)
    return SslSolution(F_u, soft, hard, float(alpha), float(ridge))


def objective_value(graph, labeled, F_u, alpha, L_A=None):
    """``||P_l F_u - Y_l||_F^2 + alpha * Tr(F_u^T L_A F_u)``."""
    F_u = np.asarray(F_u, dtype=np.float64)
    if F_u.shape != (graph.m, labeled.n_classes):
        raise ValueError(f"F_u must have shape {(graph.m, labeled.n_classes)}, got {F_u.shape}")
    if L_A is None:
        L_A = reduced_laplacian(graph)
    R = _labeled_rows(graph, labeled) @ F_u - labeled.Y
    return float((R**2).sum() + alpha * np.trace(F_u.T @ L_A @ F_u))


def objective_gradient(graph, labeled, F_u, alpha, L_A=None):
    """Gradient of :func:`objective_value` with respect to ``F_u``."""
    if L_A is None:
        L_A = reduced_laplacian(graph)
    Pl = _labeled_rows(graph, labeled)
    return 2.0 * (Pl.T @ (Pl @ F_u - labeled.Y)) + 2.0 * alpha * (L_A @ F_u)


def predict(graph, F_u):
    """Pixel scores ``P F_u`` and argmax class ids (1-based, ties to the lowest)."""
    F_u = np.asarray(F_u, dtype=np.float64)
    if F_u.ndim != 2 or F_u.shape[0] != graph.m:
        raise ValueError(f"F_u must have {graph.m} rows, got shape {F_u.shape}")
    soft = np.asarray(graph.P @ F_u)
    return soft, soft.argmax(axis=1) + 1


def solve_full_graph_reference(S, Y, labeled_mask, alpha_l=0.01, alpha_v=1e-6,
                               ridge=RIDGE, cap=DENSE_CAP):
    """Dense solve of ``min Tr((F-Y)^T C (F-Y)) + Tr(F^T L F)``.

    ``C`` is diagonal with ``alpha_l`` on labeled pixels and ``alpha_v`` on
    the rest; ``L = D - S``. The minimizer is ``(C + L)^-1 C Y``. Meant as a
    verification oracle for small ``n``.

    Parameters
    ----------
    S : ndarray of shape (n, n)
        Symmetric nonnegative adjacency.
    Y : ndarray of shape (n, c)
        One-hot rows for labeled pixels, zero rows elsewhere.
    labeled_mask : ndarray of bool, shape (n,)
    """
    S = np.asarray(S, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n = S.shape[0]
    if n > cap:
        raise ValueError(f"n={n} exceeds the dense cap {cap}")
    if S.shape != (n, n) or Y.shape[0] != n:
        raise ValueError("S must be n x n and Y must have n rows")
    if not np.allclose(S, S.T) or S.min() < 0:
        raise ValueError("S must be symmetric and nonnegative")
    if not (alpha_l > 0 and alpha_v > 0):
        raise ValueError("alpha_l and alpha_v must be positive")
    c = np.where(np.asarray(labeled_mask, dtype=bool), alpha_l, alpha_v)
    L = np.diag(S.sum(axis=1)) - S
    A = L + np.diag(c + ridge)
    try:
        F = linalg.solve(A, c[:, None] * Y, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise SingularSystemError("full-graph system is singular") from exc
    return F
