import numpy as np
import pytest
from scipy import sparse

from hsi_anchor.anchor_graph import AnchorGraph, build_graph, normalized_adjacency, reduced_laplacian
from hsi_anchor.anchors import kmeans_anchors
from hsi_anchor.features import select_bands_lpe, stack_features
from hsi_anchor.hsi_io import SyntheticSpec, make_synthetic_cube
from hsi_anchor.pipeline import split_labels
from hsi_anchor.ssl_solver import (RIDGE, LabeledSet, SingularSystemError, objective_gradient,
                                   objective_value, predict, solve_anchor_ssl,
                                   solve_full_graph_reference)

import oracles


def dense_graph(P, k=1):
    P = sparse.csr_matrix(np.asarray(P, dtype=float))
    return AnchorGraph(P, k, np.asarray(P.sum(axis=0)).ravel())


def random_instance(seed, n=40, m=6, c=3, d=5, k=3, n_labeled=None):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    g = build_graph(X, kmeans_anchors(X, m, seed=seed), k)
    n_labeled = n_labeled or n // 2
    idx = np.sort(rng.choice(n, size=n_labeled, replace=False))
    labels = rng.integers(1, c + 1, size=n_labeled)
    labels[:c] = np.arange(1, c + 1)
    return g, LabeledSet.from_labels(idx, labels, c)


# --- LabeledSet ------------------------------------------------------------

@pytest.mark.filterwarnings("ignore:classes without labeled pixels")
def test_labeled_set_one_hot():
    ls = LabeledSet.from_labels([4, 1], [2, 1], 3)
    assert ls.Y.tolist() == [[0, 1, 0], [1, 0, 0]]
    assert ls.labels.tolist() == [2, 1]


def test_labeled_set_validation():
    with pytest.raises(ValueError):
        LabeledSet([1, 1], np.eye(2))
    with pytest.raises(ValueError):
        LabeledSet([0, 1], [[1, 1], [0, 1]])
    with pytest.raises(ValueError):
        LabeledSet.from_labels([0], [4], 3)


def test_labeled_set_missing_class_warns():
    with pytest.warns(UserWarning, match="classes without labeled pixels"):
        LabeledSet.from_labels([0, 1], [1, 1], 2)


# --- anchor solve ----------------------------------------------------------

@pytest.mark.filterwarnings("ignore:classes without labeled pixels")
def test_single_anchor_single_label():
    g = dense_graph(np.ones((4, 1)))
    np.testing.assert_allclose(reduced_laplacian(g), [[0.0]], atol=1e-12)
    sol = solve_anchor_ssl(g, LabeledSet.from_labels([2], [1], 2), alpha=0.7)
    np.testing.assert_allclose(sol.F_u, [[1.0, 0.0]], atol=1e-9)
    assert sol.ridge_used == RIDGE == 1e-10
    assert sol.hard_labels.tolist() == [1, 1, 1, 1]


def test_duplicated_labels_scaled_system():
    g, lab = random_instance(0)
    base = solve_anchor_ssl(g, lab, alpha=0.05)
    # append a copy of every labeled row and label both copies
    P2 = sparse.vstack([g.P, g.P[lab.indices]]).tocsr()
    g2 = AnchorGraph(P2, g.k, np.asarray(P2.sum(axis=0)).ravel())
    extra = np.arange(g.n, g.n + len(lab.indices))
    lab2 = LabeledSet(np.concatenate([lab.indices, extra]), np.vstack([lab.Y, lab.Y]))
    # 2 Pl^T Pl + (2 alpha) L_A F = 2 Pl^T Y has the same solution
    dup = solve_anchor_ssl(g2, lab2, alpha=0.1, L_A=reduced_laplacian(g))
    np.testing.assert_allclose(dup.F_u, base.F_u, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_closed_form_matches_gradient_descent(seed):
    g, lab = random_instance(seed, n=40, m=6, c=3)
    alpha = 0.01
    sol = solve_anchor_ssl(g, lab, alpha)
    F_gd, _ = oracles.gradient_descent_anchor(g.P[lab.indices].toarray(), lab.Y,
                                              oracles.dense_reduced_laplacian(g.P.toarray()), alpha)
    np.testing.assert_allclose(sol.F_u, F_gd, atol=1e-4, rtol=0)


@pytest.mark.parametrize("seed", range(5))
def test_stationary_point(seed):
    g, lab = random_instance(seed, n=80, m=10, c=4)
    sol = solve_anchor_ssl(g, lab, 0.01)
    grad = objective_gradient(g, lab, sol.F_u, 0.01)
    assert np.linalg.norm(grad) <= 1e-8 * (1 + np.linalg.norm(sol.F_u))


def test_class_permutation_equivariance():
    g, lab = random_instance(3, c=4)
    perm = np.array([2, 0, 3, 1])
    sol = solve_anchor_ssl(g, lab, 0.02)
    permuted = solve_anchor_ssl(g, LabeledSet(lab.indices, lab.Y[:, perm]), 0.02)
    np.testing.assert_allclose(permuted.F_u, sol.F_u[:, perm], atol=1e-12)


def test_solution_fields_consistent():
    g, lab = random_instance(4)
    sol = solve_anchor_ssl(g, lab, 0.01)
    np.testing.assert_allclose(sol.soft_scores, g.P @ sol.F_u)
    assert sol.hard_labels.shape == (g.n,)
    assert np.all(sol.hard_labels == sol.soft_scores.argmax(axis=1) + 1)
    assert sol.alpha == 0.01


@pytest.mark.filterwarnings("ignore:classes without labeled pixels")
def test_solve_rejects_bad_input():
    g, lab = random_instance(5)
    with pytest.raises(ValueError):
        solve_anchor_ssl(g, lab, alpha=0.0)
    with pytest.raises(ValueError):
        solve_anchor_ssl(g, LabeledSet.from_labels([g.n], [1], 3), 0.01)
    with pytest.raises(ValueError):
        solve_anchor_ssl(g, lab, 0.01, L_A=np.eye(2))


def test_singular_system_reported():
    g = dense_graph(np.eye(3))
    with pytest.raises(SingularSystemError):
        solve_anchor_ssl(g, LabeledSet.from_labels([0], [1], 1), alpha=1.0, ridge=-1.0)


# --- objective -------------------------------------------------------------

def test_objective_at_zero_counts_labels():
    g, lab = random_instance(6)
    assert objective_value(g, lab, np.zeros((g.m, 3)), 0.3) == pytest.approx(len(lab.indices))


def test_objective_minimal_at_solution():
    g, lab = random_instance(7)
    sol = solve_anchor_ssl(g, lab, 0.01)
    best = objective_value(g, lab, sol.F_u, 0.01)
    rng = np.random.default_rng(0)
    for _ in range(100):
        d = rng.normal(size=sol.F_u.shape)
        d *= 0.01 / np.linalg.norm(d)
        assert best <= objective_value(g, lab, sol.F_u + d, 0.01)


def test_objective_zero_when_consistent():
    # each labeled pixel sits on its own anchor
    g = dense_graph(np.vstack([np.eye(3), [[0.5, 0.5, 0]]]))
    lab = LabeledSet.from_labels([0, 1, 2], [1, 2, 2], 2)
    assert objective_value(g, lab, lab.Y, 0.0) == 0.0


def test_objective_shape_check():
    g, lab = random_instance(8)
    with pytest.raises(ValueError):
        objective_value(g, lab, np.zeros((g.m, 2)), 0.1)


def test_gradient_matches_finite_differences():
    g, lab = random_instance(9, n=30, m=5, c=2)
    F = np.random.default_rng(1).normal(size=(5, 2))
    grad = objective_gradient(g, lab, F, 0.3)
    h = 1e-6
    fd = np.zeros_like(F)
    for idx in np.ndindex(F.shape):
        E = np.zeros_like(F)
        E[idx] = h
        fd[idx] = (objective_value(g, lab, F + E, 0.3) - objective_value(g, lab, F - E, 0.3)) / (2 * h)
    np.testing.assert_allclose(grad, fd, atol=1e-6)


# --- predict ---------------------------------------------------------------

def test_predict_argmax():
    g = dense_graph([[1, 0], [0, 1]])
    soft, hard = predict(g, np.array([[0.1, 0.9], [0.8, 0.2]]))
    assert hard.tolist() == [2, 1]


def test_predict_ties_to_smallest():
    g, _ = random_instance(10)
    F = np.tile(np.random.default_rng(0).normal(size=(g.m, 1)), (1, 3))
    assert np.all(predict(g, F)[1] == 1)


def test_predict_matches_loop():
    g, _ = random_instance(11, n=50, m=7, c=4)
    F = np.random.default_rng(1).normal(size=(7, 4))
    soft, hard = predict(g, F)
    P = g.P.toarray()
    for i in range(50):
        scores = [sum(P[i, j] * F[j, c] for j in range(7)) for c in range(4)]
        best = 0
        for c in range(1, 4):
            if scores[c] > scores[best]:
                best = c
        assert hard[i] == best + 1


def test_predict_shape_check():
    g, _ = random_instance(12)
    with pytest.raises(ValueError):
        predict(g, np.zeros((g.m + 1, 2)))


# --- full-graph reference --------------------------------------------------

def test_reference_no_edges_returns_y():
    Y = np.array([[1.0, 0], [0, 1], [0, 0]])
    mask = np.array([True, True, False])
    np.testing.assert_array_equal(solve_full_graph_reference(np.zeros((3, 3)), Y, mask, ridge=0.0), Y)
    np.testing.assert_allclose(solve_full_graph_reference(np.zeros((3, 3)), Y, mask), Y, atol=1e-7)


def test_reference_two_pixels():
    S = np.array([[0.0, 1.0], [1.0, 0.0]])
    Y = np.array([[1.0, 0.0], [0.0, 0.0]])
    F = solve_full_graph_reference(S, Y, np.array([True, False]), alpha_l=1e6, alpha_v=1e-6)
    assert F.argmax(axis=1).tolist() == [0, 0]
    # 2x2 system solved by hand: (C+L) F = C Y
    a, b = 1e6, 1e-6
    det = (a + 1) * (b + 1) - 1
    assert F[1, 0] == pytest.approx(a / det, rel=1e-6)


def test_reference_stationarity():
    rng = np.random.default_rng(13)
    n, c = 30, 3
    W = rng.uniform(size=(n, n))
    S = (W + W.T) / 2
    np.fill_diagonal(S, 0)
    mask = rng.uniform(size=n) < 0.3
    Y = np.zeros((n, c))
    Y[mask, rng.integers(c, size=mask.sum())] = 1
    F = solve_full_graph_reference(S, Y, mask, 0.01, 1e-6)
    C = np.diag(np.where(mask, 0.01, 1e-6))
    L = np.diag(S.sum(axis=1)) - S
    np.testing.assert_allclose(2 * C @ (F - Y) + 2 * L @ F, 0.0, atol=1e-8)


def test_reference_validation():
    with pytest.raises(ValueError):
        solve_full_graph_reference(np.array([[0, 1.0], [0, 0]]), np.zeros((2, 1)), [True, False])
    with pytest.raises(ValueError):
        solve_full_graph_reference(np.zeros((2, 2)), np.zeros((2, 1)), [True, False], alpha_v=0)
    with pytest.raises(ValueError):
        solve_full_graph_reference(np.zeros((3, 3)), np.zeros((3, 1)), [True] * 3, cap=2)


@pytest.mark.parametrize("seed", range(3))
def test_anchor_and_full_graph_agree(seed):
    cube, truth = make_synthetic_cube(SyntheticSpec(20, 20, 8, 3, 8.0, 1.0), seed)
    F = stack_features(cube, select_bands_lpe(cube, 8))
    lab, _ = split_labels(truth, 0.05, seed)
    g = build_graph(F, kmeans_anchors(F, 40, seed=seed), 5)
    hard_anchor = solve_anchor_ssl(g, lab, 0.01).hard_labels
    Y = np.zeros((g.n, lab.n_classes))
    Y[lab.indices] = lab.Y
    mask = np.zeros(g.n, bool)
    mask[lab.indices] = True
    F_full = solve_full_graph_reference(normalized_adjacency(g), Y, mask, 0.01, 1e-6)
    hard_full = F_full.argmax(axis=1) + 1
    assert (hard_anchor == hard_full).mean() >= 0.99
