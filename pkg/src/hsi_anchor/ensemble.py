"""Random-subspace ensemble of anchor-graph learners with plurality voting."""
import time
from dataclasses import dataclass, asdict

import numpy as np
from joblib import Parallel, delayed

from .anchor_graph import build_graph, reduced_laplacian
from .anchors import default_anchor_count, kmeans_anchors
from .features import LbpParams, sample_feature_subset
from .ssl_solver import solve_anchor_ssl

__all__ = ["EnsembleConfig", "MemberResult", "MemberError", "train_members", "vote", "run_member"]


class MemberError(RuntimeError):
    def __init__(self, member_id, cause):
        super().__init__(f"ensemble member {member_id} failed: {cause}")
        self.member_id = member_id


@dataclass(frozen=True)
class EnsembleConfig:
    k_g: int = 4
    k_ss: int = 96
    m: int = None  # None -> default_anchor_count(n)
    k: int = 5
    alpha: float = 0.01
    lbp: LbpParams = LbpParams()
    seed: int = 0
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-4
    n_jobs: int = 1

    def __post_init__(self):
        if self.k_g < 1:
            raise ValueError("k_g must be >= 1")
        if self.k_ss < 1:
            raise ValueError("k_ss must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def anchors_for(self, n):
        return default_anchor_count(n) if self.m is None else self.m

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class MemberResult:
    member_id: int
    columns: tuple
    m: int
    k: int
    n_pruned: int
    solution: object
    duration_s: float

    @property
    def hard_labels(self):
        return self.solution.hard_labels

    @property
    def soft_scores(self):
        return self.solution.soft_scores

    def summary(self):
        return {
            "member": self.member_id,
            "n_columns": len(self.columns),
            "m": self.m,
            "k": self.k,
            "pruned_anchors": self.n_pruned,
            "time_s": self.duration_s,
        }


def run_member(features, labeled, config, member_id):
    """Train one member: column subset -> k-means anchors -> graph -> solve."""
    t0 = time.perf_counter()
    seed = config.seed + member_id
    try:
        cols = sample_feature_subset(features.d, config.k_ss, seed)
        X = features.values[:, cols]
        m = config.anchors_for(features.n)
        anchors = kmeans_anchors(X, m, seed=seed, max_iter=config.kmeans_max_iter,
                                 tol=config.kmeans_tol)
        graph = build_graph(X, anchors, config.k)
        solution = solve_anchor_ssl(graph, labeled, config.alpha, L_A=reduced_laplacian(graph))
    except Exception as exc:
        raise MemberError(member_id, exc) from exc
    return MemberResult(member_id, tuple(cols), graph.m, graph.k, graph.n_pruned,
                        solution, time.perf_counter() - t0)


def train_members(features, labeled, config):
    """Train ``config.k_g`` independent members, returned in member-id order.

    Member ``g`` uses seed ``config.seed + g`` for both its column subset and
    its k-means run, so results do not depend on ``config.n_jobs``.
    """
    if config.k_ss > features.d:
        raise ValueError(f"k_ss={config.k_ss} exceeds the feature dimension {features.d}")
    m = config.anchors_for(features.n)
    if not 1 <= config.k <= m - 1:
        raise ValueError(f"k={config.k} needs at least k+1 anchors, have m={m}")
    jobs = (delayed(run_member)(features, labeled, config, g) for g in range(config.k_g))
    if config.n_jobs == 1:
        results = [run_member(features, labeled, config, g) for g in range(config.k_g)]
    else:
        results = Parallel(n_jobs=config.n_jobs, prefer="threads")(jobs)
    return sorted(results, key=lambda r: r.member_id)


def vote(members):
    """Plurality vote over member hard labels.

    Ties between equally voted classes go to the one with the largest summed
    soft score across members; remaining ties go to the smallest class id.
    """
    if not members:
        raise ValueError("cannot vote with no members")
    n, c = members[0].soft_scores.shape
    counts = np.zeros((n, c), dtype=np.int64)
    soft = np.zeros((n, c))
    rows = np.arange(n)
    for r in members:
        if r.soft_scores.shape != (n, c) or r.hard_labels.shape != (n,):
            raise ValueError(f"member {r.member_id} does not match n={n}, c={c}")
        counts[rows, r.hard_labels - 1] += 1
        soft += r.soft_scores
    tied = counts == counts.max(axis=1, keepdims=True)
    return np.where(tied, soft, -np.inf).argmax(axis=1) + 1
