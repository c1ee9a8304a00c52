"""Lloyd's K-Means with k-means++ seeding, written against a fixed
numeric contract: deterministic for a given seed, objective
non-increasing across iterations (asserted every run), empty clusters
reseeded to the point farthest from its current centroid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .pca import validate_embeddings


@dataclass(frozen=True)
class ClusterModel:
    centroids: np.ndarray    # (k, r)
    assignments: np.ndarray  # (n,) int
    objective: float         # within-cluster sum of squared distances
    n_iter: int


def _dist2(Y: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (n, k) squared Euclidean distances, one fixed evaluation order
    diff = Y[:, None, :] - centroids[None, :, :]
    return np.einsum("nkj,nkj->nk", diff, diff)


def _seed_centroids(Y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = Y.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _dist2(Y, Y[chosen])[:, 0]
    while len(chosen) < k:
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, ((Y - Y[idx]) ** 2).sum(axis=1))
    return Y[chosen].copy()


def kmeans(Y: np.ndarray, k: int = 15, seed: int = 0, max_iter: int = 300) -> ClusterModel:
    """Cluster rows of Y into k groups under squared Euclidean distance."""
    Y = validate_embeddings(Y)
    n = Y.shape[0]
    if not (1 <= k <= n):
        raise ContractError(f"k must satisfy 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    centroids = _seed_centroids(Y, k, rng)
    assignments = np.full(n, -1, dtype=np.int64)
    prev_objective = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _dist2(Y, centroids)
        new_assignments = np.argmin(d2, axis=1)
        objective = float(d2[np.arange(n), new_assignments].sum())
        assert objective <= prev_objective * (1 + 1e-12) + 1e-12, (
            f"objective rose: {prev_objective} -> {objective} at iteration {it}"
        )
        prev_objective = objective
        if np.array_equal(new_assignments, assignments):
            assignments = new_assignments
            break
        assignments = new_assignments
        own_d2 = d2[np.arange(n), assignments]
        used: set[int] = set()
        for j in range(k):
            members = np.nonzero(assignments == j)[0]
            if members.size:
                centroids[j] = Y[members].mean(axis=0)
            else:
                # farthest point from its assigned centroid, skipping
                # points already consumed by another empty cluster
                order = np.argsort(-own_d2, kind="stable")
                pick = next(int(i) for i in order if int(i) not in used)
                used.add(pick)
                centroids[j] = Y[pick]
    d2 = _dist2(Y, centroids)
    final = np.argmin(d2, axis=1)
    objective = float(d2[np.arange(n), final].sum())
    return ClusterModel(
        centroids=centroids, assignments=final, objective=objective, n_iter=it
    )


def recompute_objective(Y: np.ndarray, model: ClusterModel) -> float:
    """Objective from scratch, same evaluation order as the fit."""
    Y = np.asarray(Y, dtype=np.float64)
    d2 = _dist2(Y, model.centroids)
    return float(d2[np.arange(Y.shape[0]), model.assignments].sum())


def representatives(
    Y: np.ndarray, model: ClusterModel, cluster: int, n: int = 30
) -> list[int]:
    """Row indices of the cluster's members closest to its centroid.

    Sorted by ascending Euclidean distance, ties broken by row index,
    truncated to n.
    """
    if not (0 <= cluster < model.centroids.shape[0]):
        raise ContractError(f"cluster {cluster} out of range")
    Y = np.asarray(Y, dtype=np.float64)
    members = np.nonzero(model.assignments == cluster)[0]
    d2 = ((Y[members] - model.centroids[cluster]) ** 2).sum(axis=1)
    ranked = sorted(zip(d2.tolist(), members.tolist()))
    return [idx for _, idx in ranked[:n]]
