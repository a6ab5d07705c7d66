"""Cluster-based diversity re-ranking.

Candidates are clustered with a seeded k-means (k-means++ init, Euclidean
distance — monotone in cosine on unit vectors) and emitted round-robin
across clusters so the final page covers distinct regions of the candidate
pool instead of one dense neighborhood.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import InsufficientCandidates

KMEANS_MAX_ITER = 50
KMEANS_TOL = 1e-6


def kmeans(
    points: np.ndarray,
    n_clusters: int,
    seed: int,
    max_iter: int = KMEANS_MAX_ITER,
    tol: float = KMEANS_TOL,
) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; returns per-point labels.

    Deterministic for a fixed seed. Empty clusters are re-seeded from the
    point farthest from its assigned centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    k = min(n_clusters, n)
    if k <= 1:
        return np.zeros(n, dtype=np.int64)

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(points, k, rng)

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dist2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = dist2.argmin(axis=1)

        new_centers = np.empty_like(centers)
        for j in range(k):
            members = points[labels == j]
            if members.shape[0] == 0:
                far = int(dist2[np.arange(n), labels].argmax())
                new_centers[j] = points[far]
                labels[far] = j
            else:
                new_centers[j] = members.mean(axis=0)

        shift = float(((new_centers - centers) ** 2).sum())
        centers = new_centers
        if shift <= tol:
            break

    dist2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return dist2.argmin(axis=1)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = points[first]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all remaining points coincide with a chosen center
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), r, side="right"))
            idx = min(idx, n - 1)
        centers[j] = points[idx]
        closest = np.minimum(closest, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


@dataclass(frozen=True)
class RankedCandidate:
    record_id: str
    similarity: float


def diversity_order(
    candidates: Sequence[RankedCandidate],
    vectors: np.ndarray,
    clusters: int,
    k: int,
    seed: int,
) -> list[tuple[RankedCandidate, int]]:
    """Round-robin selection of ``k`` candidates across clusters.

    Clusters are visited in order of their best similarity; within a cluster
    candidates stay similarity-sorted. Ties break on ascending record_id.
    Returns (candidate, cluster_rank) pairs; cluster_rank 0 is the best
    cluster.
    """
    n = len(candidates)
    if n == 0:
        raise InsufficientCandidates("no candidates to re-rank")
    if clusters < 1:
        raise InsufficientCandidates(f"clusters must be >= 1, got {clusters}")
    if k > n:
        raise InsufficientCandidates(f"k={k} exceeds candidate count {n}")

    if clusters == 1:
        # Degenerates to plain ranking: truncate the incoming order.
        return [(candidates[i], 0) for i in range(k)]

    def order_key(i: int) -> tuple[float, str]:
        return (-candidates[i].similarity, candidates[i].record_id)

    labels = kmeans(np.asarray(vectors, dtype=np.float64), clusters, seed)

    buckets: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        buckets.setdefault(int(lab), []).append(i)
    for members in buckets.values():
        members.sort(key=order_key)

    cluster_order = sorted(
        buckets,
        key=lambda lab: (-candidates[buckets[lab][0]].similarity, candidates[buckets[lab][0]].record_id),
    )
    cluster_rank = {lab: rank for rank, lab in enumerate(cluster_order)}

    out: list[tuple[RankedCandidate, int]] = []
    cursors = {lab: 0 for lab in cluster_order}
    while len(out) < k:
        emitted = False
        for lab in cluster_order:
            if len(out) >= k:
                break
            cur = cursors[lab]
            if cur < len(buckets[lab]):
                out.append((candidates[buckets[lab][cur]], cluster_rank[lab]))
                cursors[lab] = cur + 1
                emitted = True
        if not emitted:
            break
    return out
