"""Diversity re-ranking: planted clusters, truncation property, determinism."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imgcurate.errors import InsufficientCandidates
from imgcurate.rerank import RankedCandidate, diversity_order, kmeans


def planted_two_clusters(seed: int, per_cluster: int = 3):
    """2-D points in two far-apart blobs; similarity decays with index."""
    rng = np.random.default_rng(seed)
    a = rng.normal((10.0, 0.0), 0.1, size=(per_cluster, 2))
    b = rng.normal((-10.0, 0.0), 0.1, size=(per_cluster, 2))
    points = np.vstack([a, b])
    cands = [
        RankedCandidate(record_id=f"c{i:02d}", similarity=1.0 - 0.01 * i)
        for i in range(points.shape[0])
    ]
    return cands, points


class TestKmeans:
    def test_two_blob_partition(self):
        _, points = planted_two_clusters(seed=1)
        labels = kmeans(points, 2, seed=42)
        assert len(set(labels[:3])) == 1
        assert len(set(labels[3:])) == 1
        assert labels[0] != labels[3]

    def test_deterministic(self):
        _, points = planted_two_clusters(seed=2)
        a = kmeans(points, 2, seed=9)
        b = kmeans(points, 2, seed=9)
        assert np.array_equal(a, b)

    def test_more_clusters_than_points(self):
        points = np.array([[0.0, 0.0], [1.0, 1.0]])
        labels = kmeans(points, 5, seed=0)
        assert set(labels) <= {0, 1}


class TestDiversityOrder:
    def test_planted_two_clusters_alternate(self):
        cands, points = planted_two_clusters(seed=3)
        out = diversity_order(cands, points, clusters=2, k=4, seed=11)
        ids = [c.record_id for c, _ in out]
        ranks = [rank for _, rank in out]
        # best cluster (holding c00, the top candidate) leads, then alternation
        assert ranks == [0, 1, 0, 1]
        assert ids[0] == "c00"
        picked_from_a = sum(1 for i in ids if int(i[1:]) < 3)
        assert picked_from_a == 2

    def test_single_cluster_truncates_input_order(self):
        cands, points = planted_two_clusters(seed=4)
        shuffled = list(reversed(cands))
        out = diversity_order(shuffled, points[::-1].copy(), clusters=1, k=4, seed=5)
        assert [c.record_id for c, _ in out] == [c.record_id for c in shuffled[:4]]

    def test_k_equals_count_is_permutation(self):
        cands, points = planted_two_clusters(seed=5)
        out = diversity_order(cands, points, clusters=2, k=len(cands), seed=0)
        assert sorted(c.record_id for c, _ in out) == sorted(c.record_id for c in cands)

    def test_k_too_large(self):
        cands, points = planted_two_clusters(seed=6)
        with pytest.raises(InsufficientCandidates):
            diversity_order(cands, points, clusters=2, k=len(cands) + 1, seed=0)

    def test_every_entry_gets_cluster_id(self):
        cands, points = planted_two_clusters(seed=7)
        out = diversity_order(cands, points, clusters=3, k=5, seed=2)
        assert all(isinstance(rank, int) for _, rank in out)

    def test_deterministic_for_fixed_seed(self):
        rng = np.random.default_rng(0)
        points = rng.normal(size=(30, 8))
        cands = [RankedCandidate(f"r{i:02d}", float(rng.random())) for i in range(30)]
        a = diversity_order(cands, points, clusters=4, k=10, seed=13)
        b = diversity_order(cands, points, clusters=4, k=10, seed=13)
        assert [(c.record_id, r) for c, r in a] == [(c.record_id, r) for c, r in b]


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=40),
    k_frac=st.floats(min_value=0.0, max_value=1.0),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_single_cluster_is_order_preserving_truncation(n, k_frac, seed):
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(n, 4))
    cands = [RankedCandidate(f"x{i:03d}", float(rng.random())) for i in range(n)]
    k = max(1, int(round(k_frac * n)))
    out = diversity_order(cands, points, clusters=1, k=k, seed=seed)
    assert [c.record_id for c, _ in out] == [c.record_id for c in cands[:k]]


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(min_value=2, max_value=30),
    clusters=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_output_subset_and_size(n, clusters, seed):
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(n, 3))
    cands = [RankedCandidate(f"x{i:03d}", float(rng.random())) for i in range(n)]
    k = rng.integers(1, n + 1)
    out = diversity_order(cands, points, clusters=clusters, k=int(k), seed=seed)
    ids = [c.record_id for c, _ in out]
    assert len(ids) == min(k, n)
    assert len(set(ids)) == len(ids)
    assert set(ids) <= {c.record_id for c in cands}
