"""Vector index: exact and approximate cosine search plus the retrieval modes.

Exact search is a full scan and serves as the oracle for the approximate
path. The approximate structure is an inverted-file partition: a seeded
spherical k-means splits the stored vectors into lists, and a query scans
only the lists whose centroids rank highest. The probe fraction defaults
high (recall first); on corpora with real cluster structure the same
recall holds at a much smaller fraction, while on unstructured vectors the
scan degrades gracefully toward a ranked full pass instead of losing
recall. Build and search are deterministic for a fixed seed.

Ties everywhere break on ascending record_id for reproducibility.
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .embeddings import MODALITY_IMAGE, MODALITY_TEXT, EmbeddingVector, normalize
from .errors import (
    DegenerateAggregate,
    DimensionMismatch,
    EmptyIndex,
    IndexNotBuilt,
    InvalidQuery,
)
from .rerank import RankedCandidate, diversity_order

INDEX_BLOB_VERSION = 1

DEFAULT_NLIST = 128
DEFAULT_PROBE_FRACTION = 0.95
KMEANS_BUILD_ITERS = 15
DEFAULT_CANDIDATE_MULTIPLIER = 5


class QueryMode(str, enum.Enum):
    IMAGE = "IMAGE"
    MULTI_IMAGE = "MULTI_IMAGE"
    TEXT = "TEXT"
    HYBRID = "HYBRID"
    BATCH = "BATCH"


@dataclass
class RetrievalQuery:
    mode: QueryMode
    seed_vectors: list[EmbeddingVector]
    k: int
    hybrid_alpha: float = 0.5
    diversity_clusters: int = 0
    candidate_multiplier: int = DEFAULT_CANDIDATE_MULTIPLIER
    exclude_ids: frozenset[str] = frozenset()
    seed: int = 0

    def validate(self) -> None:
        if self.k < 1:
            raise InvalidQuery(f"k must be >= 1, got {self.k}")
        if self.candidate_multiplier < 1:
            raise InvalidQuery("candidate_multiplier must be >= 1")
        if self.diversity_clusters < 0:
            raise InvalidQuery("diversity_clusters must be >= 0")
        if not 0.0 <= self.hybrid_alpha <= 1.0:
            raise InvalidQuery(f"hybrid_alpha {self.hybrid_alpha} outside [0, 1]")
        n = len(self.seed_vectors)
        if self.mode == QueryMode.IMAGE:
            if n != 1:
                raise InvalidQuery(f"IMAGE mode takes exactly one seed, got {n}")
        elif self.mode == QueryMode.MULTI_IMAGE:
            if n < 2:
                raise InvalidQuery(f"MULTI_IMAGE mode needs >= 2 seeds, got {n}")
        elif self.mode == QueryMode.TEXT:
            if n != 1:
                raise InvalidQuery(f"TEXT mode takes exactly one seed, got {n}")
        elif self.mode == QueryMode.HYBRID:
            modalities = sorted(v.modality for v in self.seed_vectors)
            if n != 2 or modalities != [MODALITY_IMAGE, MODALITY_TEXT]:
                raise InvalidQuery("HYBRID mode needs exactly one IMAGE and one TEXT seed")
        elif self.mode == QueryMode.BATCH:
            if n < 1:
                raise InvalidQuery("BATCH mode needs >= 1 seed")
        dims = {v.dim for v in self.seed_vectors}
        if len(dims) > 1:
            raise InvalidQuery(f"mixed seed dimensions: {sorted(dims)}")


@dataclass
class ResultEntry:
    record_id: str
    similarity: float
    cluster_id: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "similarity": self.similarity,
            "cluster_id": self.cluster_id,
        }


@dataclass
class ResultSet:
    entries: list[ResultEntry]
    query_echo: Optional[RetrievalQuery] = None
    exact: bool = True

    def record_ids(self) -> list[str]:
        return [e.record_id for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def aggregate_multi(seeds: Sequence[EmbeddingVector]) -> EmbeddingVector:
    """Normalized centroid of the seed vectors: the joint query vector."""
    if len(seeds) < 2:
        raise InvalidQuery(f"multi-image aggregation needs >= 2 seeds, got {len(seeds)}")
    dims = {v.dim for v in seeds}
    if len(dims) > 1:
        raise DimensionMismatch(f"mixed dimensions: {sorted(dims)}")
    mean = np.mean([v.values for v in seeds], axis=0)
    if float(np.linalg.norm(mean)) < 1e-9:
        raise DegenerateAggregate("seed mean has near-zero norm")
    return EmbeddingVector(
        values=normalize(mean),
        modality=MODALITY_IMAGE,
        provider_id=seeds[0].provider_id,
    )


def compose_hybrid(
    image_vec: EmbeddingVector, text_vec: EmbeddingVector, alpha: float
) -> EmbeddingVector:
    """normalize(alpha * image + (1 - alpha) * text)."""
    if image_vec.dim != text_vec.dim:
        raise DimensionMismatch(f"{image_vec.dim} != {text_vec.dim}")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidQuery(f"alpha {alpha} outside [0, 1]")
    combined = alpha * image_vec.values + (1.0 - alpha) * text_vec.values
    if float(np.linalg.norm(combined)) < 1e-9:
        raise DegenerateAggregate("hybrid combination has near-zero norm")
    return EmbeddingVector(
        values=normalize(combined),
        modality=MODALITY_IMAGE,
        provider_id=image_vec.provider_id,
    )


class VectorIndex:
    """Cosine-similarity index over unit vectors keyed by record id."""

    def __init__(
        self,
        dim: int,
        *,
        seed: int = 0,
        nlist: int = DEFAULT_NLIST,
        nprobe: Optional[int] = None,
    ):
        self.dim = dim
        self.seed = seed
        self.nlist = nlist
        self.nprobe = nprobe
        self._ids: list[str] = []
        self._row_of: dict[str, int] = {}
        self._rows: list[np.ndarray] = []
        self._matrix: Optional[np.ndarray] = None
        self._centroids: Optional[np.ndarray] = None
        self._labels: Optional[np.ndarray] = None
        self._lists: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def built(self) -> bool:
        return self._centroids is not None

    # --- storage ---

    def insert(self, record_id: str, vector: EmbeddingVector) -> None:
        """Insert or replace; any built partition becomes stale."""
        if vector.dim != self.dim:
            raise DimensionMismatch(f"vector dim {vector.dim} != index dim {self.dim}")
        row = self._row_of.get(record_id)
        values = vector.values.astype(np.float32, copy=True)
        if row is None:
            self._row_of[record_id] = len(self._ids)
            self._ids.append(record_id)
            self._rows.append(values)
        else:
            self._rows[row] = values
        self._matrix = None
        self._centroids = None
        self._labels = None
        self._lists = []

    @property
    def _vectors(self) -> np.ndarray:
        if self._matrix is None:
            if self._rows:
                self._matrix = np.stack(self._rows).astype(np.float32)
            else:
                self._matrix = np.empty((0, self.dim), dtype=np.float32)
        return self._matrix

    def bulk_insert(self, items: Sequence[tuple[str, EmbeddingVector]]) -> None:
        for record_id, vector in items:
            self.insert(record_id, vector)

    def vector(self, record_id: str) -> EmbeddingVector:
        row = self._row_of.get(record_id)
        if row is None:
            raise KeyError(record_id)
        return EmbeddingVector(
            values=self._rows[row].copy(), modality=MODALITY_IMAGE, provider_id="index"
        )

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._row_of

    # --- exact search (oracle) ---

    def search_exact(self, query_vector: EmbeddingVector, k: int) -> ResultSet:
        """Top-k by cosine over a full scan; ties break on ascending record_id."""
        if len(self._ids) == 0:
            raise EmptyIndex("index holds no vectors")
        if query_vector.dim != self.dim:
            raise DimensionMismatch(f"query dim {query_vector.dim} != index dim {self.dim}")
        sims = self._vectors @ query_vector.values
        order = np.lexsort((np.asarray(self._ids), -sims))
        top = order[: min(k, len(order))]
        entries = [ResultEntry(self._ids[i], float(sims[i])) for i in top]
        return ResultSet(entries=entries, exact=True)

    # --- approximate search ---

    def _effective_nprobe(self, nlist_effective: int) -> int:
        if self.nprobe is not None:
            return max(1, min(self.nprobe, nlist_effective))
        return max(1, min(nlist_effective, math.ceil(DEFAULT_PROBE_FRACTION * nlist_effective)))

    def build(self, seed: Optional[int] = None) -> None:
        """Partition the stored vectors with a seeded spherical k-means."""
        if len(self._ids) == 0:
            raise EmptyIndex("cannot build over an empty index")
        if seed is not None:
            self.seed = seed
        n = len(self._ids)
        k = max(1, min(self.nlist, n))
        rng = np.random.default_rng(self.seed)
        centroids = self._vectors[rng.choice(n, size=k, replace=False)].copy()
        labels = np.zeros(n, dtype=np.int32)
        for _ in range(KMEANS_BUILD_ITERS):
            labels = (self._vectors @ centroids.T).argmax(axis=1).astype(np.int32)
            sums = np.zeros_like(centroids)
            np.add.at(sums, labels, self._vectors)
            counts = np.bincount(labels, minlength=k)
            empty = counts == 0
            sums[~empty] /= counts[~empty, None]
            norms = np.linalg.norm(sums, axis=1, keepdims=True)
            norms[norms < 1e-12] = 1.0
            centroids = (sums / norms).astype(np.float32)
            if empty.any():
                centroids[empty] = self._vectors[rng.choice(n, size=int(empty.sum()), replace=False)]
        labels = (self._vectors @ centroids.T).argmax(axis=1).astype(np.int32)
        self._centroids = centroids
        self._labels = labels
        self._lists = [np.nonzero(labels == j)[0].astype(np.int32) for j in range(k)]

    def search_ann(self, query_vector: EmbeddingVector, k: int) -> ResultSet:
        """Scan the lists whose centroids rank highest; approximate top-k."""
        if len(self._ids) == 0:
            raise EmptyIndex("index holds no vectors")
        if self._centroids is None:
            raise IndexNotBuilt("call build() before search_ann()")
        if query_vector.dim != self.dim:
            raise DimensionMismatch(f"query dim {query_vector.dim} != index dim {self.dim}")
        q = query_vector.values
        nlist_effective = self._centroids.shape[0]
        nprobe = self._effective_nprobe(nlist_effective)

        centroid_sims = self._centroids @ q
        probe_order = np.lexsort((np.arange(nlist_effective), -centroid_sims))[:nprobe]
        candidates = np.concatenate([self._lists[j] for j in probe_order]) if nprobe else np.empty(0, np.int32)
        if candidates.size == 0:
            return ResultSet(entries=[], exact=False)
        sims = self._vectors[candidates] @ q
        ids_arr = np.asarray(self._ids)[candidates]
        order = np.lexsort((ids_arr, -sims))[: min(k, candidates.size)]
        entries = [ResultEntry(str(ids_arr[i]), float(sims[i])) for i in order]
        return ResultSet(entries=entries, exact=False)

    # --- retrieval modes ---

    def query_vector_for(self, query: RetrievalQuery) -> EmbeddingVector:
        """Compose the effective query vector for a validated non-BATCH query."""
        if query.mode == QueryMode.MULTI_IMAGE:
            return aggregate_multi(query.seed_vectors)
        if query.mode == QueryMode.HYBRID:
            by_modality = {v.modality: v for v in query.seed_vectors}
            return compose_hybrid(
                by_modality[MODALITY_IMAGE], by_modality[MODALITY_TEXT], query.hybrid_alpha
            )
        return query.seed_vectors[0]

    def search(self, query: RetrievalQuery, *, exact: bool = True) -> ResultSet:
        """Execute one query end to end: compose, scan, exclude, re-rank."""
        query.validate()
        if query.mode == QueryMode.BATCH:
            raise InvalidQuery("BATCH queries go through batch_search()")
        qvec = self.query_vector_for(query)

        pool = query.k
        if query.diversity_clusters > 0:
            pool = query.candidate_multiplier * query.k
        fetch = min(pool + len(query.exclude_ids), len(self._ids))
        if fetch == 0:
            raise EmptyIndex("index holds no vectors")

        raw = self.search_exact(qvec, fetch) if exact else self.search_ann(qvec, fetch)
        kept = [e for e in raw.entries if e.record_id not in query.exclude_ids]

        if query.diversity_clusters > 0 and kept:
            cands = [RankedCandidate(e.record_id, e.similarity) for e in kept[:pool]]
            vecs = np.stack([self._vectors[self._row_of[c.record_id]] for c in cands])
            chosen = diversity_order(
                cands, vecs, query.diversity_clusters, min(query.k, len(cands)), query.seed
            )
            entries = [
                ResultEntry(c.record_id, c.similarity, cluster_id=rank) for c, rank in chosen
            ]
        else:
            entries = [
                ResultEntry(e.record_id, e.similarity) for e in kept[: query.k]
            ]
        return ResultSet(entries=entries, query_echo=query, exact=raw.exact)

    def batch_search(
        self, queries: Sequence[RetrievalQuery], *, exact: bool = True
    ) -> list[ResultSet | Exception]:
        """Positionally aligned results; per-element failures stay in place."""
        out: list[ResultSet | Exception] = []
        for q in queries:
            try:
                out.append(self.search(q, exact=exact))
            except Exception as exc:  # noqa: BLE001 - contract: report in place
                out.append(exc)
        return out

    # --- persistence: JSON header + versioned binary blob ---

    def save(self, path: str | Path) -> tuple[Path, Path]:
        base = Path(path)
        header_path = Path(str(base) + ".json")
        blob_path = Path(str(base) + ".bin")
        header = {
            "dimension": self.dim,
            "count": len(self._ids),
            "metric": "cosine",
            "seed": self.seed,
            "nlist": self.nlist,
            "nprobe": self.nprobe,
            "built": self.built,
            "blob_version": INDEX_BLOB_VERSION,
        }
        header_path.write_text(json.dumps(header, indent=2, sort_keys=True), encoding="utf-8")

        parts = [struct.pack("<B", INDEX_BLOB_VERSION)]
        parts.append(self._vectors.astype("<f4").tobytes())
        parts.append(struct.pack("<I", len(self._ids)))
        for rid in self._ids:
            raw = rid.encode("utf-8")
            parts.append(struct.pack("<H", len(raw)))
            parts.append(raw)
        if self.built:
            parts.append(struct.pack("<I", self._centroids.shape[0]))
            parts.append(self._centroids.astype("<f4").tobytes())
            parts.append(self._labels.astype("<i4").tobytes())
        blob_path.write_bytes(b"".join(parts))
        return header_path, blob_path

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        base = Path(path)
        header = json.loads(Path(str(base) + ".json").read_text(encoding="utf-8"))
        blob = Path(str(base) + ".bin").read_bytes()
        if not blob or blob[0] != INDEX_BLOB_VERSION:
            raise IndexNotBuilt(f"unsupported index blob version {blob[:1]!r}")
        idx = cls(
            dim=int(header["dimension"]),
            seed=int(header["seed"]),
            nlist=int(header["nlist"]),
            nprobe=header.get("nprobe"),
        )
        n = int(header["count"])
        off = 1
        vec_bytes = n * idx.dim * 4
        matrix = np.frombuffer(blob[off:off + vec_bytes], dtype="<f4").reshape(n, idx.dim).copy()
        idx._rows = [matrix[i] for i in range(n)]
        idx._matrix = matrix
        off += vec_bytes
        (count,) = struct.unpack_from("<I", blob, off)
        off += 4
        ids = []
        for _ in range(count):
            (ln,) = struct.unpack_from("<H", blob, off)
            off += 2
            ids.append(blob[off:off + ln].decode("utf-8"))
            off += ln
        idx._ids = ids
        idx._row_of = {rid: i for i, rid in enumerate(ids)}
        if header.get("built"):
            (ncent,) = struct.unpack_from("<I", blob, off)
            off += 4
            cent_bytes = ncent * idx.dim * 4
            idx._centroids = np.frombuffer(blob[off:off + cent_bytes], dtype="<f4").reshape(ncent, idx.dim).copy()
            off += cent_bytes
            idx._labels = np.frombuffer(blob[off:off + n * 4], dtype="<i4").copy()
            idx._lists = [np.nonzero(idx._labels == j)[0].astype(np.int32) for j in range(ncent)]
        return idx


def expand_batch(query: RetrievalQuery) -> list[RetrievalQuery]:
    """Fan a BATCH query out into one single-seed IMAGE query per seed."""
    query.validate()
    if query.mode != QueryMode.BATCH:
        return [query]
    return [
        RetrievalQuery(
            mode=QueryMode.IMAGE,
            seed_vectors=[seed],
            k=query.k,
            diversity_clusters=query.diversity_clusters,
            candidate_multiplier=query.candidate_multiplier,
            exclude_ids=query.exclude_ids,
            seed=query.seed,
        )
        for seed in query.seed_vectors
    ]
