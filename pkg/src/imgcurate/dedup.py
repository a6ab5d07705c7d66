"""Feature-level near-duplicate detection over embedding vectors.

Records whose vectors reach the similarity threshold are linked, and
connected components (single-link transitive closure) become duplicate
groups: chains of edits of the same source image stay together even when
the endpoints drift below the threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .embeddings import EmbeddingVector
from .errors import DimensionMismatch, UnknownRecordInGroup
from .records import Manifest

DEFAULT_DUPLICATE_THRESHOLD = 0.92

KEEP_REPRESENTATIVE = "KEEP_REPRESENTATIVE"
DROP_ALL_DUPES = "DROP_ALL_DUPES"


@dataclass
class DuplicateGroup:
    representative: str
    members: list[str]
    max_internal_similarity: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "representative": self.representative,
                "members": self.members,
                "max_internal_similarity": self.max_internal_similarity,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "DuplicateGroup":
        obj = json.loads(line)
        return cls(
            representative=obj["representative"],
            members=list(obj["members"]),
            max_internal_similarity=float(obj["max_internal_similarity"]),
        )


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def find_near_duplicates(
    vectors: Mapping[str, EmbeddingVector],
    threshold: float = DEFAULT_DUPLICATE_THRESHOLD,
    quality_scores: Optional[Mapping[str, float]] = None,
) -> list[DuplicateGroup]:
    """Group records whose pairwise cosine reaches ``threshold``.

    Components of size >= 2 become groups. The representative is the member
    with the highest quality score when scores are supplied, otherwise the
    lowest record_id; ties fall back to the lowest record_id.
    """
    ids = sorted(vectors)
    n = len(ids)
    if n < 2:
        return []
    dims = {vectors[r].dim for r in ids}
    if len(dims) > 1:
        raise DimensionMismatch(f"mixed vector dimensions: {sorted(dims)}")
    matrix = np.stack([vectors[r].values for r in ids]).astype(np.float32)

    uf = _UnionFind(n)
    block = max(1, min(1024, (1 << 24) // max(n, 1)))
    for start in range(0, n, block):
        stop = min(start + block, n)
        sims = matrix[start:stop] @ matrix.T
        for local, row in enumerate(range(start, stop)):
            hits = np.nonzero(sims[local, row + 1:] >= threshold)[0]
            for h in hits:
                uf.union(row, row + 1 + int(h))

    components: dict[int, list[int]] = {}
    for i in range(n):
        components.setdefault(uf.find(i), []).append(i)

    groups: list[DuplicateGroup] = []
    for members in components.values():
        if len(members) < 2:
            continue
        member_ids = sorted(ids[i] for i in members)
        sub = matrix[members] @ matrix[members].T
        np.fill_diagonal(sub, -np.inf)
        max_sim = float(np.clip(sub.max(), -1.0, 1.0))
        if quality_scores:
            rep = min(member_ids, key=lambda r: (-quality_scores.get(r, float("-inf")), r))
        else:
            rep = member_ids[0]
        groups.append(
            DuplicateGroup(
                representative=rep,
                members=member_ids,
                max_internal_similarity=max_sim,
            )
        )
    groups.sort(key=lambda g: g.members[0])
    return groups


def dedup_manifest(
    manifest: Manifest,
    groups: Sequence[DuplicateGroup],
    policy: str = KEEP_REPRESENTATIVE,
    *,
    strict: bool = False,
) -> Manifest:
    """Drop grouped duplicates from a manifest, preserving input order.

    Members missing from the manifest are treated as already removed, which
    makes the operation idempotent; ``strict`` turns them into
    UnknownRecordInGroup errors instead.
    """
    if policy not in (KEEP_REPRESENTATIVE, DROP_ALL_DUPES):
        raise ValueError(f"unknown policy {policy!r}")
    known = set(manifest.record_ids())
    drop: set[str] = set()
    for group in groups:
        if strict:
            for member in group.members:
                if member not in known:
                    raise UnknownRecordInGroup(f"{member} not in manifest")
        if policy == KEEP_REPRESENTATIVE:
            drop.update(m for m in group.members if m != group.representative)
        else:
            drop.update(group.members)
    entries = [e for e in manifest.entries if e.record_id not in drop]
    return Manifest.from_entries(entries, metadata=manifest.metadata)


def write_groups(groups: Sequence[DuplicateGroup], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for g in groups:
            fh.write(g.to_json() + "\n")


def read_groups(path: str | Path) -> list[DuplicateGroup]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(DuplicateGroup.from_json(line))
    return out
