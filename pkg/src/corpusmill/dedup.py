"""Exact and near-duplicate removal for documents and parallel pairs.

Survivor selection is canonical (lexicographically smallest id wins) so
results are independent of input order and shard partitioning.
"""

from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass

import numpy as np

from .records import DataError, Document, Manifest, ManifestBuilder, ParallelPair

# (a*x + b) mod p universal family over a 31-bit domain; products stay
# below 2^62 so the whole thing vectorizes in uint64 without overflow.
_PRIME = (1 << 31) - 1
_SENTINEL = (1 << 64) - 1


class DedupError(DataError):
    pass


class SignatureError(DataError):
    pass


def normalize(text: str) -> str:
    """Aggressive text canonicalization for duplicate keys.

    Lowercase, strip accents via NFKD decomposition, drop digits and
    punctuation/symbol characters, collapse whitespace. Idempotent.
    """
    decomposed = unicodedata.normalize("NFKD", text)
    kept = []
    for ch in decomposed:
        cat = unicodedata.category(ch)
        if cat == "Mn":  # combining marks left over from decomposition
            continue
        if cat.startswith(("P", "S", "N")):
            continue
        kept.append(ch.lower())
    return " ".join("".join(kept).split())


def digest(text: str) -> str:
    """Stable 128-bit content key (unlike hash(), identical across runs)."""
    return hashlib.blake2b(text.encode("utf-8"), digest_size=16).hexdigest()


def doc_key(doc: Document) -> str:
    return digest(doc.text)


def normalized_doc_key(doc: Document) -> str:
    return digest(normalize(doc.text))


def pair_key(pair: ParallelPair) -> str:
    return digest(normalize(pair.src_text) + "\t" + normalize(pair.tgt_text))


def _dedup_by_key(records, key_of, stage: str, clusters_out: list | None):
    records = list(records)
    ids = set()
    for rec in records:
        if rec.id in ids:
            raise DedupError(f"duplicate id {rec.id!r}")
        ids.add(rec.id)

    survivor: dict[str, str] = {}
    for rec in records:
        key = key_of(rec)
        if key not in survivor or rec.id < survivor[key]:
            survivor[key] = rec.id

    manifest = ManifestBuilder(stage)
    out = []
    for rec in records:
        manifest.saw()
        winner = survivor[key_of(rec)]
        if winner == rec.id:
            out.append(rec)
            manifest.kept()
        else:
            manifest.rejected("duplicate")
            if clusters_out is not None:
                clusters_out.append((winner, rec.id))
    return out, manifest.freeze()


def exact_dedup(records, key_of=doc_key, clusters_out: list | None = None) -> tuple[list[Document], Manifest]:
    """Keep the smallest-id record per key; output preserves input order."""
    return _dedup_by_key(records, key_of, "dedup", clusters_out)


def pair_dedup(pairs, clusters_out: list | None = None) -> tuple[list[ParallelPair], Manifest]:
    """Duplicate removal for parallel pairs on normalized (src, tgt) content."""
    return _dedup_by_key(pairs, pair_key, "pair_dedup", clusters_out)


@dataclass(frozen=True)
class MinHashSignature:
    seed: int
    n_hashes: int
    shingle_len: int
    values: tuple[int, ...]


def shingles(text: str, shingle_len: int) -> set[str]:
    """Character shingle set of the normalized text."""
    norm = normalize(text)
    return {norm[i : i + shingle_len] for i in range(len(norm) - shingle_len + 1)}


def hash_params(seed: int, n_hashes: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    a = rng.integers(1, _PRIME, size=n_hashes, dtype=np.uint64)
    b = rng.integers(0, _PRIME, size=n_hashes, dtype=np.uint64)
    return a, b


def base_hashes(shingle_set: set[str]) -> np.ndarray:
    """Stable 31-bit base hash per shingle (input points of the hash family)."""
    out = np.empty(len(shingle_set), dtype=np.uint64)
    for i, item in enumerate(sorted(shingle_set)):
        h64 = int.from_bytes(hashlib.blake2b(item.encode("utf-8"), digest_size=8).digest(), "big")
        out[i] = h64 % _PRIME
    return out


def signature_values(base: np.ndarray, seed: int, n_hashes: int) -> np.ndarray:
    a, b = hash_params(seed, n_hashes)
    # (n_hashes, n_shingles); a, base < 2^31 so a*base + b < 2^63
    table = (a[:, None] * base[None, :] + b[:, None]) % np.uint64(_PRIME)
    return table.min(axis=1)


def minhash_signature(
    text: str, shingle_len: int = 5, n_hashes: int = 128, seed: int = 0
) -> MinHashSignature:
    """Per-hash minima over the text's shingle set.

    The empty shingle set maps to an all-sentinel signature that only
    compares equal to itself.
    """
    if shingle_len < 1 or n_hashes < 1:
        raise SignatureError("shingle_len and n_hashes must be >= 1")
    shingle_set = shingles(text, shingle_len)
    if not shingle_set:
        return MinHashSignature(seed, n_hashes, shingle_len, (_SENTINEL,) * n_hashes)
    values = signature_values(base_hashes(shingle_set), seed, n_hashes)
    return MinHashSignature(seed, n_hashes, shingle_len, tuple(int(v) for v in values))


def jaccard_estimate(a: MinHashSignature, b: MinHashSignature) -> float:
    """Fraction of agreeing signature components."""
    if (a.seed, a.n_hashes, a.shingle_len) != (b.seed, b.n_hashes, b.shingle_len):
        raise SignatureError("signatures built with different parameters")
    agree = sum(1 for x, y in zip(a.values, b.values) if x == y)
    return agree / a.n_hashes


class _UnionFind:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        root = x
        while self.parent.get(root, root) != root:
            root = self.parent[root]
        while self.parent.get(x, x) != x:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: str, y: str) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            # root at the smaller id so cluster representatives are canonical
            if ry < rx:
                rx, ry = ry, rx
            self.parent[ry] = rx


def near_dedup(
    records,
    bands: int = 16,
    rows: int = 8,
    threshold: float = 0.8,
    shingle_len: int = 5,
    seed: int = 0,
    clusters_out: list | None = None,
) -> tuple[list[Document], Manifest]:
    """MinHash + banded LSH near-duplicate removal, smallest id survives per cluster.

    Banding groups candidates; a candidate pair is confirmed only when its
    estimated Jaccard similarity reaches the threshold.
    """
    if bands < 1 or rows < 1:
        raise SignatureError("bands and rows must be >= 1")
    n_hashes = bands * rows
    records = list(records)
    ids = set()
    for rec in records:
        if rec.id in ids:
            raise DedupError(f"duplicate id {rec.id!r}")
        ids.add(rec.id)

    sigs = {rec.id: minhash_signature(rec.text, shingle_len, n_hashes, seed) for rec in records}

    buckets: dict[tuple[int, tuple[int, ...]], list[str]] = {}
    for rec_id in sorted(sigs):
        sig = sigs[rec_id]
        for band in range(bands):
            key = (band, sig.values[band * rows : (band + 1) * rows])
            buckets.setdefault(key, []).append(rec_id)

    uf = _UnionFind()
    checked: set[tuple[str, str]] = set()
    for members in buckets.values():
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                pair = (members[i], members[j])
                if pair in checked:
                    continue
                checked.add(pair)
                if jaccard_estimate(sigs[pair[0]], sigs[pair[1]]) >= threshold:
                    uf.union(*pair)

    manifest = ManifestBuilder("near_dedup")
    out = []
    for rec in records:
        manifest.saw()
        root = uf.find(rec.id)
        if root == rec.id:
            out.append(rec)
            manifest.kept()
        else:
            manifest.rejected("near_duplicate")
            if clusters_out is not None:
                clusters_out.append((root, rec.id))
    return out, manifest.freeze()


def format_clusters(clusters: list[tuple[str, str]]) -> str:
    """`survivor_id<TAB>dropped_id` lines for the cluster side-output file."""
    return "".join(f"{survivor}\t{dropped}\n" for survivor, dropped in clusters)
