"""SpG: compressed sparse store of all node sets with a deduplicated feature bank.

Layout (all 32-bit):

    indptr  (n + 1)   row offsets, indptr[u + 1] = indptr[u] + |S_u|
    indices (nnz)     members of every set, each row strictly ascending
    sfptr   (nnz)     row of ``bank`` holding Z_{u, x}
    bank    (c, k)    unique feature rows, ordered by first occurrence

Feature rows are interned on their raw stored bytes, so two pointers are equal
exactly when the original rows are bitwise equal.
"""

from __future__ import annotations

import logging
import struct
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from setsgrl.errors import ValidationError
from setsgrl.sampling import NodeSetSample

logger = logging.getLogger(__name__)

INDEX_DTYPE = np.dtype("<i4")
INDEX_LIMIT = np.iinfo(np.int32).max

SNAPSHOT_MAGIC = b"SPGSTORE"
SNAPSHOT_VERSION = 1
# magic, version, n, k, c, nnz, index width, scalar width, scalar kind
_HEADER = struct.Struct("<8sHQQQQBBc")


@dataclass(frozen=True, eq=False)
class SpG:
    indptr: np.ndarray
    indices: np.ndarray
    sfptr: np.ndarray
    bank: np.ndarray

    @property
    def n(self) -> int:
        return int(self.indptr.size - 1)

    @property
    def k(self) -> int:
        return int(self.bank.shape[1])

    @property
    def c(self) -> int:
        return int(self.bank.shape[0])

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def row_sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    def row(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        """Member ids and feature pointers of S_u (views, no copy)."""
        if not 0 <= int(u) < self.n:
            raise ValidationError(f"node id {u} out of range [0, {self.n})")
        lo, hi = int(self.indptr[u]), int(self.indptr[u + 1])
        return self.indices[lo:hi], self.sfptr[lo:hi]

    def features(self, u: int) -> np.ndarray:
        _, ptr = self.row(u)
        return self.bank[ptr]

    def validate(self) -> None:
        ip = self.indptr
        if ip.ndim != 1 or ip.size < 1 or int(ip[0]) != 0:
            raise ValidationError("indptr must start at 0")
        if np.any(np.diff(ip) < 1):
            raise ValidationError("every row must hold at least its seed")
        if self.indices.size != self.nnz or self.sfptr.size != self.nnz:
            raise ValidationError("indices/sfptr length differs from indptr[n]")
        if self.bank.ndim != 2 or self.c > max(self.nnz, 0):
            raise ValidationError("feature bank has an invalid shape")
        if self.nnz and (self.sfptr.min() < 0 or self.sfptr.max() >= self.c):
            raise ValidationError("sfptr entry outside the feature bank")
        if self.nnz and (self.indices.min() < 0 or self.indices.max() >= self.n):
            raise ValidationError("member id outside [0, n)")
        # strictly ascending inside each row: a non-increasing step may only sit on a row boundary
        steps = np.flatnonzero(np.diff(self.indices) <= 0) + 1
        if steps.size and not np.all(np.isin(steps, ip[1:-1])):
            raise ValidationError("row segment is not strictly ascending")
        seeds = np.repeat(np.arange(self.n), self.row_sizes())
        if np.count_nonzero(self.indices == seeds) != self.n:
            raise ValidationError("a seed is missing from its own row")
        if self.c > 1 and self.k > 0:
            if _unique_rows(self.bank)[0].shape[0] != self.c:
                raise ValidationError("feature bank rows are not pairwise distinct")

    def stats(self) -> dict[str, Any]:
        """Entry counts and byte accounting of the stored arrays."""
        bytes_structure = int(self.indptr.nbytes + self.indices.nbytes + self.sfptr.nbytes)
        bytes_features = int(self.bank.nbytes)
        return {
            "n": self.n,
            "k": self.k,
            "total_entries": self.nnz,
            "unique_features": self.c,
            "bytes_structure": bytes_structure,
            "bytes_features": bytes_features,
            "bytes_total": bytes_structure + bytes_features,
            "dedup_ratio": (self.nnz / self.c) if self.c else 0.0,
            "index_width": INDEX_DTYPE.itemsize,
            "scalar_width": self.bank.dtype.itemsize,
        }


def _unique_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bitwise-unique rows in first-occurrence order, and each row's bank index."""
    rows = np.ascontiguousarray(rows)
    keys = rows.view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))).reshape(-1)
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rows[first[order]], rank[inverse]


def intern_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deduplicate feature rows by raw bytes -> (bank, pointers)."""
    if rows.shape[0] == 0:
        return rows[:0], np.empty(0, dtype=INDEX_DTYPE)
    if rows.shape[1] == 0:
        return rows[:1], np.zeros(rows.shape[0], dtype=INDEX_DTYPE)
    bank, ptr = _unique_rows(rows)
    return bank, ptr.astype(INDEX_DTYPE)


def build_spg(samples: Sequence[NodeSetSample]) -> SpG:
    """Consolidate per-seed samples (indexed by seed) into a frozen SpG."""
    n = len(samples)
    if n == 0:
        return SpG(
            indptr=np.zeros(1, dtype=INDEX_DTYPE),
            indices=np.empty(0, dtype=INDEX_DTYPE),
            sfptr=np.empty(0, dtype=INDEX_DTYPE),
            bank=np.empty((0, 0), dtype=np.int32),
        )
    ks = {s.k for s in samples}
    if len(ks) != 1:
        raise ValidationError(f"inconsistent feature dimension across samples: {sorted(ks)}")
    dtypes = {s.features.dtype for s in samples}
    if len(dtypes) != 1:
        raise ValidationError(f"inconsistent feature dtype across samples: {dtypes}")
    for u, s in enumerate(samples):
        if s.seed != u:
            raise ValidationError(f"sample #{u} belongs to seed {s.seed}")
        s.check()

    sizes = np.array([s.size for s in samples], dtype=np.int64)
    total = int(sizes.sum())
    if total > INDEX_LIMIT or n > INDEX_LIMIT:
        raise ValidationError(f"SpG needs {total} entries; 32-bit indexing caps at {INDEX_LIMIT}")

    indptr = np.zeros(n + 1, dtype=INDEX_DTYPE)
    indptr[1:] = np.cumsum(sizes)
    indices = np.concatenate([s.members for s in samples]).astype(INDEX_DTYPE)
    rows = np.concatenate([s.features for s in samples], axis=0)
    bank, sfptr = intern_rows(rows)

    spg = SpG(indptr=indptr, indices=indices, sfptr=sfptr, bank=np.ascontiguousarray(bank))
    for arr in (spg.indptr, spg.indices, spg.sfptr, spg.bank):
        arr.setflags(write=False)
    logger.info(
        "Built SpG: n=%d, entries=%d, unique features=%d (dedup %.1fx)",
        spg.n,
        spg.nnz,
        spg.c,
        spg.stats()["dedup_ratio"],
    )
    return spg


def write_spg(spg: SpG, path: Path) -> Path:
    """Binary snapshot: header, then indptr, indices, sfptr, bank (little-endian)."""
    kind = spg.bank.dtype.kind
    if kind not in ("i", "f"):
        raise ValidationError(f"unsupported bank dtype {spg.bank.dtype}")
    scalar = np.dtype(f"<{kind}{spg.bank.dtype.itemsize}")
    header = _HEADER.pack(
        SNAPSHOT_MAGIC,
        SNAPSHOT_VERSION,
        spg.n,
        spg.k,
        spg.c,
        spg.nnz,
        INDEX_DTYPE.itemsize,
        scalar.itemsize,
        kind.encode("ascii"),
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(header)
        for arr in (spg.indptr, spg.indices, spg.sfptr):
            fh.write(arr.astype(INDEX_DTYPE).tobytes())
        fh.write(spg.bank.astype(scalar).tobytes())
    return path


def read_spg(path: Path) -> SpG:
    """Load a snapshot and check every SpG invariant."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValidationError(f"{path}: truncated SpG header")
    magic, version, n, k, c, nnz, iw, sw, kind = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValidationError(f"{path}: not an SpG snapshot")
    if version != SNAPSHOT_VERSION:
        raise ValidationError(f"{path}: unsupported snapshot version {version}")
    if iw != INDEX_DTYPE.itemsize:
        raise ValidationError(f"{path}: unsupported index width {iw}")
    scalar = np.dtype(f"<{kind.decode('ascii')}{sw}")
    expected = _HEADER.size + iw * (n + 1 + 2 * nnz) + sw * c * k
    if len(data) != expected:
        raise ValidationError(f"{path}: size {len(data)} bytes, header implies {expected}")

    offset = _HEADER.size

    def take(count: int, dtype: np.dtype) -> np.ndarray:
        nonlocal offset
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        offset += count * dtype.itemsize
        return arr

    indptr = take(n + 1, INDEX_DTYPE)
    indices = take(nnz, INDEX_DTYPE)
    sfptr = take(nnz, INDEX_DTYPE)
    bank = take(c * k, scalar).reshape(c, k)
    spg = SpG(indptr=indptr, indices=indices, sfptr=sfptr, bank=bank)
    if spg.nnz != nnz:
        raise ValidationError(f"{path}: indptr[n]={spg.nnz} disagrees with header {nnz}")
    spg.validate()
    return spg
