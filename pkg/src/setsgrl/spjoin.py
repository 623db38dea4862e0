"""SpJoin: outer join of SpG rows into query-level features.

For a query Q = (u_0, ..., u_{q-1}) the joined proxy has

    union_members  S_Q = S_{u_0} | ... | S_{u_{q-1}}   (ascending)
    zq[x, j*k:(j+1)*k] = Z_{u_j, x} if x in S_{u_j} else 0
    presence[x, j]    = x in S_{u_j}

Column blocks follow the tuple order of the query, not node-id order.
"""

from __future__ import annotations

import heapq
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import TextIO

import numpy as np
from joblib import Parallel, delayed

from setsgrl.errors import JoinError, ValidationError
from setsgrl.graph import Query
from setsgrl.spg import SpG

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class JoinedQuery:
    query: Query
    union_members: np.ndarray
    zq: np.ndarray
    presence: np.ndarray

    @property
    def size(self) -> int:
        return int(self.union_members.size)


@dataclass
class OpCounter:
    """Debug counter: entries emitted by the merge and key comparisons it made."""

    merged: int = 0
    comparisons: int = 0
    queries: int = 0


class _Cursor:
    """Head of one sorted row inside the merge heap; counts its own comparisons."""

    __slots__ = ("key", "block", "pos", "tally")

    def __init__(self, key: int, block: int, tally: list[int]) -> None:
        self.key = key
        self.block = block
        self.pos = 0
        self.tally = tally

    def __lt__(self, other: _Cursor) -> bool:
        self.tally[0] += 1
        return (self.key, self.block) < (other.key, other.block)


def _merge_rows(spg: SpG, q: Query) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, int]:
    """
    |Q|-way heap merge of the sorted rows of ``q``.

    Each step pops the smallest (member, block) head, so a member shared by
    several rows is emitted once per row in block order. Work is
    O(sum |S_u| * log |Q|); the comparison count is returned alongside.
    """
    runs = [(m.tolist(), p.tolist()) for m, p in (spg.row(u) for u in q.nodes)]
    tally = [0]
    heap = [_Cursor(members[0], b, tally) for b, (members, _) in enumerate(runs) if members]
    heapq.heapify(heap)
    union: list[int] = []
    slot: list[int] = []
    block: list[int] = []
    ptrs: list[int] = []
    while heap:
        head = heap[0]
        members, pointers = runs[head.block]
        if not union or union[-1] != head.key:
            union.append(head.key)
        slot.append(len(union) - 1)
        block.append(head.block)
        ptrs.append(pointers[head.pos])
        head.pos += 1
        if head.pos < len(members):
            head.key = members[head.pos]
            heapq.heapreplace(heap, head)
        else:
            heapq.heappop(heap)
    return (
        np.array(union, dtype=np.int64),
        np.array(slot, dtype=np.int64),
        np.array(block, dtype=np.int64),
        np.array(ptrs, dtype=np.int64),
        tally[0],
    )


def join(spg: SpG, q: Query, counter: OpCounter | None = None) -> JoinedQuery:
    """Outer-join the rows of every node of ``q``; absent blocks are zero-filled."""
    q.check(spg.n)
    union, slot, block, ptr, comparisons = _merge_rows(spg, q)
    arity, k = q.arity, spg.k

    presence = np.zeros((union.size, arity), dtype=bool)
    presence[slot, block] = True
    zq = np.zeros((union.size, arity, k), dtype=spg.bank.dtype)
    zq[slot, block] = spg.bank[ptr]

    if counter is not None:
        counter.merged += int(slot.size)
        counter.comparisons += comparisons
        counter.queries += 1
    return JoinedQuery(
        query=q,
        union_members=union.astype(np.int32),
        zq=zq.reshape(union.size, arity * k),
        presence=presence,
    )


def join_cost(spg: SpG, q: Query) -> int:
    """Merge work of a query: sum of its row lengths."""
    sizes = spg.row_sizes()
    return int(sum(int(sizes[u]) for u in q.nodes))


def balance_groups(costs: Sequence[int], groups: int) -> list[list[int]]:
    """
    Longest-processing-time partition of query indices into ``groups`` bins.

    Queries are taken by descending cost (ties by index) and each goes to the
    currently lightest bin (ties by bin number).
    """
    if groups < 1:
        raise ValidationError(f"group count must be >= 1, got {groups}")
    order = sorted(range(len(costs)), key=lambda i: (-costs[i], i))
    heap = [(0, g) for g in range(groups)]
    out: list[list[int]] = [[] for _ in range(groups)]
    for i in order:
        load, g = heapq.heappop(heap)
        out[g].append(i)
        heapq.heappush(heap, (load + int(costs[i]), g))
    return out


def _join_group(spg: SpG, queries: Sequence[Query], idx: list[int]) -> list[JoinedQuery]:
    out = []
    for i in idx:
        try:
            out.append(join(spg, queries[i]))
        except Exception as err:
            raise JoinError(i, err) from err
    return out


def join_batch(spg: SpG, queries: Sequence[Query], threads: int = 1) -> list[JoinedQuery]:
    """Join many queries on ``threads`` workers; output order follows input order."""
    if threads < 1:
        raise ValidationError(f"threads must be >= 1, got {threads}")
    if not queries:
        return []
    if threads == 1:
        return _join_group(spg, queries, list(range(len(queries))))

    groups = [g for g in balance_groups([join_cost(spg, q) for q in queries], threads) if g]
    results = Parallel(n_jobs=threads, backend="threading")(
        delayed(_join_group)(spg, queries, g) for g in groups
    )
    out: list[JoinedQuery | None] = [None] * len(queries)
    for idx, joined in zip(groups, results):
        for i, jq in zip(idx, joined):
            out[i] = jq
    return out  # type: ignore[return-value]


def dump_joined(jq: JoinedQuery, sink: TextIO) -> None:
    """Text table: member id, presence bits, then one column group per query node."""
    k = jq.zq.shape[1] // jq.query.arity if jq.query.arity else 0
    head = ["member", "presence"] + [
        f"z[{u}][{i}]" for u in jq.query.nodes for i in range(k)
    ]
    sink.write("\t".join(head) + "\n")
    for x, bits, row in zip(jq.union_members, jq.presence, jq.zq):
        fields = [str(int(x)), "".join("1" if b else "0" for b in bits)]
        fields += [repr(v.item()) for v in row]
        sink.write("\t".join(fields) + "\n")
