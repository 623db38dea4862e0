"""Compressed adjacency for simple undirected graphs, plus edge-list and query-file I/O.

Node ids are dense non-negative 32-bit integers. Every neighbor row is strictly
ascending and the adjacency is symmetric; a ``Graph`` is frozen after
construction and safe to share between threads.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np
import pandas as pd
from sklearn.preprocessing import StandardScaler

from setsgrl.errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

ID_DTYPE = np.int32
MAX_NODES = np.iinfo(np.int32).max


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    n: int
    adj_offsets: np.ndarray
    adj_targets: np.ndarray
    attrs: np.ndarray | None = None
    id_map: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "adj_offsets", _freeze(self.adj_offsets.astype(np.int64)))
        object.__setattr__(self, "adj_targets", _freeze(self.adj_targets.astype(ID_DTYPE)))
        if self.attrs is not None:
            attrs = np.asarray(self.attrs, dtype=np.float64)
            if attrs.ndim != 2 or attrs.shape[0] != self.n:
                raise ValidationError(
                    f"attribute table has shape {attrs.shape}, expected ({self.n}, d)"
                )
            object.__setattr__(self, "attrs", _freeze(attrs))

    @property
    def d(self) -> int:
        return 0 if self.attrs is None else int(self.attrs.shape[1])

    @property
    def num_arcs(self) -> int:
        return int(self.adj_offsets[-1])

    @property
    def num_edges(self) -> int:
        return self.num_arcs // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adj_offsets)

    def degree(self, u: int) -> int:
        self.check_node(u)
        return int(self.adj_offsets[u + 1] - self.adj_offsets[u])

    def check_node(self, u: int) -> None:
        if not 0 <= int(u) < self.n:
            raise ValidationError(f"node id {u} out of range [0, {self.n})")

    def neighbors(self, u: int) -> np.ndarray:
        self.check_node(u)
        return self.adj_targets[self.adj_offsets[u] : self.adj_offsets[u + 1]]

    def gather_neighbors(self, nodes: np.ndarray) -> np.ndarray:
        """Concatenate the neighbor rows of ``nodes`` (no dedup)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        starts = self.adj_offsets[nodes]
        lens = self.adj_offsets[nodes + 1] - starts
        total = int(lens.sum())
        if total == 0:
            return np.empty(0, dtype=ID_DTYPE)
        shift = np.repeat(starts - (np.cumsum(lens) - lens), lens)
        return self.adj_targets[shift + np.arange(total)]

    def edges(self) -> np.ndarray:
        """Undirected edges as an (E, 2) array with u < v, sorted lexicographically."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        dst = self.adj_targets.astype(np.int64)
        keep = src < dst
        return np.stack([src[keep], dst[keep]], axis=1)

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        i = int(np.searchsorted(row, v))
        return i < row.size and int(row[i]) == int(v)

    def with_attrs(self, attrs: np.ndarray | None) -> Graph:
        return Graph(self.n, self.adj_offsets, self.adj_targets, attrs, self.id_map)


def neighbors(g: Graph, u: int) -> np.ndarray:
    return g.neighbors(u)


def _edge_codes(pairs: np.ndarray, n: int) -> np.ndarray:
    lo = np.minimum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
    hi = np.maximum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
    return lo * n + hi


def from_edges(
    n: int,
    pairs: np.ndarray | Sequence[tuple[int, int]],
    attrs: np.ndarray | None = None,
) -> Graph:
    """Build a symmetric simple graph; self-loops dropped, duplicates collapsed."""
    if n < 0 or n > MAX_NODES:
        raise ValidationError(f"node count {n} outside [0, {MAX_NODES}]")
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise ValidationError(f"edge endpoint outside [0, {n})")
    arr = arr[arr[:, 0] != arr[:, 1]]
    codes = np.unique(_edge_codes(arr, n)) if arr.size else np.empty(0, dtype=np.int64)
    lo, hi = codes // max(n, 1), codes % max(n, 1)
    src = np.concatenate([lo, hi])
    dst = np.concatenate([hi, lo])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
    return Graph(n=n, adj_offsets=offsets, adj_targets=dst, attrs=attrs)


def load_edge_list(source: TextIO, dedup: bool = True, remap: bool = False) -> Graph:
    """
    Parse a whitespace edge list.

    Lines starting with '#' are comments; an optional ``n=<count>`` header fixes the
    node count (isolated trailing ids). With ``dedup=False`` a repeated undirected edge
    is rejected instead of collapsed. ``remap=True`` compacts sparse ids to
    ``0..n-1`` in ascending order and keeps the table in ``Graph.id_map``.
    """
    declared_n: int | None = None
    pairs: list[tuple[int, int]] = []
    for line_number, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("n="):
            try:
                declared_n = int(line[2:])
            except ValueError as err:
                raise ParseError(f"bad node-count header {line!r}", line_number) from err
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected two node ids, got {line!r}", line_number)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as err:
            raise ParseError(f"non-integer node id in {line!r}", line_number) from err
        if u < 0 or v < 0:
            raise ValidationError(f"line {line_number}: negative node id in {line!r}")
        pairs.append((u, v))

    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    id_map: np.ndarray | None = None
    if remap and arr.size:
        id_map, flat = np.unique(arr, return_inverse=True)
        arr = flat.reshape(-1, 2)
    n = int(arr.max()) + 1 if arr.size else 0
    if declared_n is not None:
        if declared_n < n:
            raise ValidationError(f"header n={declared_n} but ids reach {n - 1}")
        n = declared_n

    if not dedup and arr.size:
        loops = arr[:, 0] == arr[:, 1]
        codes = _edge_codes(arr[~loops], max(n, 1))
        if np.unique(codes).size != codes.size:
            raise ValidationError("duplicate edges present and dedup disabled")

    g = from_edges(n, arr)
    if id_map is not None:
        g = Graph(g.n, g.adj_offsets, g.adj_targets, None, id_map)
    logger.debug("Loaded graph: n=%d, edges=%d", g.n, g.num_edges)
    return g


def read_edge_list(path: Path, dedup: bool = True, remap: bool = False) -> Graph:
    with Path(path).open(encoding="utf-8") as fh:
        return load_edge_list(fh, dedup=dedup, remap=remap)


def write_edge_list(g: Graph, sink: TextIO) -> None:
    sink.write(f"n={g.n}\n")
    for u, v in g.edges():
        sink.write(f"{u} {v}\n")


def load_attrs(path: Path, n: int, standardize: bool = False) -> np.ndarray:
    """One whitespace-separated row of reals per node; row index is the node id."""
    table = pd.read_csv(path, sep=r"\s+", header=None, comment="#", dtype=np.float64)
    if table.shape[0] != n:
        raise ValidationError(f"attribute table {path} has {table.shape[0]} rows, expected {n}")
    values = table.to_numpy()
    if not np.isfinite(values).all():
        raise ValidationError(f"attribute table {path} contains non-finite values")
    if standardize:
        values = StandardScaler().fit_transform(values)
    return values


def mask_edges(g: Graph, hidden: Iterable[tuple[int, int]] | np.ndarray) -> Graph:
    """Return a copy of ``g`` without the given undirected edges."""
    pairs = np.asarray(list(hidden) if not isinstance(hidden, np.ndarray) else hidden)
    pairs = pairs.astype(np.int64).reshape(-1, 2)
    if pairs.size == 0:
        return g
    if pairs.min() < 0 or pairs.max() >= g.n:
        raise ValidationError("hidden pair references a node outside the graph")
    all_edges = g.edges()
    present = _edge_codes(all_edges, g.n)
    drop = np.unique(_edge_codes(pairs, g.n))
    missing = drop[~np.isin(drop, present)]
    if missing.size:
        lo, hi = int(missing[0] // g.n), int(missing[0] % g.n)
        raise ValidationError(f"edge ({lo}, {hi}) is not present in the graph")
    kept = all_edges[~np.isin(present, drop)]
    return from_edges(g.n, kept, attrs=g.attrs)


def add_edges(g: Graph, pairs: np.ndarray | Sequence[tuple[int, int]]) -> Graph:
    extra = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return from_edges(g.n, np.concatenate([g.edges(), extra]), attrs=g.attrs)


@dataclass(frozen=True)
class Query:
    nodes: tuple[int, ...]

    def __post_init__(self) -> None:
        nodes = tuple(int(x) for x in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if len(nodes) < 2:
            raise ValidationError(f"query arity must be >= 2, got {len(nodes)}")
        if len(set(nodes)) != len(nodes):
            raise ValidationError(f"query {nodes} repeats a node")
        if min(nodes) < 0:
            raise ValidationError(f"query {nodes} has a negative id")

    @property
    def arity(self) -> int:
        return len(self.nodes)

    def check(self, n: int) -> None:
        if max(self.nodes) >= n:
            raise ValidationError(f"query {self.nodes} references a node outside [0, {n})")


@dataclass(frozen=True)
class LabeledQuery:
    query: Query
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label}")


def load_queries(source: TextIO) -> tuple[int, list[Query], list[int] | None]:
    """
    Read a query file: ``arity=<k>`` header, then one query per line with an
    optional trailing label column. Returns (arity, queries, labels or None).
    """
    arity: int | None = None
    queries: list[Query] = []
    labels: list[int] = []
    labeled: bool | None = None
    for line_number, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if arity is None:
            if not line.startswith("arity="):
                raise ParseError("missing 'arity=<k>' header", line_number)
            try:
                arity = int(line[len("arity=") :])
            except ValueError as err:
                raise ParseError(f"bad arity header {line!r}", line_number) from err
            if arity < 2:
                raise ValidationError(f"line {line_number}: arity must be >= 2")
            continue
        try:
            values = [int(p) for p in line.split()]
        except ValueError as err:
            raise ParseError(f"non-integer field in {line!r}", line_number) from err
        if len(values) not in (arity, arity + 1):
            raise ParseError(f"expected {arity} ids (+ label), got {len(values)}", line_number)
        has_label = len(values) == arity + 1
        if labeled is None:
            labeled = has_label
        elif labeled != has_label:
            raise ParseError("label column present on some lines only", line_number)
        try:
            queries.append(Query(tuple(values[:arity])))
            if has_label:
                labels.append(LabeledQuery(queries[-1], values[arity]).label)
        except ValidationError as err:
            raise ParseError(str(err), line_number) from err
    if arity is None:
        raise ParseError("empty query file", 0)
    return arity, queries, (labels if labeled else None)


def read_queries(path: Path) -> tuple[int, list[Query], list[int] | None]:
    with Path(path).open(encoding="utf-8") as fh:
        return load_queries(fh)


def write_queries(
    sink: TextIO, queries: Sequence[Query], labels: Sequence[int] | None = None
) -> None:
    if not queries:
        raise ValidationError("cannot write an empty query file (arity unknown)")
    arity = queries[0].arity
    sink.write(f"arity={arity}\n")
    for i, q in enumerate(queries):
        if q.arity != arity:
            raise ValidationError(f"query #{i} has arity {q.arity}, file arity is {arity}")
        fields = [str(x) for x in q.nodes]
        if labels is not None:
            fields.append(str(int(labels[i])))
        sink.write(" ".join(fields) + "\n")
