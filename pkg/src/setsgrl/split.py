"""Train/valid/test query splits for link and higher-order prediction."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from setsgrl.errors import ValidationError
from setsgrl.graph import Graph, LabeledQuery, Query, from_edges, mask_edges
from setsgrl.model import negative_sample, query_key

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitFractions:
    train: float
    valid: float = 0.0
    test: float = 0.0

    def __post_init__(self) -> None:
        parts = (self.train, self.valid, self.test)
        if min(parts) < 0.0 or sum(parts) > 1.0 + 1e-12:
            raise ValidationError(f"split fractions must be >= 0 and sum to <= 1, got {parts}")

    def counts(self, total: int) -> tuple[int, int, int]:
        train, valid, test = (int(round(f * total)) for f in (self.train, self.valid, self.test))
        return train, valid, test


@dataclass(frozen=True, eq=False)
class EvalSet:
    """Each positive with its own fixed negatives: positives (P, q), negatives (P, N, q)."""

    positives: np.ndarray
    negatives: np.ndarray

    @property
    def size(self) -> int:
        return int(self.positives.shape[0])

    def positive_queries(self) -> list[Query]:
        return [Query(tuple(row)) for row in self.positives]

    def negative_queries(self) -> list[Query]:
        flat = self.negatives.reshape(-1, self.negatives.shape[-1])
        return [Query(tuple(row)) for row in flat]

    def labeled(self) -> list[LabeledQuery]:
        pos = [LabeledQuery(q, 1) for q in self.positive_queries()]
        return pos + [LabeledQuery(q, 0) for q in self.negative_queries()]


@dataclass(frozen=True, eq=False)
class SplitResult:
    graph: Graph
    train: list[LabeledQuery]
    valid: EvalSet
    test: EvalSet

    @property
    def arity(self) -> int:
        return int(self.test.positives.shape[1])

    def positive_keys(self) -> set[tuple[int, ...]]:
        """Sorted node tuples of every positive in train, valid and test."""
        keys = {query_key(lq.query.nodes) for lq in self.train if lq.label == 1}
        for part in (self.valid, self.test):
            keys.update(tuple(sorted(row)) for row in part.positives.tolist())
        return keys

    def counts(self) -> dict[str, int]:
        return {
            "train_positives": sum(lq.label for lq in self.train),
            "train_negatives": sum(1 - lq.label for lq in self.train),
            "valid_positives": self.valid.size,
            "test_positives": self.test.size,
            "masked_edges": self.graph.num_edges,
        }


def _as_array(queries: Sequence[Query], arity: int) -> np.ndarray:
    if not queries:
        return np.empty((0, arity), dtype=np.int64)
    return np.array([q.nodes for q in queries], dtype=np.int64)


def _eval_set(
    g: Graph,
    positives: list[Query],
    per_pos: int,
    arity: int,
    rng: np.random.Generator,
    observed: set[tuple[int, ...]],
) -> EvalSet:
    if not positives:
        return EvalSet(np.empty((0, arity), np.int64), np.empty((0, per_pos, arity), np.int64))
    negs = negative_sample(g, positives, per_pos, rng, observed=observed)
    return EvalSet(_as_array(positives, arity), _as_array(negs, arity).reshape(-1, per_pos, arity))


def _assemble(
    g: Graph,
    masked: Graph,
    parts: tuple[list[Query], list[Query], list[Query]],
    k_neg: int,
    eval_negatives: int,
    valid_negatives: int,
    rng: np.random.Generator,
) -> SplitResult:
    train_pos, valid_pos, test_pos = parts
    arity = train_pos[0].arity
    observed = {query_key(q.nodes) for part in parts for q in part}
    train = [LabeledQuery(q, 1) for q in train_pos]
    if k_neg:
        train += [
            LabeledQuery(q, 0)
            for q in negative_sample(g, train_pos, k_neg, rng, observed=observed)
        ]
    return SplitResult(
        graph=masked,
        train=train,
        valid=_eval_set(g, valid_pos, valid_negatives, arity, rng, observed),
        test=_eval_set(g, test_pos, eval_negatives, arity, rng, observed),
    )


def split_inductive(
    g: Graph,
    fractions: SplitFractions,
    k_neg: int,
    rng: np.random.Generator,
    *,
    eval_negatives: int = 100,
    valid_negatives: int = 10,
) -> SplitResult:
    """
    Edge split: sample train/valid/test positives uniformly from the edges of ``g``
    and mask all of them from the returned graph.

    Negatives are corruptions of the positives drawn against the full graph,
    so no negative is a true edge.
    """
    edges = g.edges()
    n_train, n_valid, n_test = fractions.counts(edges.shape[0])
    if n_train < 1:
        raise ValidationError(f"graph with {edges.shape[0]} edges too small for the split")
    if n_train + n_valid + n_test > edges.shape[0]:
        raise ValidationError("split requests more positives than the graph has edges")
    if g.n < 3:
        raise ValidationError("graph too small to draw negatives")

    picked = edges[rng.permutation(edges.shape[0])[: n_train + n_valid + n_test]]
    queries = [Query((int(u), int(v))) for u, v in picked]
    parts = (
        queries[:n_train],
        queries[n_train : n_train + n_valid],
        queries[n_train + n_valid :],
    )
    masked = mask_edges(g, picked)
    logger.info(
        "Edge split: %d/%d/%d positives, %d of %d edges left",
        n_train,
        n_valid,
        n_test,
        masked.num_edges,
        g.num_edges,
    )
    return _assemble(g, masked, parts, k_neg, eval_negatives, valid_negatives, rng)


def split_queries(
    g: Graph,
    queries: Sequence[Query],
    fractions: SplitFractions,
    k_neg: int,
    rng: np.random.Generator,
    *,
    eval_negatives: int = 100,
    valid_negatives: int = 10,
) -> SplitResult:
    """Split positive queries read from a file; the graph is used as is (no masking)."""
    unique = list(dict.fromkeys(queries))
    arities = {q.arity for q in unique}
    if len(arities) != 1:
        raise ValidationError(f"query set mixes arities {sorted(arities)}")
    for q in unique:
        q.check(g.n)
    n_train, n_valid, n_test = fractions.counts(len(unique))
    if n_train < 1 or n_train + n_valid + n_test > len(unique):
        raise ValidationError(f"{len(unique)} queries too few for the requested split")
    order = rng.permutation(len(unique))
    shuffled = [unique[i] for i in order[: n_train + n_valid + n_test]]
    parts = (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_valid],
        shuffled[n_train + n_valid :],
    )
    logger.info("Query split (arity %d): %d/%d/%d positives", arities.pop(), *map(len, parts))
    return _assemble(g, g, parts, k_neg, eval_negatives, valid_negatives, rng)


def save_split(split: SplitResult, path: Path) -> Path:
    arity = split.arity
    train = _as_array([lq.query for lq in split.train], arity)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        np.savez(
            fh,
            n=np.int64(split.graph.n),
            graph_edges=split.graph.edges(),
            train_queries=train,
            train_labels=np.array([lq.label for lq in split.train], dtype=np.int8),
            valid_positives=split.valid.positives,
            valid_negatives=split.valid.negatives,
            test_positives=split.test.positives,
            test_negatives=split.test.negatives,
        )
    return path


def load_split(path: Path) -> SplitResult:
    with np.load(Path(path)) as data:
        graph = from_edges(int(data["n"]), data["graph_edges"])
        train = [
            LabeledQuery(Query(tuple(row)), int(label))
            for row, label in zip(data["train_queries"], data["train_labels"])
        ]
        valid = EvalSet(data["valid_positives"], data["valid_negatives"])
        test = EvalSet(data["test_positives"], data["test_negatives"])
    return SplitResult(graph=graph, train=train, valid=valid, test=test)
