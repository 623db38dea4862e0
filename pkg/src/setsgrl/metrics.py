"""Ranking and classification metrics over positive-vs-negatives score lists.

Tie rules: MRR averages the optimistic and pessimistic rank
(rank = 1 + #greater + #equal / 2); Hits@P uses the pessimistic rank
(tied negatives placed first); AUC gives half credit to ties.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from sklearn.metrics import roc_auc_score

from setsgrl.errors import ValidationError


@dataclass(frozen=True)
class RankedQueryScores:
    pos_score: float
    neg_scores: np.ndarray

    def __post_init__(self) -> None:
        neg = np.asarray(self.neg_scores, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "neg_scores", neg)
        if not np.isfinite(self.pos_score) or not np.isfinite(neg).all():
            raise ValidationError("scores must be finite")

    def counts(self) -> tuple[int, int]:
        """(#negatives scored above, #negatives tied with) the positive."""
        greater = int(np.count_nonzero(self.neg_scores > self.pos_score))
        equal = int(np.count_nonzero(self.neg_scores == self.pos_score))
        return greater, equal


def ranked_from_arrays(pos: np.ndarray, neg: np.ndarray) -> list[RankedQueryScores]:
    """Pair pos[i] with the row neg[i]."""
    neg = np.asarray(neg, dtype=np.float64)
    return [RankedQueryScores(float(p), row) for p, row in zip(np.asarray(pos), neg)]


def _check_batch(batch: Sequence[RankedQueryScores]) -> None:
    if not batch:
        raise ValidationError("metric needs a nonempty batch")
    if any(r.neg_scores.size == 0 for r in batch):
        raise ValidationError("every query needs at least one negative")


def ranks(batch: Sequence[RankedQueryScores]) -> np.ndarray:
    """Tie-averaged rank of each positive."""
    _check_batch(batch)
    out = np.empty(len(batch))
    for i, r in enumerate(batch):
        greater, equal = r.counts()
        out[i] = 1.0 + greater + equal / 2.0
    return out


def mrr(batch: Sequence[RankedQueryScores]) -> float:
    return float(np.mean(1.0 / ranks(batch)))


def hits_at(batch: Sequence[RankedQueryScores], p: int) -> float:
    if p < 1:
        raise ValidationError(f"P must be >= 1, got {p}")
    _check_batch(batch)
    hits = 0
    for r in batch:
        greater, equal = r.counts()
        hits += int(1 + greater + equal <= p)
    return hits / len(batch)


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """ROC-AUC = P(pos > neg) + P(pos = neg) / 2."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.size != labels.size:
        raise ValidationError("scores and labels differ in length")
    if not np.isin(labels, (0, 1)).all():
        raise ValidationError("labels must be 0 or 1")
    if np.unique(labels).size < 2:
        raise ValidationError("AUC needs both positive and negative labels")
    if not np.isfinite(scores).all():
        raise ValidationError("scores must be finite")
    return float(roc_auc_score(labels, scores))


def tie_count(batch: Sequence[RankedQueryScores]) -> int:
    """Queries whose positive ties at least one negative."""
    return sum(1 for r in batch if r.counts()[1] > 0)


def metric_records(
    batch: Sequence[RankedQueryScores],
    hits: Sequence[int] = (10, 50, 100),
    *,
    prefix: str = "",
) -> list[dict[str, Any]]:
    """Structured records (metric, value, n_queries, n_ties) for one ranked batch."""
    n = len(batch)
    ties = tie_count(batch)
    pos = np.array([r.pos_score for r in batch])
    neg = np.concatenate([r.neg_scores for r in batch])
    flat_scores = np.concatenate([pos, neg])
    flat_labels = np.concatenate([np.ones(pos.size), np.zeros(neg.size)])
    rows: list[tuple[str, float]] = [("mrr", mrr(batch))]
    rows += [(f"hits@{p}", hits_at(batch, p)) for p in hits]
    rows.append(("auc", auc(flat_scores, flat_labels)))
    return [
        {"metric": f"{prefix}{name}", "value": value, "n_queries": n, "n_ties": ties}
        for name, value in rows
    ]


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("no values to aggregate")
    return float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0
