"""Set neural encoder over joined node sets, with hand-written gradients.

    enc(z)  = relu(relu(z W1 + b1) W2 + b2)                 per member
    h_Q     = AGGR({enc(z_x) : x in S_Q})                   mean or attention
    logit   = relu(h_Q Wh1 + bh1) Wh2 + bh2

Attention scores are a linear map of enc(z_x) softmaxed over the members of a
query. Losses are binary cross-entropy on logits.
"""

from __future__ import annotations

import json
import logging
import struct
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Literal

import numpy as np
from scipy.special import expit, log_expit
from tqdm import tqdm

from setsgrl.errors import TrainingError, ValidationError
from setsgrl.graph import Graph, LabeledQuery, Query
from setsgrl.metrics import auc
from setsgrl.sampling import StructureName, normalize_lp
from setsgrl.spg import SpG
from setsgrl.spjoin import JoinedQuery, join_batch

logger = logging.getLogger(__name__)

AggrName = Literal["mean", "attention"]
NegativeMode = Literal["fresh", "given"]

DEFAULT_HIDDEN = 96
DEFAULT_DROPOUT = 0.1


@dataclass(frozen=True)
class ModelSpec:
    arity: int
    k: int
    d: int = 0
    hidden: int = DEFAULT_HIDDEN
    aggr: AggrName = "mean"
    structure: StructureName = "lp"
    walk_count: int | None = None
    spd_cap: int | None = None
    append_presence: bool = False

    def __post_init__(self) -> None:
        if self.arity < 2:
            raise ValidationError(f"arity must be >= 2, got {self.arity}")
        if self.k < 0 or self.d < 0 or self.hidden < 1:
            raise ValidationError("k, d must be >= 0 and hidden >= 1")
        if self.aggr not in AGGREGATORS:
            raise ValidationError(f"unknown aggregator {self.aggr!r}")
        if self.structure == "lp" and not self.walk_count:
            raise ValidationError("LP inputs need walk_count for normalization")
        if self.structure == "spd" and self.spd_cap is None:
            raise ValidationError("SPD inputs need spd_cap for scaling")

    @property
    def in_dim(self) -> int:
        return self.arity * self.k + self.d + (self.arity if self.append_presence else 0)


@dataclass
class ModelParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    wa: np.ndarray
    Wh1: np.ndarray
    bh1: np.ndarray
    Wh2: np.ndarray
    bh2: np.ndarray

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.names()}

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> ModelParams:
        return ModelParams(**{k: fn(v) for k, v in self.arrays().items()})

    def copy(self) -> ModelParams:
        return self.map(np.copy)

    def zeros_like(self) -> ModelParams:
        return self.map(np.zeros_like)

    def all_finite(self) -> bool:
        return all(bool(np.isfinite(v).all()) for v in self.arrays().values())


def init_params(spec: ModelSpec, rng_seed: int = 0) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=rng_seed, spawn_key=(0,)))
    h = spec.hidden

    def uniform(fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
        bound = 1.0 / np.sqrt(max(fan_in, 1))
        return rng.uniform(-bound, bound, size=shape)

    return ModelParams(
        W1=uniform(spec.in_dim, (spec.in_dim, h)),
        b1=np.zeros(h),
        W2=uniform(h, (h, h)),
        b2=np.zeros(h),
        wa=uniform(h, (h,)),
        Wh1=uniform(h, (h, h)),
        bh1=np.zeros(h),
        Wh2=uniform(h, (h,)),
        bh2=np.zeros(1),
    )


def query_inputs(jq: JoinedQuery, spec: ModelSpec, attrs: np.ndarray | None = None) -> np.ndarray:
    """Model input rows for one joined query: normalized Z_Q (|| X_x) (|| presence)."""
    if jq.query.arity != spec.arity or jq.zq.shape[1] != spec.arity * spec.k:
        raise ValidationError(
            f"joined query shape {jq.zq.shape} (arity {jq.query.arity}) does not match "
            f"model arity {spec.arity}, k {spec.k}"
        )
    if spec.structure == "lp":
        assert spec.walk_count is not None
        z = normalize_lp(jq.zq, spec.walk_count)
    elif spec.structure == "spd":
        assert spec.spd_cap is not None
        z = jq.zq.astype(np.float64) / float(spec.spd_cap + 1)
    else:
        z = jq.zq.astype(np.float64)
    parts = [z]
    if spec.d:
        if attrs is None or attrs.shape[1] != spec.d:
            raise ValidationError(f"model expects {spec.d} attribute columns")
        parts.append(attrs[jq.union_members])
    if spec.append_presence:
        parts.append(jq.presence.astype(np.float64))
    return np.concatenate(parts, axis=1) if len(parts) > 1 else z


@dataclass(frozen=True)
class Batch:
    x: np.ndarray
    starts: np.ndarray
    sizes: np.ndarray

    @property
    def size(self) -> int:
        return int(self.sizes.size)

    @property
    def segment(self) -> np.ndarray:
        return np.repeat(np.arange(self.size), self.sizes)


def stack_batch(
    joined: Sequence[JoinedQuery], spec: ModelSpec, attrs: np.ndarray | None = None
) -> Batch:
    rows = [query_inputs(jq, spec, attrs) for jq in joined]
    sizes = np.array([r.shape[0] for r in rows], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    x = np.concatenate(rows, axis=0) if rows else np.empty((0, spec.in_dim))
    return Batch(x=x, starts=starts, sizes=sizes)


class MeanPool:
    """Arithmetic mean over the members of each query."""

    def forward(self, h: np.ndarray, batch: Batch, p: ModelParams) -> tuple[np.ndarray, Any]:
        return np.add.reduceat(h, batch.starts, axis=0) / batch.sizes[:, None], None

    def backward(
        self, dhq: np.ndarray, h: np.ndarray, cache: Any, batch: Batch, p: ModelParams,
        grads: ModelParams,
    ) -> np.ndarray:
        return (dhq / batch.sizes[:, None])[batch.segment]


class AttentionPool:
    """Softmax(h_x . wa)-weighted average over the members of each query."""

    def weights(self, h: np.ndarray, batch: Batch, p: ModelParams) -> np.ndarray:
        seg = batch.segment
        s = h @ p.wa
        e = np.exp(s - np.maximum.reduceat(s, batch.starts)[seg])
        return e / np.add.reduceat(e, batch.starts)[seg]

    def forward(self, h: np.ndarray, batch: Batch, p: ModelParams) -> tuple[np.ndarray, Any]:
        a = self.weights(h, batch, p)
        return np.add.reduceat(a[:, None] * h, batch.starts, axis=0), a

    def backward(
        self, dhq: np.ndarray, h: np.ndarray, cache: Any, batch: Batch, p: ModelParams,
        grads: ModelParams,
    ) -> np.ndarray:
        a = cache
        seg = batch.segment
        dhq_x = dhq[seg]
        da = np.einsum("ij,ij->i", dhq_x, h)
        ds = a * (da - np.add.reduceat(a * da, batch.starts)[seg])
        grads.wa += h.T @ ds
        return a[:, None] * dhq_x + ds[:, None] * p.wa[None, :]


AGGREGATORS: dict[str, MeanPool | AttentionPool] = {
    "mean": MeanPool(),
    "attention": AttentionPool(),
}


@dataclass
class ForwardCache:
    batch: Batch
    a1: np.ndarray
    h1: np.ndarray
    a2: np.ndarray
    mask: np.ndarray | None
    hd: np.ndarray
    pool_cache: Any
    hq: np.ndarray
    g1: np.ndarray
    r1: np.ndarray
    logits: np.ndarray


def encode_members(p: ModelParams, x: np.ndarray) -> tuple[np.ndarray, ...]:
    a1 = x @ p.W1 + p.b1
    h1 = np.maximum(a1, 0.0)
    a2 = h1 @ p.W2 + p.b2
    return a1, h1, a2, np.maximum(a2, 0.0)


def predict(hq: np.ndarray, p: ModelParams) -> np.ndarray:
    """Classifier head on pooled vectors; accepts (h,) or (B, h)."""
    r1 = np.maximum(hq @ p.Wh1 + p.bh1, 0.0)
    return r1 @ p.Wh2 + p.bh2[0]


def forward(
    p: ModelParams,
    spec: ModelSpec,
    batch: Batch,
    *,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> ForwardCache:
    if batch.x.shape[1] != spec.in_dim:
        raise ValidationError(f"input width {batch.x.shape[1]} != model in_dim {spec.in_dim}")
    a1, h1, a2, h2 = encode_members(p, batch.x)
    mask = None
    hd = h2
    if dropout > 0.0:
        if rng is None:
            raise ValidationError("dropout needs an rng")
        mask = (rng.random(h2.shape) >= dropout) / (1.0 - dropout)
        hd = h2 * mask
    hq, pool_cache = AGGREGATORS[spec.aggr].forward(hd, batch, p)
    g1 = hq @ p.Wh1 + p.bh1
    r1 = np.maximum(g1, 0.0)
    logits = r1 @ p.Wh2 + p.bh2[0]
    return ForwardCache(batch, a1, h1, a2, mask, hd, pool_cache, hq, g1, r1, logits)


def encode_query(
    jq: JoinedQuery,
    attrs: np.ndarray | None,
    p: ModelParams,
    spec: ModelSpec,
    aggr: AggrName | None = None,
) -> np.ndarray:
    """h_Q for one joined query (no dropout)."""
    spec = spec if aggr is None else replace(spec, aggr=aggr)
    batch = stack_batch([jq], spec, attrs)
    _, _, _, h2 = encode_members(p, batch.x)
    hq, _ = AGGREGATORS[spec.aggr].forward(h2, batch, p)
    return hq[0]


def bce_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy on logits, stable for any |logit|."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    per = -(labels * log_expit(logits) + (1.0 - labels) * log_expit(-logits))
    return float(per.mean())


def backward(
    cache: ForwardCache, labels: np.ndarray, p: ModelParams, spec: ModelSpec
) -> tuple[float, ModelParams]:
    """Loss and exact gradients of mean BCE w.r.t. every parameter."""
    labels = np.asarray(labels, dtype=np.float64)
    loss = bce_loss(cache.logits, labels)
    grads = p.zeros_like()
    dz = (expit(cache.logits) - labels) / labels.size

    grads.Wh2 = cache.r1.T @ dz
    grads.bh2 = np.array([dz.sum()])
    dg1 = np.outer(dz, p.Wh2) * (cache.g1 > 0)
    grads.Wh1 = cache.hq.T @ dg1
    grads.bh1 = dg1.sum(axis=0)
    dhq = dg1 @ p.Wh1.T

    dhd = AGGREGATORS[spec.aggr].backward(dhq, cache.hd, cache.pool_cache, cache.batch, p, grads)
    dh2 = dhd if cache.mask is None else dhd * cache.mask
    da2 = dh2 * (cache.a2 > 0)
    grads.W2 = cache.h1.T @ da2
    grads.b2 = da2.sum(axis=0)
    da1 = (da2 @ p.W2.T) * (cache.a1 > 0)
    grads.W1 = cache.batch.x.T @ da1
    grads.b1 = da1.sum(axis=0)
    return loss, grads


@dataclass
class AdamState:
    m: ModelParams
    v: ModelParams
    t: int = 0

    @classmethod
    def zeros(cls, p: ModelParams) -> AdamState:
        return cls(m=p.zeros_like(), v=p.zeros_like())


def adam_step(
    p: ModelParams,
    grads: ModelParams,
    state: AdamState,
    lr: float = 1e-3,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> ModelParams:
    """One bias-corrected Adam update; ``state`` is advanced in place."""
    b1, b2 = betas
    state.t += 1
    out = {}
    for name, value in p.arrays().items():
        g = getattr(grads, name)
        m = b1 * getattr(state.m, name) + (1.0 - b1) * g
        v = b2 * getattr(state.v, name) + (1.0 - b2) * g * g
        setattr(state.m, name, m)
        setattr(state.v, name, v)
        m_hat = m / (1.0 - b1**state.t)
        v_hat = v / (1.0 - b2**state.t)
        out[name] = value - lr * m_hat / (np.sqrt(v_hat) + eps)
    return ModelParams(**out)


def query_key(nodes: Sequence[int]) -> tuple[int, ...]:
    return tuple(sorted(int(x) for x in nodes))


def negative_sample(
    g: Graph,
    positives: Sequence[Query],
    k_neg: int,
    rng: np.random.Generator,
    *,
    observed: set[tuple[int, ...]] | None = None,
    max_tries: int = 100,
) -> list[Query]:
    """
    ``k_neg`` corrupted copies per positive: one random position gets a random node.

    A candidate is rejected while it repeats a node, is an edge of ``g`` (arity 2)
    or is an observed positive. After ``max_tries`` rejections any duplicate-free
    corruption is accepted.
    """
    if k_neg < 0:
        raise ValidationError(f"k_neg must be >= 0, got {k_neg}")
    if k_neg == 0:
        return []
    if not positives:
        raise ValidationError("negative sampling needs at least one positive")
    seen = set(observed) if observed is not None else set()
    seen.update(query_key(q.nodes) for q in positives)

    out: list[Query] = []
    for q in positives:
        if q.arity < 2:
            raise ValidationError(f"arity must be >= 2, got {q.arity}")
        if g.n <= q.arity - 1:
            raise ValidationError(f"graph with {g.n} nodes cannot host arity {q.arity}")
        base = list(q.nodes)
        for _ in range(k_neg):
            cand: list[int] | None = None
            for _ in range(max_tries):
                trial = base.copy()
                trial[int(rng.integers(q.arity))] = int(rng.integers(g.n))
                if len(set(trial)) != q.arity:
                    continue
                if q.arity == 2 and g.has_edge(trial[0], trial[1]):
                    continue
                if query_key(trial) in seen:
                    continue
                cand = trial
                break
            if cand is None:
                cand = _fallback_corruption(base, g.n, rng)
            out.append(Query(tuple(cand)))
    return out


def _fallback_corruption(base: list[int], n: int, rng: np.random.Generator) -> list[int]:
    pos = int(rng.integers(len(base)))
    taken = set(base[:pos] + base[pos + 1 :])
    free = np.setdiff1d(np.arange(n), np.fromiter(taken, dtype=np.int64))
    out = base.copy()
    out[pos] = int(free[int(rng.integers(free.size))])
    return out


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 1e-3
    neg_per_pos: int = 10
    epochs: int = 20
    patience: int = 3
    dropout: float = DEFAULT_DROPOUT
    rng_seed: int = 0
    threads: int = 1
    cache_joins: bool = False
    negatives: NegativeMode = "fresh"

    def __post_init__(self) -> None:
        if self.negatives not in ("fresh", "given"):
            raise ValidationError(f"unknown negative mode {self.negatives!r}")
        if self.batch_size < 1 or self.epochs < 1 or self.patience < 1:
            raise ValidationError("batch_size, epochs and patience must be positive")
        if self.learning_rate < 0 or self.neg_per_pos < 0:
            raise ValidationError("learning_rate and neg_per_pos must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError(f"dropout must be in [0, 1), got {self.dropout}")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_auc: float | None
    seconds: float


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0


class JoinSource:
    """join_batch with an optional per-run cache keyed by query tuple."""

    def __init__(self, spg: SpG, threads: int, cache: bool) -> None:
        self.spg = spg
        self.threads = threads
        self._cache: dict[tuple[int, ...], JoinedQuery] | None = {} if cache else None

    def __call__(self, queries: Sequence[Query]) -> list[JoinedQuery]:
        if self._cache is None:
            return join_batch(self.spg, queries, self.threads)
        todo = [q for q in dict.fromkeys(queries) if q.nodes not in self._cache]
        for q, jq in zip(todo, join_batch(self.spg, todo, self.threads)):
            self._cache[q.nodes] = jq
        return [self._cache[q.nodes] for q in queries]


def score_queries(
    p: ModelParams,
    spec: ModelSpec,
    spg: SpG,
    queries: Sequence[Query],
    attrs: np.ndarray | None = None,
    *,
    threads: int = 1,
    batch_size: int = 256,
    joiner: JoinSource | None = None,
) -> np.ndarray:
    """Logits for ``queries`` in evaluation mode (no dropout)."""
    joiner = joiner or JoinSource(spg, threads, cache=False)
    out = np.empty(len(queries))
    for lo in range(0, len(queries), batch_size):
        chunk = queries[lo : lo + batch_size]
        batch = stack_batch(joiner(chunk), spec, attrs)
        out[lo : lo + len(chunk)] = forward(p, spec, batch).logits
    return out


def degree_product_scores(g: Graph, queries: Sequence[Query]) -> np.ndarray:
    """Heuristic baseline: log of the product of (degree + 1) over the query's nodes."""
    if not queries:
        return np.empty(0)
    nodes = np.array([q.nodes for q in queries], dtype=np.int64)
    if nodes.max() >= g.n:
        raise ValidationError("query references a node outside the graph")
    return np.log1p(g.degrees[nodes].astype(np.float64)).sum(axis=1)


def train(
    g: Graph,
    spg: SpG,
    labeled: Sequence[LabeledQuery],
    spec: ModelSpec,
    cfg: TrainConfig,
    *,
    valid: Sequence[LabeledQuery] | None = None,
    exclude: Iterable[tuple[int, ...]] = (),
    progress: bool = False,
) -> TrainResult:
    """
    Mini-batch training: negatives -> join_batch -> encode -> BCE -> backward -> Adam.

    With ``cfg.negatives == "fresh"`` every batch draws ``neg_per_pos`` corruptions
    per positive and label-0 queries in ``labeled`` are ignored. Corruptions never
    hit a training positive or a key in ``exclude`` (held-out positives masked out
    of ``g``). With ``"given"`` the label-0 queries are the negatives. Early stopping
    tracks validation AUC and restores the best parameters.
    """
    if not labeled:
        raise ValidationError("training set is empty")
    arities = {lq.query.arity for lq in labeled}
    if arities != {spec.arity}:
        raise ValidationError(f"training arities {sorted(arities)} != model arity {spec.arity}")
    for lq in labeled:
        lq.query.check(g.n)

    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.rng_seed, spawn_key=(1,)))
    params = init_params(spec, cfg.rng_seed)
    state = AdamState.zeros(params)
    joiner = JoinSource(spg, cfg.threads, cfg.cache_joins)
    attrs = g.attrs if spec.d else None

    positives = [lq.query for lq in labeled if lq.label == 1]
    fresh = cfg.negatives == "fresh"
    if fresh:
        skipped = len(labeled) - len(positives)
        if skipped:
            logger.debug("Ignoring %d stored negatives; drawing fresh ones per batch", skipped)
        pool = [LabeledQuery(q, 1) for q in positives]
    else:
        if all(lq.label == 1 for lq in labeled):
            raise ValidationError("negatives='given' needs label-0 queries")
        pool = list(labeled)
    if not pool:
        raise ValidationError("training set has no usable queries")
    observed = {query_key(q.nodes) for q in positives}
    observed.update(query_key(key) for key in exclude)

    valid_batches: list[Batch] = []
    valid_labels = np.empty(0)
    if valid:
        # fixed across epochs, so joined and stacked once
        valid_queries = [lq.query for lq in valid]
        valid_labels = np.array([lq.label for lq in valid])
        valid_batches = [
            stack_batch(join_batch(spg, valid_queries[lo : lo + 256], cfg.threads), spec, attrs)
            for lo in range(0, len(valid_queries), 256)
        ]

    result = TrainResult(params=params.copy())
    best = -np.inf
    stale = 0
    batch_index = 0
    for epoch in tqdm(range(1, cfg.epochs + 1), desc="epochs", disable=not progress):
        started = time.perf_counter()
        order = rng.permutation(len(pool))
        losses: list[float] = []
        for lo in range(0, len(order), cfg.batch_size):
            chunk = [pool[i] for i in order[lo : lo + cfg.batch_size]]
            queries = [lq.query for lq in chunk]
            labels = [lq.label for lq in chunk]
            if fresh:
                negs = negative_sample(g, queries, cfg.neg_per_pos, rng, observed=observed)
                queries += negs
                labels += [0] * len(negs)
            batch = stack_batch(joiner(queries), spec, attrs)
            cache = forward(params, spec, batch, dropout=cfg.dropout, rng=rng)
            loss, grads = backward(cache, np.asarray(labels), params, spec)
            if not (np.isfinite(loss) and grads.all_finite()):
                raise TrainingError("non-finite loss or gradient", batch_index)
            params = adam_step(params, grads, state, lr=cfg.learning_rate)
            losses.append(loss)
            batch_index += 1

        val_auc: float | None = None
        if valid_batches:
            logits = np.concatenate([forward(params, spec, b).logits for b in valid_batches])
            val_auc = auc(logits, valid_labels)
        record = EpochRecord(
            epoch=epoch,
            loss=float(np.mean(losses)),
            val_auc=val_auc,
            seconds=time.perf_counter() - started,
        )
        result.history.append(record)
        logger.info(
            "epoch %d: loss=%.5f val_auc=%s (%.2fs)",
            epoch,
            record.loss,
            "n/a" if val_auc is None else f"{val_auc:.4f}",
            record.seconds,
        )

        metric = val_auc if val_auc is not None else -record.loss
        if metric > best:
            best = metric
            stale = 0
            result.params = params.copy()
            result.best_epoch = epoch
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.info("Early stop at epoch %d (best %d)", epoch, result.best_epoch)
                break
    return result


def history_records(history: Sequence[EpochRecord]) -> list[dict[str, Any]]:
    return [asdict(r) for r in history]


CHECKPOINT_MAGIC = b"SGRLCKPT"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<8sHI")


def save_checkpoint(p: ModelParams, spec: ModelSpec, path: Path) -> Path:
    """Versioned blob: header, JSON meta (spec + shapes), row-major float64 arrays (LE)."""
    arrays = p.arrays()
    meta = {
        "spec": asdict(spec),
        "arrays": [[name, list(arr.shape)] for name, arr in arrays.items()],
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(_CKPT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return path


def load_checkpoint(path: Path) -> tuple[ModelParams, ModelSpec]:
    data = Path(path).read_bytes()
    if len(data) < _CKPT_HEADER.size:
        raise ValidationError(f"{path}: truncated checkpoint")
    magic, version, meta_len = _CKPT_HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC or version != CHECKPOINT_VERSION:
        raise ValidationError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
    offset = _CKPT_HEADER.size
    meta = json.loads(data[offset : offset + meta_len].decode("utf-8"))
    offset += meta_len
    spec = ModelSpec(**meta["spec"])
    arrays: dict[str, np.ndarray] = {}
    for name, shape in meta["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        if offset + count * 8 > len(data):
            raise ValidationError(f"{path}: truncated checkpoint payload")
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        arrays[name] = arr.copy()
        offset += count * 8
    if offset != len(data) or set(arrays) != set(ModelParams.names()):
        raise ValidationError(f"{path}: checkpoint payload does not match its header")
    params = ModelParams(**arrays)
    expected = init_params(spec).arrays()
    for name, arr in arrays.items():
        if arr.shape != expected[name].shape:
            raise ValidationError(f"{path}: {name} has shape {arr.shape}")
    return params, spec
