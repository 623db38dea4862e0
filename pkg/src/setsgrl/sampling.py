"""Offline per-seed node-set samplers and structure encoders.

Two samplers produce the unique node set S_u of a seed u:

* walk sampler: M uniform random walks of m steps; LP features are the integer
  landing counts per step (k = m + 1, step 0 included).
* PPR sampler: approximate personalized PageRank by residual push, then keep the
  top-K scores (ties by ascending id) plus the seed.

Either set can instead carry SPD features (truncated BFS distance, k = 1).
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass
from typing import Literal

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from setsgrl.errors import InternalError, SamplingError, ValidationError
from setsgrl.graph import Graph

logger = logging.getLogger(__name__)

SamplerName = Literal["walk", "ppr"]
StructureName = Literal["lp", "spd", "ppr"]

DEFAULT_ALPHA = 0.15
DEFAULT_EPSILON = 1e-4


@dataclass(frozen=True)
class NodeSetSample:
    seed: int
    members: np.ndarray
    features: np.ndarray

    @property
    def k(self) -> int:
        return int(self.features.shape[1])

    @property
    def size(self) -> int:
        return int(self.members.size)

    def check(self) -> None:
        if self.members.ndim != 1 or self.features.ndim != 2:
            raise ValidationError(f"seed {self.seed}: malformed sample arrays")
        if self.features.shape[0] != self.members.size:
            raise ValidationError(f"seed {self.seed}: feature rows != member count")
        if self.members.size > 1 and not np.all(np.diff(self.members) > 0):
            raise ValidationError(f"seed {self.seed}: members not strictly ascending")
        i = int(np.searchsorted(self.members, self.seed))
        if i >= self.members.size or int(self.members[i]) != self.seed:
            raise ValidationError(f"seed {self.seed} missing from its own set")


@dataclass(frozen=True)
class WalkConfig:
    num_walks: int
    num_steps: int
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.num_walks < 1 or self.num_steps < 1:
            raise ValidationError("num_walks and num_steps must be >= 1")


@dataclass(frozen=True)
class PprConfig:
    alpha: float = DEFAULT_ALPHA
    epsilon: float = DEFAULT_EPSILON
    top_k: int = 50

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValidationError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.epsilon <= 0.0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon}")
        if self.top_k < 1:
            raise ValidationError(f"top_k must be >= 1, got {self.top_k}")


@dataclass(frozen=True)
class SamplerSpec:
    """Sampler + structure encoder choice for ``sample_all``."""

    sampler: SamplerName = "walk"
    structure: StructureName = "lp"
    walk: WalkConfig | None = None
    ppr: PprConfig | None = None
    d_max: int | None = None

    def __post_init__(self) -> None:
        if self.sampler == "walk" and self.walk is None:
            raise ValidationError("walk sampler requires a WalkConfig")
        if self.sampler == "ppr" and self.ppr is None:
            raise ValidationError("ppr sampler requires a PprConfig")
        if self.structure == "lp" and self.sampler != "walk":
            raise ValidationError("LP features are only produced by the walk sampler")
        if self.structure == "ppr" and self.sampler != "ppr":
            raise ValidationError("PPR features are only produced by the ppr sampler")
        if self.d_max is not None and self.d_max < 0:
            raise ValidationError("d_max must be >= 0")

    @property
    def rng_seed(self) -> int:
        return self.walk.rng_seed if self.walk is not None else 0

    @property
    def spd_cap(self) -> int:
        """SPD depth cap; defaults to the walk length, else 2."""
        if self.d_max is not None:
            return self.d_max
        return self.walk.num_steps if self.walk is not None else 2

    @property
    def feature_dim(self) -> int:
        if self.structure == "lp":
            assert self.walk is not None
            return self.walk.num_steps + 1
        return 1


@dataclass(frozen=True)
class SparseScores:
    """Sparse score vector: ascending ``nodes`` with matching ``values``."""

    seed: int
    nodes: np.ndarray
    values: np.ndarray
    residual: dict[int, float] | None = None

    def as_dict(self) -> dict[int, float]:
        return {int(x): float(v) for x, v in zip(self.nodes, self.values)}


def seed_rng(rng_seed: int, u: int) -> np.random.Generator:
    """Independent stream per (rng_seed, node); same result on any thread layout."""
    return np.random.default_rng(np.random.SeedSequence(entropy=rng_seed, spawn_key=(int(u),)))


def walk_trail(g: Graph, u: int, cfg: WalkConfig, rng: np.random.Generator) -> np.ndarray:
    """Positions of all walkers, shape (m + 1, M); walkers stall on degree-0 nodes."""
    g.check_node(u)
    trail = np.empty((cfg.num_steps + 1, cfg.num_walks), dtype=np.int64)
    pos = np.full(cfg.num_walks, u, dtype=np.int64)
    trail[0] = pos
    targets = g.adj_targets
    for i in range(1, cfg.num_steps + 1):
        start = g.adj_offsets[pos]
        deg = g.adj_offsets[pos + 1] - start
        pick = (rng.random(cfg.num_walks) * deg).astype(np.int64)
        moving = deg > 0
        nxt = pos.copy()
        nxt[moving] = targets[start[moving] + pick[moving]]
        pos = nxt
        trail[i] = pos
    return trail


def sample_walks(
    g: Graph, u: int, cfg: WalkConfig, rng: np.random.Generator | None = None
) -> NodeSetSample:
    """Unique walk nodes of u with LP landing counts; features[x][i] = #walks at x on step i."""
    rng = rng if rng is not None else seed_rng(cfg.rng_seed, u)
    trail = walk_trail(g, u, cfg, rng)
    members, inverse = np.unique(trail, return_inverse=True)
    k = cfg.num_steps + 1
    step = np.repeat(np.arange(k), cfg.num_walks)
    counts = np.bincount(inverse.reshape(-1) * k + step, minlength=members.size * k)
    return NodeSetSample(
        seed=int(u),
        members=members.astype(np.int32),
        features=counts.reshape(members.size, k).astype(np.int32),
    )


def normalize_lp(counts: np.ndarray, num_walks: int) -> np.ndarray:
    """Landing counts -> landing probabilities (entrywise division by M)."""
    if num_walks <= 0:
        raise ValidationError(f"walk count must be positive, got {num_walks}")
    counts = np.asarray(counts)
    if counts.size and (counts.min() < 0 or counts.max() > num_walks):
        raise ValidationError(f"LP counts must lie in [0, {num_walks}]")
    return counts.astype(np.float64) / float(num_walks)


def ppr_push(
    g: Graph,
    u: int,
    alpha: float = DEFAULT_ALPHA,
    epsilon: float = DEFAULT_EPSILON,
    *,
    debug: bool = False,
    max_pushes: int | None = None,
) -> SparseScores:
    """
    Approximate PPR by residual push with a FIFO queue.

    On return every residual r(v) < epsilon * deg(v); a degree-0 node's residual
    moves to its estimate directly. The seed always has an entry, 0.0 when
    epsilon * deg(seed) > 1 stops it from being pushed. ``debug=True`` keeps the residual.
    """
    PprConfig(alpha=alpha, epsilon=epsilon)
    g.check_node(u)
    offsets, targets = g.adj_offsets, g.adj_targets
    estimate: dict[int, float] = {int(u): 0.0}
    residual: dict[int, float] = {int(u): 1.0}
    queue: deque[int] = deque([int(u)])
    queued = {int(u)}
    # total residual mass drops by >= alpha * epsilon per push
    cap = max_pushes if max_pushes is not None else int(10 / (alpha * epsilon)) + 10 * g.n + 10
    pushes = 0
    while queue:
        x = queue.popleft()
        queued.discard(x)
        r = residual.get(x, 0.0)
        lo, hi = int(offsets[x]), int(offsets[x + 1])
        deg = hi - lo
        if deg == 0:
            if r > 0.0:
                estimate[x] = estimate.get(x, 0.0) + r
            residual[x] = 0.0
            continue
        if r < epsilon * deg:
            continue
        pushes += 1
        if pushes > cap:
            raise InternalError(f"push-flow exceeded {cap} pushes from seed {u}")
        estimate[x] = estimate.get(x, 0.0) + alpha * r
        residual[x] = 0.0
        share = (1.0 - alpha) * r / deg
        if share == 0.0:
            continue
        for v in targets[lo:hi].tolist():
            rv = residual.get(v, 0.0) + share
            residual[v] = rv
            v_deg = int(offsets[v + 1] - offsets[v])
            if v not in queued and (v_deg == 0 or rv >= epsilon * v_deg):
                queue.append(v)
                queued.add(v)

    nodes = np.fromiter(sorted(estimate), dtype=np.int64, count=len(estimate))
    values = np.array([estimate[int(x)] for x in nodes], dtype=np.float64)
    kept = {x: r for x, r in residual.items() if r > 0.0} if debug else None
    return SparseScores(seed=int(u), nodes=nodes, values=values, residual=kept)


def topk_ppr(scores: SparseScores, top_k: int) -> NodeSetSample:
    """Seed plus the top-K scored nodes (ties by ascending id); feature = PPR score."""
    if top_k < 1:
        raise ValidationError(f"top_k must be >= 1, got {top_k}")
    if scores.nodes.size == 0:
        raise ValidationError("score vector is empty")
    order = np.lexsort((scores.nodes, -scores.values))[:top_k]
    chosen = scores.nodes[order]
    if scores.seed not in set(chosen.tolist()):
        chosen = np.append(chosen, scores.seed)
    members = np.sort(chosen)
    lookup = scores.as_dict()
    values = np.array([lookup.get(int(x), 0.0) for x in members], dtype=np.float32)
    return NodeSetSample(
        seed=scores.seed,
        members=members.astype(np.int32),
        features=values.reshape(-1, 1),
    )


def bfs_depths(g: Graph, u: int, d_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes within d_max hops of u (ascending) and their hop distance."""
    g.check_node(u)
    frontier = np.array([u], dtype=np.int64)
    visited = frontier.copy()
    found_nodes = [frontier]
    found_depths = [np.zeros(1, dtype=np.int64)]
    for depth in range(1, d_max + 1):
        reached = np.unique(g.gather_neighbors(frontier))
        fresh = np.setdiff1d(reached, visited, assume_unique=True)
        if fresh.size == 0:
            break
        found_nodes.append(fresh)
        found_depths.append(np.full(fresh.size, depth, dtype=np.int64))
        visited = np.union1d(visited, fresh)
        frontier = fresh
    nodes = np.concatenate(found_nodes)
    depths = np.concatenate(found_depths)
    order = np.argsort(nodes)
    return nodes[order], depths[order]


def spd_encode(g: Graph, u: int, members: np.ndarray, d_max: int) -> np.ndarray:
    """min(SPD(u, x), d_max + 1) per member, as an int32 column."""
    members = np.asarray(members, dtype=np.int64)
    if members.size and (members.min() < 0 or members.max() >= g.n):
        raise ValidationError("member id outside the graph")
    nodes, depths = bfs_depths(g, u, d_max)
    out = np.full(members.size, d_max + 1, dtype=np.int32)
    if nodes.size:
        idx = np.clip(np.searchsorted(nodes, members), 0, nodes.size - 1)
        hit = nodes[idx] == members
        out[hit] = depths[idx[hit]]
    return out.reshape(-1, 1)


def sample_node(g: Graph, u: int, spec: SamplerSpec) -> tuple[NodeSetSample, int]:
    """One seed under ``spec``; also returns the walk-node count (0 for PPR)."""
    if spec.sampler == "walk":
        assert spec.walk is not None
        sample = sample_walks(g, u, spec.walk)
        walk_nodes = spec.walk.num_steps * spec.walk.num_walks
    else:
        assert spec.ppr is not None
        scores = ppr_push(g, u, spec.ppr.alpha, spec.ppr.epsilon)
        sample = topk_ppr(scores, spec.ppr.top_k)
        walk_nodes = 0
    if spec.structure == "spd":
        sample = NodeSetSample(
            seed=sample.seed,
            members=sample.members,
            features=spd_encode(g, u, sample.members, spec.spd_cap),
        )
    return sample, walk_nodes


@dataclass(frozen=True)
class SamplingResult:
    samples: list[NodeSetSample]
    walk_nodes: np.ndarray
    seconds: float

    @property
    def set_sizes(self) -> np.ndarray:
        return np.array([s.size for s in self.samples], dtype=np.int64)


def _sample_range(g: Graph, seeds: range, spec: SamplerSpec) -> list[tuple[NodeSetSample, int]]:
    out = []
    for u in seeds:
        try:
            out.append(sample_node(g, u, spec))
        except Exception as err:
            raise SamplingError(u, err) from err
    return out


def _chunks(n: int, parts: int) -> list[range]:
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [range(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def sample_all(
    g: Graph, spec: SamplerSpec, threads: int = 1, *, progress: bool = False
) -> SamplingResult:
    """Sample every node; per-seed output does not depend on ``threads``."""
    if threads < 1:
        raise ValidationError(f"threads must be >= 1, got {threads}")
    started = time.perf_counter()
    if threads == 1:
        parts = [
            _sample_range(g, range(u, u + 1), spec)
            for u in tqdm(range(g.n), desc="sampling", disable=not progress)
        ]
    else:
        chunks = _chunks(g.n, threads * 4)
        parts = Parallel(n_jobs=threads, backend="threading")(
            delayed(_sample_range)(g, chunk, spec) for chunk in chunks
        )
    flat = [item for part in parts for item in part]
    samples = [s for s, _ in flat]
    walk_nodes = np.array([w for _, w in flat], dtype=np.int64)
    seconds = time.perf_counter() - started
    logger.info(
        "Sampled %d seeds (%s/%s) with %d thread(s) in %.2fs",
        g.n,
        spec.sampler,
        spec.structure,
        threads,
        seconds,
    )
    return SamplingResult(samples=samples, walk_nodes=walk_nodes, seconds=seconds)
