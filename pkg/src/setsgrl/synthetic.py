"""Synthetic graph generators for desk-scale experiments."""

from __future__ import annotations

import logging

import numpy as np

from setsgrl.errors import ValidationError
from setsgrl.graph import Graph, from_edges

logger = logging.getLogger(__name__)


def ring_lattice(n: int, degree: int = 2) -> Graph:
    """Each node linked to its ``degree // 2`` nearest neighbors on either side."""
    if degree < 2 or degree % 2:
        raise ValidationError(f"ring degree must be even and >= 2, got {degree}")
    if n <= degree:
        raise ValidationError(f"ring of {n} nodes cannot have degree {degree}")
    src = np.arange(n, dtype=np.int64)
    pairs = [np.stack([src, (src + j) % n], axis=1) for j in range(1, degree // 2 + 1)]
    return from_edges(n, np.concatenate(pairs))


def _triangle_pairs(t: np.ndarray, s: int) -> np.ndarray:
    """Decode linear indices of the strict upper triangle of an s x s matrix."""
    t = t.astype(np.int64)
    b = 2 * s - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * t)) / 2.0).astype(np.int64)

    def before(row: np.ndarray) -> np.ndarray:
        return row * (2 * s - row - 1) // 2

    # sqrt rounding can land one row off
    i = np.where(before(i) > t, i - 1, i)
    i = np.where(before(i + 1) <= t, i + 1, i)
    j = t - before(i) + i + 1
    return np.stack([i, j], axis=1)


def _sample_count(rng: np.random.Generator, population: int, p: float) -> np.ndarray:
    size = int(rng.binomial(population, p)) if population else 0
    return rng.choice(population, size=size, replace=False) if size else np.empty(0, np.int64)


def sbm(
    n: int,
    blocks: int,
    p_in: float,
    p_out: float,
    rng: np.random.Generator,
) -> tuple[Graph, np.ndarray]:
    """
    Stochastic block model over ``blocks`` near-equal contiguous blocks.

    Returns the graph and each node's block label. Edge counts per block pair are
    binomial, then drawn as distinct pairs, so the cost scales with edges, not n^2.
    """
    if blocks < 1 or n < blocks:
        raise ValidationError(f"cannot split {n} nodes into {blocks} blocks")
    for name, p in (("p_in", p_in), ("p_out", p_out)):
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"{name} must be in [0, 1], got {p}")
    bounds = np.linspace(0, n, blocks + 1).astype(np.int64)
    labels = np.repeat(np.arange(blocks), np.diff(bounds))
    parts: list[np.ndarray] = []
    for a in range(blocks):
        sa, oa = int(bounds[a + 1] - bounds[a]), int(bounds[a])
        picks = _sample_count(rng, sa * (sa - 1) // 2, p_in)
        parts.append(_triangle_pairs(picks, sa) + oa)
        for b in range(a + 1, blocks):
            sb, ob = int(bounds[b + 1] - bounds[b]), int(bounds[b])
            picks = _sample_count(rng, sa * sb, p_out).astype(np.int64)
            parts.append(np.stack([picks // sb + oa, picks % sb + ob], axis=1))
    g = from_edges(n, np.concatenate(parts) if parts else np.empty((0, 2), np.int64))
    logger.info("SBM: n=%d, blocks=%d, edges=%d", n, blocks, g.num_edges)
    return g, labels


def preferential_attachment(n: int, m_links: int, rng: np.random.Generator) -> Graph:
    """Barabasi-Albert growth: each new node links to ``m_links`` distinct degree-biased targets."""
    if m_links < 1 or n <= m_links:
        raise ValidationError(f"need n > m_links >= 1, got n={n}, m_links={m_links}")
    # endpoint pool: a node appears once per incident edge
    pool = np.empty(2 * m_links * n, dtype=np.int64)
    pool[:m_links] = np.arange(m_links)
    size = m_links
    pairs = np.empty((m_links * (n - m_links), 2), dtype=np.int64)
    row = 0
    for v in range(m_links, n):
        chosen: set[int] = set()
        while len(chosen) < m_links:
            chosen.add(int(pool[int(rng.integers(size))]))
        targets = np.fromiter(sorted(chosen), dtype=np.int64, count=m_links)
        pairs[row : row + m_links, 0] = v
        pairs[row : row + m_links, 1] = targets
        row += m_links
        pool[size : size + m_links] = targets
        pool[size + m_links : size + 2 * m_links] = v
        size += 2 * m_links
    return from_edges(n, pairs)
