from __future__ import annotations

import numpy as np
import pytest
from scipy.sparse import csr_matrix, diags, identity
from scipy.sparse.csgraph import shortest_path
from scipy.sparse.linalg import spsolve

from setsgrl.errors import InternalError, ValidationError
from setsgrl.graph import Graph, from_edges
from setsgrl.sampling import (
    PprConfig,
    SamplerSpec,
    SparseScores,
    WalkConfig,
    normalize_lp,
    ppr_push,
    sample_all,
    sample_node,
    sample_walks,
    spd_encode,
    topk_ppr,
)
from setsgrl.synthetic import ring_lattice
from tests.conftest import random_graph


def _adjacency(g: Graph) -> csr_matrix:
    data = np.ones(g.adj_targets.size)
    return csr_matrix((data, g.adj_targets, g.adj_offsets), shape=(g.n, g.n))


def _transition(g: Graph) -> np.ndarray:
    a = _adjacency(g).toarray()
    deg = a.sum(axis=1)
    p = np.zeros_like(a)
    moving = deg > 0
    p[moving] = a[moving] / deg[moving, None]
    stalled = np.flatnonzero(~moving)
    p[stalled, stalled] = 1.0  # walkers stall on isolated nodes
    return p


def test_walk_sample_on_path(path4) -> None:
    cfg = WalkConfig(num_walks=50, num_steps=2, rng_seed=7)
    s = sample_walks(path4, 0, cfg)
    assert s.members[0] == 0
    assert set(s.members.tolist()) <= {0, 1, 2}
    assert s.k == 3
    # step 0 all at the seed, step 1 all at its only neighbor
    row0 = s.features[s.members.tolist().index(0)]
    row1 = s.features[s.members.tolist().index(1)]
    assert row0[0] == 50 and row1[1] == 50
    np.testing.assert_array_equal(s.features.sum(axis=0), [50, 50, 50])


def test_isolated_seed_keeps_only_itself() -> None:
    g = from_edges(3, [(1, 2)])
    s = sample_walks(g, 0, WalkConfig(num_walks=5, num_steps=3))
    assert s.members.tolist() == [0]
    assert s.features.tolist() == [[5, 5, 5, 5]]


@pytest.mark.parametrize("seed", [0, 3, 11])
def test_lp_frequencies_match_markov_powers(seed: int) -> None:
    rng = np.random.default_rng(seed)
    g = random_graph(12, 0.25, rng, connected=True)
    num_walks, num_steps = 10000, 3
    u = int(rng.integers(g.n))
    s = sample_walks(g, u, WalkConfig(num_walks, num_steps, rng_seed=seed))
    np.testing.assert_array_equal(s.features.sum(axis=0), np.full(num_steps + 1, num_walks))

    p = _transition(g)
    dist = np.zeros(g.n)
    dist[u] = 1.0
    exact = [dist]
    for _ in range(num_steps):
        dist = dist @ p
        exact.append(dist)
    exact = np.stack(exact, axis=1)  # (n, k)

    freq = np.zeros((g.n, num_steps + 1))
    freq[s.members] = normalize_lp(s.features, num_walks)
    band = 4.0 * np.sqrt(exact * (1 - exact) / num_walks) + 1e-12
    inside = np.abs(freq - exact) <= band
    assert inside.mean() >= 0.99


def test_normalize_lp_rejects_out_of_range_counts() -> None:
    with pytest.raises(ValidationError):
        normalize_lp(np.array([[3]]), 2)


def _power_iteration_ppr(g: Graph, u: int, alpha: float) -> np.ndarray:
    a = _adjacency(g)
    deg = np.asarray(a.sum(axis=1)).ravel()
    walk = diags(1.0 / deg) @ a
    e = np.zeros(g.n)
    e[u] = 1.0
    # pi = alpha e (I - (1-alpha) P)^-1  <=>  (I - (1-alpha) P^T) pi^T = alpha e
    return spsolve((identity(g.n) - (1 - alpha) * walk.T).tocsc(), alpha * e)


@pytest.mark.parametrize("seed", [1, 2, 5])
def test_ppr_push_matches_dense_solution(seed: int) -> None:
    rng = np.random.default_rng(seed)
    g = random_graph(150, 0.04, rng, connected=True)
    alpha, eps = 0.15, 1e-8
    u = int(rng.integers(g.n))
    scores = ppr_push(g, u, alpha, eps, debug=True)
    exact = _power_iteration_ppr(g, u, alpha)
    approx = np.zeros(g.n)
    approx[scores.nodes] = scores.values
    assert np.all(exact - approx >= -1e-12)
    assert np.all(exact - approx <= eps * g.degrees + 1e-12)
    for v, r in scores.residual.items():
        assert r < eps * g.degree(v)


def test_ppr_isolated_seed_gets_all_mass() -> None:
    g = from_edges(3, [(1, 2)])
    scores = ppr_push(g, 0)
    assert scores.as_dict() == {0: 1.0}


def test_ppr_hub_seed_below_push_threshold_keeps_itself() -> None:
    # epsilon * deg(0) = 2 > 1: the hub is never pushed
    g = from_edges(21, [(0, leaf) for leaf in range(1, 21)])
    cfg = PprConfig(alpha=0.15, epsilon=0.1, top_k=5)
    scores = ppr_push(g, 0, cfg.alpha, cfg.epsilon, debug=True)
    assert scores.as_dict() == {0: 0.0}
    assert scores.residual == {0: 1.0}

    result = sample_all(g, SamplerSpec("ppr", "ppr", ppr=cfg), threads=1)
    hub = result.samples[0]
    assert hub.members.tolist() == [0]
    assert hub.features[:, 0].tolist() == [0.0]
    for s in result.samples[1:]:
        assert s.seed in s.members.tolist()


def test_ppr_iteration_cap_is_internal_error() -> None:
    g = ring_lattice(50)
    with pytest.raises(InternalError):
        ppr_push(g, 0, 0.15, 1e-8, max_pushes=3)


def test_ppr_parameters_validated(path4) -> None:
    with pytest.raises(ValidationError):
        ppr_push(path4, 0, alpha=0.0)
    with pytest.raises(ValidationError):
        PprConfig(epsilon=-1.0)


def test_topk_ties_broken_by_id_and_seed_forced() -> None:
    scores = SparseScores(
        seed=9,
        nodes=np.array([1, 2, 3, 4, 9]),
        values=np.array([0.3, 0.5, 0.3, 0.3, 0.01]),
    )
    s = topk_ppr(scores, 3)
    assert s.members.tolist() == [1, 2, 3, 9]
    assert s.features.dtype == np.float32
    np.testing.assert_allclose(s.features[:, 0], [0.3, 0.5, 0.3, 0.01], rtol=1e-6)


def test_topk_matches_sort_oracle(rng) -> None:
    for _ in range(50):
        nodes = np.sort(rng.choice(100, size=30, replace=False))
        values = rng.integers(0, 5, size=30) / 4.0
        scores = SparseScores(seed=int(nodes[0]), nodes=nodes, values=values)
        oracle = sorted(zip(nodes.tolist(), values.tolist()), key=lambda t: (-t[1], t[0]))[:7]
        expected = {x for x, _ in oracle} | {scores.seed}
        assert set(topk_ppr(scores, 7).members.tolist()) == expected


@pytest.mark.parametrize("d_max", [0, 1, 2, 4])
def test_spd_matches_shortest_path(d_max: int) -> None:
    rng = np.random.default_rng(d_max)
    g = random_graph(40, 0.05, rng)
    dist = shortest_path(_adjacency(g), unweighted=True, directed=False)
    members = np.arange(g.n)
    for u in (0, 7, 21):
        got = spd_encode(g, u, members, d_max)[:, 0]
        expected = np.where(np.isinf(dist[u]), d_max + 1, np.minimum(dist[u], d_max + 1))
        np.testing.assert_array_equal(got, expected.astype(np.int32))


def test_sample_node_spd_on_walk_sets(path4) -> None:
    spec = SamplerSpec("walk", "spd", walk=WalkConfig(20, 2, rng_seed=3))
    s, walk_nodes = sample_node(path4, 0, spec)
    assert walk_nodes == 40
    assert s.k == 1
    depth = dict(zip(s.members.tolist(), s.features[:, 0].tolist()))
    assert depth[0] == 0 and depth.get(1, 1) == 1


def test_sampler_spec_rejects_bad_combination() -> None:
    with pytest.raises(ValidationError):
        SamplerSpec("ppr", "lp", ppr=PprConfig())


@pytest.mark.parametrize(
    "spec",
    [
        SamplerSpec("walk", "lp", walk=WalkConfig(16, 3, rng_seed=5)),
        SamplerSpec("ppr", "ppr", ppr=PprConfig(top_k=5)),
    ],
    ids=["walk", "ppr"],
)
def test_sample_all_independent_of_threads(spec: SamplerSpec) -> None:
    g = random_graph(80, 0.05, np.random.default_rng(9))
    one = sample_all(g, spec, threads=1)
    many = sample_all(g, spec, threads=8)
    assert len(one.samples) == g.n
    for a, b in zip(one.samples, many.samples):
        assert a.seed == b.seed
        np.testing.assert_array_equal(a.members, b.members)
        np.testing.assert_array_equal(a.features, b.features)


def test_ring_lattice_walk_duplication() -> None:
    g = ring_lattice(10000)
    spec = SamplerSpec("walk", "lp", walk=WalkConfig(200, 4))
    result = sample_all(g, spec, threads=4)
    sizes = result.set_sizes
    assert sizes.max() <= 9
    assert sizes.sum() <= 9 * g.n
    duplication = 1.0 - sizes.sum() / (g.n * (4 * 200 + 1))
    assert duplication >= 0.98
