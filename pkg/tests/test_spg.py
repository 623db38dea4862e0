from __future__ import annotations

import numpy as np
import pytest

from setsgrl import spg as spg_mod
from setsgrl.errors import ValidationError
from setsgrl.sampling import NodeSetSample, SamplerSpec, WalkConfig, sample_all
from setsgrl.spg import SpG, build_spg, intern_rows, read_spg, write_spg
from tests.conftest import random_graph


def _sample(seed: int, members: list[int], rows: list[list[int]]) -> NodeSetSample:
    return NodeSetSample(
        seed=seed,
        members=np.array(members, dtype=np.int32),
        features=np.array(rows, dtype=np.int32),
    )


@pytest.fixture
def small_samples() -> list[NodeSetSample]:
    return [
        _sample(0, [0, 1], [[4, 0], [0, 4]]),
        _sample(1, [0, 1, 2], [[0, 2], [4, 0], [0, 2]]),
        _sample(2, [1, 2], [[0, 4], [4, 0]]),
    ]


def test_build_reproduces_every_row(small_samples) -> None:
    spg = build_spg(small_samples)
    assert spg.n == 3 and spg.k == 2 and spg.nnz == 7
    for s in small_samples:
        members, _ = spg.row(s.seed)
        np.testing.assert_array_equal(members, s.members)
        np.testing.assert_array_equal(spg.features(s.seed), s.features)
    spg.validate()


def test_bank_is_deduplicated_in_first_occurrence_order(small_samples) -> None:
    spg = build_spg(small_samples)
    # rows: [4,0] [0,4] [0,2] [4,0] [0,2] [0,4] [4,0]
    assert spg.bank.tolist() == [[4, 0], [0, 4], [0, 2]]
    assert spg.sfptr.tolist() == [0, 1, 2, 0, 2, 1, 0]


def test_interning_is_sound(rng) -> None:
    rows = rng.integers(0, 3, size=(500, 3)).astype(np.int32)
    bank, ptr = intern_rows(rows)
    np.testing.assert_array_equal(bank[ptr], rows)
    assert np.unique(bank, axis=0).shape[0] == bank.shape[0]
    for i, j in rng.integers(0, rows.shape[0], size=(300, 2)):
        assert (ptr[i] == ptr[j]) == bool(np.array_equal(rows[i], rows[j]))


def test_interning_separates_signed_zero() -> None:
    rows = np.array([[0.0], [-0.0], [0.0]], dtype=np.float32)
    bank, ptr = intern_rows(rows)
    assert bank.shape[0] == 2
    assert ptr.tolist() == [0, 1, 0]


def test_zero_width_features_share_one_bank_row() -> None:
    samples = [_sample(0, [0], [[]]), _sample(1, [0, 1], [[], []])]
    spg = build_spg(samples)
    assert spg.k == 0
    assert spg.c == 1
    assert spg.sfptr.tolist() == [0, 0, 0]


def test_stats_byte_accounting_on_sampled_graph() -> None:
    g = random_graph(60, 0.08, np.random.default_rng(4))
    result = sample_all(g, SamplerSpec("walk", "lp", walk=WalkConfig(6, 3, rng_seed=2)), 1)
    spg = build_spg(result.samples)
    stats = spg.stats()
    assert stats["total_entries"] == int(result.set_sizes.sum())
    assert stats["bytes_structure"] == (spg.n + 1 + 2 * spg.nnz) * 4
    assert stats["bytes_features"] == spg.c * spg.k * 4
    assert stats["unique_features"] <= stats["total_entries"]


def test_snapshot_round_trip(tmp_path, small_samples) -> None:
    spg = build_spg(small_samples)
    path = write_spg(spg, tmp_path / "nested" / "spg.bin")
    again = read_spg(path)
    for name in ("indptr", "indices", "sfptr", "bank"):
        np.testing.assert_array_equal(getattr(again, name), getattr(spg, name))
    assert again.bank.dtype == spg.bank.dtype


def test_snapshot_truncation_is_detected(tmp_path, small_samples) -> None:
    path = write_spg(build_spg(small_samples), tmp_path / "spg.bin")
    data = path.read_bytes()
    path.write_bytes(data[:-4])
    with pytest.raises(ValidationError, match="header implies"):
        read_spg(path)
    path.write_bytes(b"NOTASPG!" + data[8:])
    with pytest.raises(ValidationError, match="not an SpG"):
        read_spg(path)


def test_frozen_arrays(small_samples) -> None:
    spg = build_spg(small_samples)
    with pytest.raises(ValueError):
        spg.indices[0] = 5


@pytest.mark.parametrize(
    "samples",
    [
        [_sample(1, [1], [[1]])],  # sample out of seed order
        [_sample(0, [1], [[1]]), _sample(1, [1], [[1]])],  # seed absent from own set
        [_sample(0, [0, 0], [[1], [2]])],  # repeated member
        [_sample(0, [0], [[1]]), _sample(1, [1], [[1, 2]])],  # mixed k
    ],
    ids=["seed-order", "missing-seed", "not-ascending", "mixed-k"],
)
def test_build_rejects_malformed_samples(samples) -> None:
    with pytest.raises(ValidationError):
        build_spg(samples)


def test_index_limit_guard(monkeypatch, small_samples) -> None:
    monkeypatch.setattr(spg_mod, "INDEX_LIMIT", 6)
    with pytest.raises(ValidationError, match="32-bit"):
        build_spg(small_samples)


def test_validate_catches_duplicate_bank_rows(small_samples) -> None:
    spg = build_spg(small_samples)
    bank = np.vstack([spg.bank, spg.bank[:1]])
    broken = SpG(indptr=spg.indptr, indices=spg.indices, sfptr=spg.sfptr, bank=bank)
    with pytest.raises(ValidationError, match="distinct"):
        broken.validate()


def test_validate_catches_unsorted_row(small_samples) -> None:
    spg = build_spg(small_samples)
    indices = spg.indices.copy()
    indices[2], indices[3] = indices[3], indices[2]
    broken = SpG(indptr=spg.indptr, indices=indices, sfptr=spg.sfptr, bank=spg.bank)
    with pytest.raises(ValidationError):
        broken.validate()


def test_empty_graph() -> None:
    spg = build_spg([])
    assert spg.n == 0 and spg.nnz == 0
    assert spg.stats()["dedup_ratio"] == 0.0
