from __future__ import annotations

import json

import pydantic
import pytest

from setsgrl.utils.config import (
    ExperimentConfig,
    apply_overrides,
    config_hash,
    ensure_dirs,
    load_cfg,
    resolve_config,
)
from tests.conftest import tiny_config, write_config


@pytest.fixture
def cfg_path(tmp_path):
    return write_config(tmp_path / "cfg.yaml", tiny_config(tmp_path / "out"))


def test_defaults_and_aliases(cfg_path) -> None:
    cfg = resolve_config(cfg_path)
    assert cfg.sampler.num_walks == 8
    assert cfg.sampler.num_steps == 2
    assert cfg.run.hits == [1, 3]
    assert cfg.bench.threads == [1, 2]
    spec = cfg.sampler_spec()
    assert spec.walk is not None and spec.walk.num_walks == 8
    assert cfg.model_spec(arity=2, d=0).k == 3
    assert cfg.train_config().neg_per_pos == 2


def test_cli_overrides(cfg_path, tmp_path) -> None:
    cfg = resolve_config(
        cfg_path,
        threads=4,
        seed=17,
        repeats=3,
        out_dir=tmp_path / "elsewhere",
        sets=["sampler.M=32", "encoder.aggr=attention", "run.hits=[5, 1, 5]"],
    )
    assert cfg.run.threads == 4 and cfg.run.repeats == 3
    assert cfg.paths.out_dir == tmp_path / "elsewhere"
    assert cfg.sampler.num_walks == 32
    assert cfg.encoder.aggr == "attention"
    assert cfg.run.hits == [1, 5]
    assert set(cfg.seeds().values()) == {17}
    assert "synthetic" in cfg.seeds()


def test_bad_set_item(cfg_path) -> None:
    with pytest.raises(ValueError, match="section.key=value"):
        resolve_config(cfg_path, sets=["sampler.M"])
    with pytest.raises(pydantic.ValidationError):
        resolve_config(cfg_path, sets=["sampler.bogus=1"])


@pytest.mark.parametrize(
    "sections",
    [
        {"split": {"train": 0.7, "valid": 0.2, "test": 0.2}},
        {"split": {"train": 0.0}},
        {"sampler": {"sampler": "ppr"}},  # lp needs walks
        {"encoder": {"structure": "ppr"}},  # ppr needs the ppr sampler
        {"train": {"dropout": 1.0}},
        {"run": {"hits": [0]}},
        {"dataset": {"edges": "missing.txt"}},
    ],
)
def test_invalid_configs_rejected(tmp_path, sections) -> None:
    path = write_config(tmp_path / "bad.yaml", tiny_config(tmp_path / "out", **sections))
    with pytest.raises(pydantic.ValidationError):
        resolve_config(path)


def test_bench_threads_always_include_one(tmp_path) -> None:
    path = write_config(
        tmp_path / "cfg.yaml", tiny_config(tmp_path / "out", bench={"threads": [4, 2, 4]})
    )
    assert resolve_config(path).bench.threads == [1, 2, 4]


def test_seed_offset_shifts_every_seed(cfg_path) -> None:
    cfg = resolve_config(cfg_path, seed=5)
    shifted = cfg.with_seed_offset(3)
    assert set(shifted.seeds().values()) == {8}
    assert shifted.sampler.num_walks == cfg.sampler.num_walks


def test_hash_is_stable_and_sensitive(cfg_path) -> None:
    a = resolve_config(cfg_path)
    b = resolve_config(cfg_path)
    c = resolve_config(cfg_path, threads=2)
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)


def test_manifest_replays_config(cfg_path, tmp_path) -> None:
    cfg = resolve_config(cfg_path, seed=9)
    manifest = tmp_path / "manifest.json"
    manifest.write_text(
        json.dumps({"manifest_version": 1, "config": cfg.dump()}), encoding="utf-8"
    )
    replayed = ExperimentConfig.model_validate(load_cfg(manifest))
    assert config_hash(replayed) == config_hash(cfg)


def test_load_cfg_errors(tmp_path) -> None:
    with pytest.raises(FileNotFoundError):
        load_cfg(tmp_path / "nope.yaml")
    bad = tmp_path / "list.yaml"
    bad.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_cfg(bad)


def test_apply_overrides_leaves_input_untouched() -> None:
    raw = {"run": {"threads": 1}}
    out = apply_overrides(raw, threads=3)
    assert raw == {"run": {"threads": 1}}
    assert out["run"]["threads"] == 3


def test_ensure_dirs(cfg_path) -> None:
    cfg = resolve_config(cfg_path)
    paths = ensure_dirs(cfg)
    assert all(p.is_dir() for p in paths.values())
    assert set(paths) == {"root", "artifacts", "reports", "tables", "figures"}
