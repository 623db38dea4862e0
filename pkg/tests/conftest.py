from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest
import yaml

from setsgrl.graph import Graph, from_edges

os.environ.setdefault("MPLBACKEND", "Agg")


def random_graph(n: int, p: float, rng: np.random.Generator, *, connected: bool = False) -> Graph:
    """Erdos-Renyi graph; ``connected`` adds a Hamiltonian path so no node is isolated."""
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    pairs = np.stack([iu[keep], ju[keep]], axis=1)
    if connected and n > 1:
        path = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
        pairs = np.concatenate([pairs, path])
    return from_edges(n, pairs)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def path4() -> Graph:
    """0 - 1 - 2 - 3"""
    return from_edges(4, [(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def star5() -> Graph:
    """Center 0 with leaves 1..4."""
    return from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)])


def tiny_config(out_dir: Path, **sections: dict) -> dict:
    """Small end-to-end config: 60-node SBM, short walks, one epoch."""
    cfg = {
        "paths": {"out_dir": str(out_dir)},
        "logging": {"level": "WARNING"},
        "dataset": {
            "synthetic": {"kind": "sbm", "n": 60, "blocks": 2, "p_in": 0.3, "p_out": 0.02}
        },
        "split": {
            "train": 0.3,
            "valid": 0.1,
            "test": 0.1,
            "neg_per_pos": 2,
            "eval_negatives": 5,
            "valid_negatives": 3,
        },
        "sampler": {"sampler": "walk", "M": 8, "m": 2},
        "encoder": {"structure": "lp", "aggr": "mean", "hidden": 8},
        "train": {"batch_size": 16, "epochs": 2, "patience": 2, "dropout": 0.0},
        "run": {"threads": 1, "hits": [1, 3]},
        "bench": {"threads": [1, 2], "n_queries": 50},
    }
    for name, values in sections.items():
        cfg.setdefault(name, {}).update(values)
    return cfg


def write_config(path: Path, cfg: dict) -> Path:
    path.write_text(yaml.safe_dump(cfg, sort_keys=False), encoding="utf-8")
    return path
