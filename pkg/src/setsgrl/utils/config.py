from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from setsgrl.model import AggrName, ModelSpec, NegativeMode, TrainConfig
from setsgrl.sampling import (
    DEFAULT_ALPHA,
    DEFAULT_EPSILON,
    PprConfig,
    SamplerSpec,
    StructureName,
    WalkConfig,
)

MANIFEST_KEY = "manifest_version"


def load_cfg(config_path: Path) -> dict[str, Any]:
    """Load YAML config (or the config embedded in a run manifest)."""
    p = Path(config_path)
    if not p.exists():
        raise FileNotFoundError(f"Config not found: {p}")
    data = yaml.safe_load(p.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError("Config root must be a mapping/dict.")
    if MANIFEST_KEY in data:
        data = data["config"]
        if not isinstance(data, dict):
            raise ValueError(f"Manifest {p} has no 'config' mapping.")
    return data


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class PathsConfig(_Section):
    out_dir: Path = Path("outputs/run")


class LoggingConfig(_Section):
    level: str = "INFO"


class SyntheticConfig(_Section):
    kind: Literal["sbm", "ring", "ba"] = "sbm"
    n: int = Field(2000, ge=1)
    blocks: int = Field(4, ge=1)
    p_in: float = Field(0.05, ge=0.0, le=1.0)
    p_out: float = Field(0.005, ge=0.0, le=1.0)
    degree: int = Field(2, ge=2)
    m_links: int = Field(3, ge=1)
    rng_seed: int = 0


class DatasetConfig(_Section):
    edges: Path | None = None
    attrs: Path | None = None
    queries: Path | None = None
    synthetic: SyntheticConfig | None = None
    standardize_attrs: bool = False
    remap_ids: bool = False

    @model_validator(mode="after")
    def _check_sources(self) -> DatasetConfig:
        if (self.edges is None) == (self.synthetic is None):
            raise ValueError("dataset needs exactly one of 'edges' or 'synthetic'")
        for name in ("edges", "attrs", "queries"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ValueError(f"dataset.{name} file not found: {path}")
        if self.attrs is not None and self.remap_ids:
            raise ValueError("attribute rows are keyed by raw node id; disable remap_ids")
        return self


class SplitConfig(_Section):
    train: float = Field(0.05, ge=0.0, le=1.0)
    valid: float = Field(0.01, ge=0.0, le=1.0)
    test: float = Field(0.01, ge=0.0, le=1.0)
    neg_per_pos: int = Field(10, ge=0)
    eval_negatives: int = Field(100, ge=1)
    valid_negatives: int = Field(10, ge=1)
    rng_seed: int = 0

    @model_validator(mode="after")
    def _check_fractions(self) -> SplitConfig:
        if self.train + self.valid + self.test > 1.0 + 1e-12:
            raise ValueError("split fractions must sum to <= 1")
        if self.train <= 0.0:
            raise ValueError("split.train must be > 0")
        return self


class SamplerConfig(_Section):
    sampler: Literal["walk", "ppr"] = "walk"
    num_walks: int = Field(100, ge=1, alias="M")
    num_steps: int = Field(3, ge=1, alias="m")
    top_k: int = Field(50, ge=1, alias="K")
    alpha: float = Field(DEFAULT_ALPHA, gt=0.0, le=1.0)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0.0)
    d_max: int | None = Field(None, ge=0)
    rng_seed: int = 0


class EncoderConfig(_Section):
    structure: StructureName = "lp"
    aggr: AggrName = "mean"
    hidden: int = Field(96, ge=1)
    append_presence: bool = False


class TrainSection(_Section):
    batch_size: int = Field(64, ge=1)
    learning_rate: float = Field(1e-3, ge=0.0)
    epochs: int = Field(20, ge=1)
    patience: int = Field(3, ge=1)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    cache_joins: bool = False
    negatives: NegativeMode = "fresh"
    rng_seed: int = 0


class RunConfig(_Section):
    threads: int = Field(1, ge=1)
    repeats: int = Field(1, ge=1)
    hits: list[int] = Field(default_factory=lambda: [10, 50, 100])
    primary_metric: str = "auc"

    @field_validator("hits")
    @classmethod
    def _positive_hits(cls, v: list[int]) -> list[int]:
        if not v or min(v) < 1:
            raise ValueError("run.hits needs positive cut-offs")
        return sorted(set(v))


class BenchConfig(_Section):
    threads: list[int] = Field(default_factory=lambda: [1, 2, 4, 8])
    n_queries: int = Field(10000, ge=1)
    arity: int = Field(2, ge=2)
    rounds: int = Field(1, ge=1)
    target_speedup: float = 4.0
    rng_seed: int = 0

    @field_validator("threads")
    @classmethod
    def _threads(cls, v: list[int]) -> list[int]:
        if not v or min(v) < 1:
            raise ValueError("bench.threads needs positive thread counts")
        v = sorted(set(v))
        return v if v[0] == 1 else [1, *v]


class ProjectConfig(_Section):
    name: str = "set-sgrl"
    env: str = "local"


class ExperimentConfig(_Section):
    project: ProjectConfig = Field(default_factory=ProjectConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    dataset: DatasetConfig
    split: SplitConfig = Field(default_factory=SplitConfig)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    train: TrainSection = Field(default_factory=TrainSection)
    run: RunConfig = Field(default_factory=RunConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)

    @model_validator(mode="after")
    def _check_combination(self) -> ExperimentConfig:
        s, e = self.sampler.sampler, self.encoder.structure
        if e == "lp" and s != "walk":
            raise ValueError("encoder.structure 'lp' requires sampler 'walk'")
        if e == "ppr" and s != "ppr":
            raise ValueError("encoder.structure 'ppr' requires sampler 'ppr'")
        return self

    def sampler_spec(self) -> SamplerSpec:
        s = self.sampler
        return SamplerSpec(
            sampler=s.sampler,
            structure=self.encoder.structure,
            walk=WalkConfig(s.num_walks, s.num_steps, s.rng_seed) if s.sampler == "walk" else None,
            ppr=PprConfig(s.alpha, s.epsilon, s.top_k) if s.sampler == "ppr" else None,
            d_max=s.d_max,
        )

    def model_spec(self, arity: int, d: int) -> ModelSpec:
        spec = self.sampler_spec()
        return ModelSpec(
            arity=arity,
            k=spec.feature_dim,
            d=d,
            hidden=self.encoder.hidden,
            aggr=self.encoder.aggr,
            structure=self.encoder.structure,
            walk_count=self.sampler.num_walks if self.encoder.structure == "lp" else None,
            spd_cap=spec.spd_cap if self.encoder.structure == "spd" else None,
            append_presence=self.encoder.append_presence,
        )

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(
            batch_size=t.batch_size,
            learning_rate=t.learning_rate,
            neg_per_pos=self.split.neg_per_pos,
            epochs=t.epochs,
            patience=t.patience,
            dropout=t.dropout,
            rng_seed=t.rng_seed,
            threads=self.run.threads,
            cache_joins=t.cache_joins,
            negatives=t.negatives,
        )

    def seeds(self) -> dict[str, int]:
        out = {
            "split": self.split.rng_seed,
            "sampler": self.sampler.rng_seed,
            "train": self.train.rng_seed,
            "bench": self.bench.rng_seed,
        }
        if self.dataset.synthetic is not None:
            out["synthetic"] = self.dataset.synthetic.rng_seed
        return out

    def with_seed_offset(self, offset: int) -> ExperimentConfig:
        raw = self.dump()
        _shift_seeds(raw, offset)
        return ExperimentConfig.model_validate(raw)

    def dump(self) -> dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)


SEED_KEYS = (
    ("split", "rng_seed"),
    ("sampler", "rng_seed"),
    ("train", "rng_seed"),
    ("bench", "rng_seed"),
    ("dataset", "synthetic", "rng_seed"),
)


def _nested(raw: dict[str, Any], keys: tuple[str, ...]) -> dict[str, Any] | None:
    node: Any = raw
    for key in keys[:-1]:
        node = node.get(key) if isinstance(node, dict) else None
        if node is None:
            return None
    return node if isinstance(node, dict) else None


def _shift_seeds(raw: dict[str, Any], offset: int) -> None:
    for keys in SEED_KEYS:
        parent = _nested(raw, keys)
        if parent is not None:
            parent[keys[-1]] = int(parent.get(keys[-1], 0)) + offset


def apply_overrides(
    raw: dict[str, Any],
    *,
    threads: int | None = None,
    seed: int | None = None,
    repeats: int | None = None,
    out_dir: Path | None = None,
    sets: list[str] | None = None,
) -> dict[str, Any]:
    """CLI flags on top of the file config; ``sets`` holds 'section.key=value' items."""
    raw = json.loads(json.dumps(raw, default=str))
    for item in sets or []:
        if "=" not in item:
            raise ValueError(f"--set expects section.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        keys = dotted.strip().split(".")
        node = raw
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ValueError(f"--set {dotted}: '{key}' is not a section")
        node[keys[-1]] = yaml.safe_load(value)
    if threads is not None:
        raw.setdefault("run", {})["threads"] = threads
    if repeats is not None:
        raw.setdefault("run", {})["repeats"] = repeats
    if out_dir is not None:
        raw.setdefault("paths", {})["out_dir"] = str(out_dir)
    if seed is not None:
        for keys in SEED_KEYS:
            parent = _nested(raw, keys)
            if parent is None and keys[0] != "dataset":
                parent = raw.setdefault(keys[0], {})
            if parent is not None:
                parent[keys[-1]] = seed
    return raw


def resolve_config(config_path: Path, **overrides: Any) -> ExperimentConfig:
    return ExperimentConfig.model_validate(apply_overrides(load_cfg(config_path), **overrides))


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(cfg.dump(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def ensure_dirs(cfg: ExperimentConfig) -> dict[str, Path]:
    """Create the run directory layout (idempotent)."""
    root = Path(cfg.paths.out_dir)
    paths = {
        "root": root,
        "artifacts": root / "artifacts",
        "reports": root / "reports",
        "tables": root / "tables",
        "figures": root / "figures",
    }
    for p in paths.values():
        p.mkdir(parents=True, exist_ok=True)
    return paths
