from __future__ import annotations

import hashlib
import json
import logging
import platform
from collections.abc import Callable, Iterable
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from setsgrl.errors import StageError
from setsgrl.graph import Graph, load_attrs, read_edge_list, read_queries
from setsgrl.split import SplitFractions, SplitResult, split_inductive, split_queries
from setsgrl.synthetic import preferential_attachment, ring_lattice, sbm
from setsgrl.utils.config import MANIFEST_KEY, ExperimentConfig, config_hash, ensure_dirs

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
VERSIONED_PACKAGES = ("set-sgrl", "numpy", "scipy", "pandas", "scikit-learn", "joblib")


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def sha256_file(path: Path, chunk_size: int = 1024 * 1024) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class StageReport:
    pipeline: str
    status: str
    started_at_utc: str
    finished_at_utc: str
    config_path: str
    config_hash: str
    report_path: str
    artifacts: dict[str, str] = field(default_factory=dict)
    counts: dict[str, Any] = field(default_factory=dict)
    notes: dict[str, Any] = field(default_factory=dict)
    error: str | None = None


StageBody = Callable[[dict[str, Any]], None]


def run_stage(
    name: str,
    cfg: ExperimentConfig,
    *,
    config_path: Path | None,
    outputs: Iterable[Path],
    body: StageBody,
    force: bool,
    strict: bool,
) -> Path:
    """
    Common stage frame: overwrite check, report-then-raise, manifest.

    ``body`` fills the ``artifacts``/``counts``/``notes`` dicts of the record it
    receives. The JSON report is always written; with ``strict`` a failure is
    re-raised as StageError afterwards.
    """
    dirs = ensure_dirs(cfg)
    report_path = dirs["reports"] / f"{name}.json"
    for p in [report_path, *outputs]:
        if p.exists() and not force:
            raise FileExistsError(f"Exists: {p}. Use --force to overwrite.")

    record: dict[str, Any] = {"artifacts": {}, "counts": {}, "notes": {"force_overwrite": force}}
    started = _utc_now()
    status, error, cause = "ok", None, None
    logger.info("Stage %s: start", name)
    try:
        body(record)
    except Exception as err:
        status, error, cause = "error", repr(err), err
        logger.error("Stage %s failed: %r", name, err)

    report = StageReport(
        pipeline=name,
        status=status,
        started_at_utc=started,
        finished_at_utc=_utc_now(),
        config_path=str(config_path) if config_path else "",
        config_hash=config_hash(cfg),
        report_path=str(report_path),
        artifacts={k: str(v) for k, v in record["artifacts"].items()},
        counts=record["counts"],
        notes=record["notes"],
        error=error,
    )
    report_path.write_text(json.dumps(asdict(report), indent=2), encoding="utf-8")
    write_manifest(cfg, dirs["root"], config_path)

    if cause is not None and strict:
        raise StageError(name, cause) from cause
    return report_path


def read_status(report_path: Path) -> str:
    try:
        data = json.loads(report_path.read_text(encoding="utf-8"))
    except Exception:
        return "unknown"
    status = data.get("status")
    return str(status) if status is not None else "unknown"


def _versions() -> dict[str, str]:
    out = {"python": platform.python_version()}
    for pkg in VERSIONED_PACKAGES:
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def write_manifest(cfg: ExperimentConfig, root: Path, config_path: Path | None) -> Path:
    """Resolved config + hash + seeds + versions; loadable again as a config file."""
    manifest = {
        MANIFEST_KEY: MANIFEST_VERSION,
        "config_hash": config_hash(cfg),
        "config_path": str(config_path) if config_path else None,
        "seeds": cfg.seeds(),
        "versions": _versions(),
        "config": cfg.dump(),
    }
    path = Path(root) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path


def artifact_paths(cfg: ExperimentConfig) -> dict[str, Path]:
    art = Path(cfg.paths.out_dir) / "artifacts"
    return {
        "split": art / "split.npz",
        "spg": art / "spg.bin",
        "checkpoint": art / "model.ckpt",
        "history": art / "history.jsonl",
        "metrics": art / "metrics.jsonl",
    }


def require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"Missing {path}. {hint}")
    return path


def load_graph(cfg: ExperimentConfig) -> Graph:
    """Dataset graph from an edge list or a synthetic generator, attributes attached."""
    ds = cfg.dataset
    if ds.synthetic is not None:
        s = ds.synthetic
        rng = np.random.default_rng(s.rng_seed)
        if s.kind == "sbm":
            g, _ = sbm(s.n, s.blocks, s.p_in, s.p_out, rng)
        elif s.kind == "ring":
            g = ring_lattice(s.n, s.degree)
        else:
            g = preferential_attachment(s.n, s.m_links, rng)
    else:
        assert ds.edges is not None
        g = read_edge_list(ds.edges, remap=ds.remap_ids)
    if ds.attrs is not None:
        g = g.with_attrs(load_attrs(ds.attrs, g.n, ds.standardize_attrs))
    logger.info("Graph: n=%d, edges=%d, d=%d", g.n, g.num_edges, g.d)
    return g


def load_node_attrs(cfg: ExperimentConfig, n: int) -> np.ndarray | None:
    ds = cfg.dataset
    return load_attrs(ds.attrs, n, ds.standardize_attrs) if ds.attrs is not None else None


def make_split(cfg: ExperimentConfig, g: Graph) -> SplitResult:
    s = cfg.split
    rng = np.random.default_rng(np.random.SeedSequence(entropy=s.rng_seed, spawn_key=(2,)))
    fractions = SplitFractions(s.train, s.valid, s.test)
    kwargs = {"eval_negatives": s.eval_negatives, "valid_negatives": s.valid_negatives}
    if cfg.dataset.queries is not None:
        _, queries, labels = read_queries(cfg.dataset.queries)
        positives = queries if labels is None else [q for q, y in zip(queries, labels) if y == 1]
        return split_queries(g, positives, fractions, s.neg_per_pos, rng, **kwargs)
    return split_inductive(g, fractions, s.neg_per_pos, rng, **kwargs)


def write_jsonl(records: Iterable[dict[str, Any]], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def read_jsonl(path: Path) -> list[dict[str, Any]]:
    with path.open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _tex_cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value).replace("_", r"\_").replace("%", r"\%")


def write_table(df: pd.DataFrame, csv_path: Path, tex_path: Path) -> None:
    """CSV plus a plain LaTeX tabular of the same frame."""
    df.to_csv(csv_path, index=False)

    align = "".join("r" if pd.api.types.is_numeric_dtype(df[c]) else "l" for c in df.columns)
    lines = []
    lines.append(rf"\begin{{tabular}}{{{align}}}")
    lines.append(r"\hline")
    lines.append(" & ".join(_tex_cell(c) for c in df.columns) + r" \\")
    lines.append(r"\hline")
    for row in df.itertuples(index=False):
        lines.append(" & ".join(_tex_cell(v) for v in row) + r" \\")
    lines.append(r"\hline")
    lines.append(r"\end{tabular}")
    tex_path.write_text("\n".join(lines), encoding="utf-8")


def save_figure(pdf_path: Path, png_path: Path) -> None:
    plt.tight_layout()
    plt.savefig(pdf_path)
    plt.savefig(png_path)
    plt.close()
