from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from setsgrl.errors import StageError
from setsgrl.metrics import mean_std
from setsgrl.pipelines.common import (
    artifact_paths,
    read_jsonl,
    read_status,
    write_jsonl,
    write_manifest,
    write_table,
)
from setsgrl.utils.config import ExperimentConfig, config_hash, ensure_dirs

logger = logging.getLogger(__name__)

PIPELINE = "run"
SUCCESS_STATUSES = {"ok"}
STAGE_ORDER = ("sample", "train", "eval")


@dataclass
class StageSummary:
    pipeline: str
    repeat: int
    status: str
    report_path: str | None
    error: str | None


@dataclass
class RunReport:
    pipeline: str
    status: str
    started_at_utc: str
    finished_at_utc: str
    config_path: str
    config_hash: str
    report_path: str
    repeats: int
    stages: list[StageSummary]
    summary: list[dict[str, Any]]
    notes: dict[str, Any]


def _repeat_config(cfg: ExperimentConfig, repeat: int) -> ExperimentConfig:
    if cfg.run.repeats == 1:
        return cfg
    shifted = cfg.with_seed_offset(repeat)
    out_dir = Path(cfg.paths.out_dir) / f"repeat_{repeat:02d}"
    paths = shifted.paths.model_copy(update={"out_dir": out_dir})
    return shifted.model_copy(update={"paths": paths})


def summarize(per_repeat: list[list[dict[str, Any]]]) -> list[dict[str, Any]]:
    """mean/std/median/min/max per (scorer, metric) across repeats."""
    grouped: dict[tuple[str, str], list[float]] = defaultdict(list)
    for records in per_repeat:
        for rec in records:
            grouped[(rec["scorer"], rec["metric"])].append(float(rec["value"]))
    rows = []
    for (scorer, metric), values in sorted(grouped.items()):
        mean, std = mean_std(values)
        rows.append(
            {
                "scorer": scorer,
                "metric": metric,
                "mean": mean,
                "std": std,
                "median": float(np.median(values)),
                "min": min(values),
                "max": max(values),
                "repeats": len(values),
            }
        )
    return rows


def run(
    cfg: ExperimentConfig,
    *,
    config_path: Path | None = None,
    force: bool = False,
    strict: bool = True,
) -> Path:
    """
    End-to-end experiment: sample -> train -> eval, ``run.repeats`` times.

    Repeat r shifts every rng seed by r and writes into repeat_<r>/ (a single
    repeat writes into out_dir directly). Stages run with strict=False so each
    writes its own report; this orchestrator stops at the first failure, writes
    reports/run.json and raises StageError when ``strict``.
    """
    from setsgrl.pipelines.eval_sets import run as eval_run
    from setsgrl.pipelines.sample_sets import run as sample_run
    from setsgrl.pipelines.train_sets import run as train_run

    dirs = ensure_dirs(cfg)
    report_path = dirs["reports"] / f"{PIPELINE}.json"
    summary_jsonl = dirs["artifacts"] / "summary.jsonl"
    summary_csv = dirs["tables"] / "summary.csv"
    summary_tex = dirs["tables"] / "summary.tex"
    for p in [report_path, summary_jsonl, summary_csv, summary_tex]:
        if p.exists() and not force:
            raise FileExistsError(f"Exists: {p}. Use --force to overwrite.")

    started = datetime.now(timezone.utc)
    stage_fns = {"sample": sample_run, "train": train_run, "eval": eval_run}
    stages: list[StageSummary] = []
    per_repeat: list[list[dict[str, Any]]] = []
    failed: StageSummary | None = None

    for repeat in range(cfg.run.repeats):
        rcfg = _repeat_config(cfg, repeat)
        for name in STAGE_ORDER:
            if failed is not None:
                stages.append(
                    StageSummary(name, repeat, "skipped", None, "Skipped due to earlier failure.")
                )
                continue
            logger.info("Run: %s (repeat %d/%d)", name, repeat + 1, cfg.run.repeats)
            try:
                rp = stage_fns[name](rcfg, config_path=config_path, force=force, strict=False)
                status = read_status(rp)
                summary = StageSummary(name, repeat, status, str(rp), None)
                if status not in SUCCESS_STATUSES:
                    data = json.loads(rp.read_text(encoding="utf-8"))
                    summary.error = data.get("error")
            except Exception as err:
                summary = StageSummary(name, repeat, "error", None, repr(err))
            stages.append(summary)
            if summary.status not in SUCCESS_STATUSES:
                failed = summary
        if failed is None:
            per_repeat.append(read_jsonl(artifact_paths(rcfg)["metrics"]))

    summary_rows = summarize(per_repeat) if failed is None else []
    if summary_rows:
        write_jsonl(summary_rows, summary_jsonl)
        write_table(pd.DataFrame(summary_rows), summary_csv, summary_tex)

    overall_status = "ok" if failed is None else "error"
    report = RunReport(
        pipeline=PIPELINE,
        status=overall_status,
        started_at_utc=started.isoformat(),
        finished_at_utc=datetime.now(timezone.utc).isoformat(),
        config_path=str(config_path) if config_path else "",
        config_hash=config_hash(cfg),
        report_path=str(report_path),
        repeats=cfg.run.repeats,
        stages=stages,
        summary=summary_rows,
        notes={
            "stop_on_first_failure": True,
            "force_overwrite": force,
            "stage_order": list(STAGE_ORDER),
            "summary_jsonl": str(summary_jsonl) if summary_rows else None,
            "summary_csv": str(summary_csv) if summary_rows else None,
        },
    )
    report_path.write_text(json.dumps(asdict(report), indent=2), encoding="utf-8")
    write_manifest(cfg, dirs["root"], config_path)

    if strict and failed is not None:
        raise StageError(
            failed.pipeline, RuntimeError(f"{failed.error}; see report: {report_path}")
        )
    return report_path
