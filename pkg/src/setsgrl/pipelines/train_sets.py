from __future__ import annotations

import logging
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any

import matplotlib.pyplot as plt
import pandas as pd

from setsgrl.model import history_records, save_checkpoint, train
from setsgrl.pipelines.common import (
    artifact_paths,
    load_node_attrs,
    require,
    run_stage,
    save_figure,
    sha256_file,
    write_jsonl,
    write_table,
)
from setsgrl.spg import read_spg
from setsgrl.split import load_split
from setsgrl.utils.config import ExperimentConfig
from setsgrl.utils.logging import progress_enabled

logger = logging.getLogger(__name__)

PIPELINE = "train"


def run(
    cfg: ExperimentConfig,
    *,
    config_path: Path | None = None,
    force: bool = False,
    strict: bool = True,
) -> Path:
    """
    Train the set encoder on the stored split and SpG.

    Input:  artifacts/split.npz, artifacts/spg.bin (from the sample stage)
    Output: artifacts/model.ckpt, artifacts/history.jsonl, tables/train_history.{csv,tex},
            figures/train_curve.{pdf,png}
    Report: reports/train.json
    """
    root = Path(cfg.paths.out_dir)
    art = artifact_paths(cfg)
    hist_csv = root / "tables" / "train_history.csv"
    hist_tex = root / "tables" / "train_history.tex"
    fig_pdf = root / "figures" / "train_curve.pdf"
    fig_png = root / "figures" / "train_curve.png"

    def body(record: dict[str, Any]) -> None:
        hint = "Run the sample stage first."
        split_path = require(art["split"], hint)
        spg = read_spg(require(art["spg"], hint))
        split = load_split(split_path)
        split = replace(split, graph=split.graph.with_attrs(load_node_attrs(cfg, split.graph.n)))
        if spg.n != split.graph.n:
            raise ValueError(f"SpG covers {spg.n} nodes, split graph has {split.graph.n}")

        spec = cfg.model_spec(split.arity, split.graph.d)
        tcfg = cfg.train_config()
        valid = split.valid.labeled() if split.valid.size else None
        result = train(
            split.graph,
            spg,
            split.train,
            spec,
            tcfg,
            valid=valid,
            exclude=split.positive_keys(),
            progress=progress_enabled(),
        )
        save_checkpoint(result.params, spec, art["checkpoint"])
        history = history_records(result.history)
        write_jsonl(history, art["history"])

        df = pd.DataFrame(history)
        write_table(df, hist_csv, hist_tex)

        plt.figure()
        plt.plot(df["epoch"], df["loss"], marker="o", label="train loss")
        if df["val_auc"].notna().any():
            plt.plot(df["epoch"], df["val_auc"], marker="s", label="valid AUC")
        plt.axvline(result.best_epoch, color="grey", linestyle="--", linewidth=1)
        plt.xlabel("epoch")
        plt.legend()
        plt.title("Training curve")
        save_figure(fig_pdf, fig_png)

        record["artifacts"].update(
            {
                "checkpoint": art["checkpoint"],
                "history": art["history"],
                "history_csv": hist_csv,
                "history_tex": hist_tex,
                "train_curve_pdf": fig_pdf,
                "train_curve_png": fig_png,
            }
        )
        record["counts"].update(
            {
                "train_queries": len(split.train),
                "valid_queries": len(valid) if valid else 0,
                "epochs_run": len(result.history),
                "best_epoch": result.best_epoch,
                "best_val_auc": next(
                    (h["val_auc"] for h in history if h["epoch"] == result.best_epoch), None
                ),
            }
        )
        record["notes"].update(
            {
                "model_spec": {
                    "arity": spec.arity,
                    "in_dim": spec.in_dim,
                    "hidden": spec.hidden,
                    "aggr": spec.aggr,
                    "structure": spec.structure,
                },
                "train_config": asdict(tcfg),
                "checkpoint_sha256": sha256_file(art["checkpoint"]),
            }
        )

    return run_stage(
        PIPELINE,
        cfg,
        config_path=config_path,
        outputs=[art["checkpoint"], art["history"], hist_csv, hist_tex, fig_pdf, fig_png],
        body=body,
        force=force,
        strict=strict,
    )
