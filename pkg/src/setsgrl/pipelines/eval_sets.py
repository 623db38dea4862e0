from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path
from typing import Any

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from sklearn.metrics import roc_curve

from setsgrl.errors import ValidationError
from setsgrl.metrics import metric_records, ranked_from_arrays
from setsgrl.model import JoinSource, degree_product_scores, load_checkpoint, score_queries
from setsgrl.pipelines.common import (
    artifact_paths,
    load_node_attrs,
    require,
    run_stage,
    save_figure,
    write_jsonl,
    write_table,
)
from setsgrl.spg import read_spg
from setsgrl.split import load_split
from setsgrl.utils.config import ExperimentConfig

logger = logging.getLogger(__name__)

PIPELINE = "eval"
MODEL_SCORER = "set_encoder"
BASELINE_SCORER = "degree_product"


def run(
    cfg: ExperimentConfig,
    *,
    config_path: Path | None = None,
    force: bool = False,
    strict: bool = True,
) -> Path:
    """
    Score every test positive against its own negatives with the trained model
    and with the degree-product baseline.

    Input:  artifacts/split.npz, artifacts/spg.bin, artifacts/model.ckpt
    Output: artifacts/metrics.jsonl, tables/eval_metrics.{csv,tex}, figures/eval_roc.{pdf,png}
    Report: reports/eval.json
    """
    root = Path(cfg.paths.out_dir)
    art = artifact_paths(cfg)
    metrics_csv = root / "tables" / "eval_metrics.csv"
    metrics_tex = root / "tables" / "eval_metrics.tex"
    fig_pdf = root / "figures" / "eval_roc.pdf"
    fig_png = root / "figures" / "eval_roc.png"

    def body(record: dict[str, Any]) -> None:
        split_path = require(art["split"], "Run the sample stage first.")
        spg = read_spg(require(art["spg"], "Run the sample stage first."))
        params, spec = load_checkpoint(require(art["checkpoint"], "Run the train stage first."))
        split = load_split(split_path)
        split = replace(split, graph=split.graph.with_attrs(load_node_attrs(cfg, split.graph.n)))
        test = split.test
        if test.size == 0:
            raise ValidationError("split has no test positives; raise split.test")
        if spec.arity != split.arity:
            raise ValidationError(f"checkpoint arity {spec.arity} != split arity {split.arity}")

        pos_q, neg_q = test.positive_queries(), test.negative_queries()
        attrs = split.graph.attrs if spec.d else None
        joiner = JoinSource(spg, cfg.run.threads, cache=False)
        scorers = {
            MODEL_SCORER: lambda qs: score_queries(params, spec, spg, qs, attrs, joiner=joiner),
            BASELINE_SCORER: lambda qs: degree_product_scores(split.graph, qs),
        }

        records: list[dict[str, Any]] = []
        roc: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for name, score in scorers.items():
            pos = score(pos_q)
            neg = score(neg_q).reshape(test.size, -1)
            batch = ranked_from_arrays(pos, neg)
            for rec in metric_records(batch, cfg.run.hits):
                records.append({"scorer": name, **rec})
            labels = np.concatenate([np.ones(pos.size), np.zeros(neg.size)])
            fpr, tpr, _ = roc_curve(labels, np.concatenate([pos, neg.reshape(-1)]))
            roc[name] = (fpr, tpr)

        write_jsonl(records, art["metrics"])
        table = pd.DataFrame(records).pivot(index="metric", columns="scorer", values="value")
        write_table(table.reset_index(), metrics_csv, metrics_tex)

        plt.figure()
        for name, (fpr, tpr) in roc.items():
            plt.plot(fpr, tpr, label=name)
        plt.plot([0, 1], [0, 1], color="grey", linestyle=":", linewidth=1)
        plt.xlabel("false positive rate")
        plt.ylabel("true positive rate")
        plt.legend()
        plt.title("Test ROC")
        save_figure(fig_pdf, fig_png)

        values = {(r["scorer"], r["metric"]): r["value"] for r in records}
        primary = cfg.run.primary_metric
        if (MODEL_SCORER, primary) not in values:
            raise ValidationError(f"run.primary_metric {primary!r} is not a reported metric")
        record["artifacts"].update(
            {
                "metrics": art["metrics"],
                "metrics_csv": metrics_csv,
                "metrics_tex": metrics_tex,
                "roc_pdf": fig_pdf,
                "roc_png": fig_png,
            }
        )
        record["counts"].update(
            {
                "test_positives": test.size,
                "negatives_per_positive": int(test.negatives.shape[1]),
                "ties": next(r["n_ties"] for r in records if r["scorer"] == MODEL_SCORER),
            }
        )
        record["notes"].update(
            {
                "primary_metric": primary,
                "primary_value": values[(MODEL_SCORER, primary)],
                "baseline_value": values[(BASELINE_SCORER, primary)],
                "metrics": {f"{s}/{m}": v for (s, m), v in values.items()},
            }
        )
        logger.info(
            "Test %s: model=%.4f baseline=%.4f",
            primary,
            values[(MODEL_SCORER, primary)],
            values[(BASELINE_SCORER, primary)],
        )

    return run_stage(
        PIPELINE,
        cfg,
        config_path=config_path,
        outputs=[art["metrics"], metrics_csv, metrics_tex, fig_pdf, fig_png],
        body=body,
        force=force,
        strict=strict,
    )
