from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from setsgrl.pipelines.common import load_graph, run_stage, save_figure, write_table
from setsgrl.sampling import SamplingResult, sample_all
from setsgrl.spg import build_spg
from setsgrl.utils.config import ExperimentConfig
from setsgrl.utils.logging import progress_enabled

logger = logging.getLogger(__name__)

PIPELINE = "space_report"


def duplication_rate(result: SamplingResult, num_walks: int, num_steps: int) -> float | None:
    """1 - sum |S_u| / (n * (m*M + 1)): share of visited walk positions that repeat a node."""
    n = len(result.samples)
    if n == 0:
        return None
    return 1.0 - float(result.set_sizes.sum()) / (n * (num_steps * num_walks + 1))


def space_summary(result: SamplingResult, stats: dict[str, Any], dup: float | None) -> dict:
    sizes = result.set_sizes
    return {
        **stats,
        "set_size_sum": int(sizes.sum()),
        "set_size_mean": float(sizes.mean()) if sizes.size else 0.0,
        "set_size_max": int(sizes.max()) if sizes.size else 0,
        "walk_nodes_sum": int(result.walk_nodes.sum()),
        "duplication_rate": dup,
    }


def run(
    cfg: ExperimentConfig,
    *,
    config_path: Path | None = None,
    force: bool = False,
    strict: bool = True,
) -> Path:
    """
    Node duplication and SpG compression of the configured sampler on the full graph.

    Output: tables/space_seeds.parquet, tables/space_summary.{csv,tex},
            figures/set_sizes.{pdf,png}
    Report: reports/space_report.json
    """
    root = Path(cfg.paths.out_dir)
    seeds_parquet = root / "tables" / "space_seeds.parquet"
    summary_csv = root / "tables" / "space_summary.csv"
    summary_tex = root / "tables" / "space_summary.tex"
    fig_pdf = root / "figures" / "set_sizes.pdf"
    fig_png = root / "figures" / "set_sizes.png"

    def body(record: dict[str, Any]) -> None:
        g = load_graph(cfg)
        spec = cfg.sampler_spec()
        result = sample_all(g, spec, cfg.run.threads, progress=progress_enabled())
        spg = build_spg(result.samples)

        dup = None
        if spec.walk is not None:
            dup = duplication_rate(result, spec.walk.num_walks, spec.walk.num_steps)
        summary = space_summary(result, spg.stats(), dup)

        per_seed = pd.DataFrame(
            {
                "seed": np.arange(g.n),
                "degree": g.degrees,
                "walk_nodes": result.walk_nodes,
                "set_size": result.set_sizes,
            }
        )
        per_seed.to_parquet(seeds_parquet, index=False, engine="pyarrow")
        write_table(
            pd.DataFrame([{"stat": k, "value": v} for k, v in summary.items()]),
            summary_csv,
            summary_tex,
        )

        plt.figure()
        plt.hist(per_seed["set_size"], bins=min(50, int(result.set_sizes.max(initial=1))))
        plt.xlabel("|S_u|")
        plt.ylabel("seeds")
        plt.title(f"Node-set sizes ({spec.sampler})")
        save_figure(fig_pdf, fig_png)

        if dup is not None:
            logger.info("Duplication rate %.4f, %d unique feature rows", dup, spg.c)
        record["artifacts"].update(
            {
                "space_seeds_parquet": seeds_parquet,
                "space_summary_csv": summary_csv,
                "space_summary_tex": summary_tex,
                "set_sizes_pdf": fig_pdf,
                "set_sizes_png": fig_png,
            }
        )
        record["counts"].update(summary)
        record["notes"].update({"sampler": spec.sampler, "structure": spec.structure})

    return run_stage(
        PIPELINE,
        cfg,
        config_path=config_path,
        outputs=[seeds_parquet, summary_csv, summary_tex, fig_pdf, fig_png],
        body=body,
        force=force,
        strict=strict,
    )
