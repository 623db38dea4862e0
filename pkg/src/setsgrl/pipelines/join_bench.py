from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from setsgrl.errors import InternalError, ValidationError
from setsgrl.graph import Query
from setsgrl.pipelines.common import load_graph, run_stage, save_figure, write_jsonl, write_table
from setsgrl.sampling import sample_all
from setsgrl.spg import SpG, build_spg
from setsgrl.spjoin import JoinedQuery, join_batch
from setsgrl.utils.config import ExperimentConfig
from setsgrl.utils.logging import progress_enabled

logger = logging.getLogger(__name__)

PIPELINE = "join_bench"


def random_queries(n: int, count: int, arity: int, rng: np.random.Generator) -> list[Query]:
    if n < arity:
        raise ValidationError(f"graph with {n} nodes cannot host arity-{arity} queries")
    return [Query(tuple(rng.choice(n, size=arity, replace=False))) for _ in range(count)]


def _same_output(a: Sequence[JoinedQuery], b: Sequence[JoinedQuery]) -> bool:
    return len(a) == len(b) and all(
        x.query == y.query
        and np.array_equal(x.union_members, y.union_members)
        and np.array_equal(x.presence, y.presence)
        and x.zq.dtype == y.zq.dtype
        and np.array_equal(x.zq, y.zq)
        for x, y in zip(a, b)
    )


def _timed(spg: SpG, queries: list[Query], threads: int, rounds: int) -> tuple[float, list]:
    best, out = np.inf, []
    for _ in range(rounds):
        started = time.perf_counter()
        out = join_batch(spg, queries, threads)
        best = min(best, time.perf_counter() - started)
    return best, out


def bench_rows(
    spg: SpG, queries: list[Query], threads: Sequence[int], rounds: int = 1
) -> list[dict[str, Any]]:
    """Throughput per thread count; speedup is relative to the T=1 row."""
    base_seconds, reference = _timed(spg, queries, 1, rounds)
    rows = []
    for t in threads:
        seconds, out = (base_seconds, reference) if t == 1 else _timed(spg, queries, t, rounds)
        rows.append(
            {
                "threads": int(t),
                "seconds": seconds,
                "queries_per_second": len(queries) / seconds if seconds > 0 else float("inf"),
                "speedup": base_seconds / seconds if t != 1 else 1.0,
                "identical_output": t == 1 or _same_output(reference, out),
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
    SpJoin scaling benchmark over ``bench.threads`` on random queries.

    Output: artifacts/join_bench.jsonl, tables/join_bench.{csv,tex},
            figures/join_speedup.{pdf,png}
    Report: reports/join_bench.json
    """
    root = Path(cfg.paths.out_dir)
    rows_jsonl = root / "artifacts" / "join_bench.jsonl"
    table_csv = root / "tables" / "join_bench.csv"
    table_tex = root / "tables" / "join_bench.tex"
    fig_pdf = root / "figures" / "join_speedup.pdf"
    fig_png = root / "figures" / "join_speedup.png"
    b = cfg.bench

    def body(record: dict[str, Any]) -> None:
        g = load_graph(cfg)
        result = sample_all(g, cfg.sampler_spec(), max(b.threads), progress=progress_enabled())
        spg = build_spg(result.samples)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=b.rng_seed, spawn_key=(3,)))
        queries = random_queries(g.n, b.n_queries, b.arity, rng)

        rows = bench_rows(spg, queries, b.threads, b.rounds)
        write_jsonl(rows, rows_jsonl)
        df = pd.DataFrame(rows)
        write_table(df, table_csv, table_tex)

        plt.figure()
        plt.plot(df["threads"], df["speedup"], marker="o", label="measured")
        plt.plot(df["threads"], df["threads"], color="grey", linestyle=":", label="linear")
        plt.xlabel("threads")
        plt.ylabel("speedup vs 1 thread")
        plt.legend()
        plt.title("SpJoin scaling")
        save_figure(fig_pdf, fig_png)

        top = rows[-1]
        meets = top["speedup"] >= b.target_speedup
        if not meets:
            logger.warning(
                "Speedup %.2fx at %d threads is below the %.1fx target",
                top["speedup"],
                top["threads"],
                b.target_speedup,
            )
        record["artifacts"].update(
            {
                "rows": rows_jsonl,
                "table_csv": table_csv,
                "table_tex": table_tex,
                "speedup_pdf": fig_pdf,
                "speedup_png": fig_png,
            }
        )
        record["counts"].update(
            {"n": g.n, "queries": len(queries), "arity": b.arity, "spg_entries": spg.nnz}
        )
        record["notes"].update(
            {
                "rows": rows,
                "target_speedup": b.target_speedup,
                "meets_target": bool(meets),
                "rounds": b.rounds,
            }
        )
        if not all(r["identical_output"] for r in rows):
            raise InternalError("join output differs across thread counts")

    return run_stage(
        PIPELINE,
        cfg,
        config_path=config_path,
        outputs=[rows_jsonl, table_csv, table_tex, fig_pdf, fig_png],
        body=body,
        force=force,
        strict=strict,
    )
