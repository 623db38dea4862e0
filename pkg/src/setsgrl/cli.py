from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Annotated

import typer
from rich import print as rprint
from rich import print_json

if TYPE_CHECKING:
    from setsgrl.utils.config import ExperimentConfig

app = typer.Typer(no_args_is_help=True)

DEFAULT_CONFIG_PATH = Path("configs/default.yaml")

ConfigOpt = Annotated[Path, typer.Option("--config", help="YAML config or run manifest.")]
ThreadsOpt = Annotated[int | None, typer.Option("--threads", min=1)]
SeedOpt = Annotated[int | None, typer.Option("--seed", help="Sets every rng_seed.")]
OutDirOpt = Annotated[Path | None, typer.Option("--out-dir")]
SetOpt = Annotated[
    list[str] | None, typer.Option("--set", help="Override as section.key=value.")
]
ForceOpt = Annotated[bool, typer.Option("--force")]
LogLevelOpt = Annotated[str | None, typer.Option("--log-level")]


def _resolve(
    config: Path,
    *,
    threads: int | None,
    seed: int | None,
    out_dir: Path | None,
    sets: list[str] | None,
    log_level: str | None,
    repeats: int | None = None,
) -> ExperimentConfig:
    from setsgrl.utils.config import resolve_config
    from setsgrl.utils.logging import setup_logging

    cfg = resolve_config(
        config, threads=threads, seed=seed, repeats=repeats, out_dir=out_dir, sets=sets
    )
    setup_logging(log_level or cfg.logging.level)
    return cfg


@app.command("show-config")
def show_config(
    config: ConfigOpt = DEFAULT_CONFIG_PATH,
    threads: ThreadsOpt = None,
    seed: SeedOpt = None,
    out_dir: OutDirOpt = None,
    set_: SetOpt = None,
) -> None:
    """Print the resolved config (after overrides) and its hash."""
    from setsgrl.utils.config import config_hash, resolve_config

    cfg = resolve_config(config, threads=threads, seed=seed, out_dir=out_dir, sets=set_)
    print_json(data=cfg.dump())
    rprint(f"[bold]config_hash[/bold]: {config_hash(cfg)}")
    rprint(f"[bold]out_dir[/bold]: {Path(cfg.paths.out_dir).resolve()}")


@app.command("sample")
def sample(
    config: ConfigOpt = DEFAULT_CONFIG_PATH,
    threads: ThreadsOpt = None,
    seed: SeedOpt = None,
    out_dir: OutDirOpt = None,
    set_: SetOpt = None,
    force: ForceOpt = False,
    log_level: LogLevelOpt = None,
) -> None:
    """Split the dataset, sample node sets and write the SpG snapshot."""
    from setsgrl.pipelines.sample_sets import run

    cfg = _resolve(
        config, threads=threads, seed=seed, out_dir=out_dir, sets=set_, log_level=log_level
    )
    report = run(cfg, config_path=config, force=force)
    rprint(f"[green]OK[/green]: wrote report: {report}")


@app.command("train")
def train(
    config: ConfigOpt = DEFAULT_CONFIG_PATH,
    threads: ThreadsOpt = None,
    seed: SeedOpt = None,
    out_dir: OutDirOpt = None,
    set_: SetOpt = None,
    force: ForceOpt = False,
    log_level: LogLevelOpt = None,
) -> None:
    """Train the set encoder on the sampled SpG and write a checkpoint."""
    from setsgrl.pipelines.train_sets import run

    cfg = _resolve(
        config, threads=threads, seed=seed, out_dir=out_dir, sets=set_, log_level=log_level
    )
    report = run(cfg, config_path=config, force=force)
    rprint(f"[green]OK[/green]: wrote report: {report}")


@app.command("eval")
def evaluate(
    config: ConfigOpt = DEFAULT_CONFIG_PATH,
    threads: ThreadsOpt = None,
    seed: SeedOpt = None,
    out_dir: OutDirOpt = None,
    set_: SetOpt = None,
    force: ForceOpt = False,
    log_level: LogLevelOpt = None,
) -> None:
    """Score the test split (model and degree-product baseline) and write metrics."""
    from setsgrl.pipelines.eval_sets import run

    cfg = _resolve(
        config, threads=threads, seed=seed, out_dir=out_dir, sets=set_, log_level=log_level
    )
    report = run(cfg, config_path=config, force=force)
    rprint(f"[green]OK[/green]: wrote report: {report}")


@app.command("run")
def run_all(
    config: ConfigOpt = DEFAULT_CONFIG_PATH,
    threads: ThreadsOpt = None,
    seed: SeedOpt = None,
    repeats: Annotated[int | None, typer.Option("--repeats", min=1)] = None,
    out_dir: OutDirOpt = None,
    set_: SetOpt = None,
    force: ForceOpt = False,
    log_level: LogLevelOpt = None,
) -> None:
    """End-to-end sample -> train -> eval, optionally repeated with shifted seeds."""
    from setsgrl.pipelines.run_experiment import run

    cfg = _resolve(
        config,
        threads=threads,
        seed=seed,
        repeats=repeats,
        out_dir=out_dir,
        sets=set_,
        log_level=log_level,
    )
    report = run(cfg, config_path=config, force=force)
    rprint(f"[green]OK[/green]: wrote report: {report}")


@app.command("join-bench")
def join_bench(
    config: ConfigOpt = DEFAULT_CONFIG_PATH,
    seed: SeedOpt = None,
    out_dir: OutDirOpt = None,
    set_: SetOpt = None,
    force: ForceOpt = False,
    log_level: LogLevelOpt = None,
) -> None:
    """Measure SpJoin throughput and speedup over bench.threads."""
    from setsgrl.pipelines.join_bench import run

    cfg = _resolve(
        config, threads=None, seed=seed, out_dir=out_dir, sets=set_, log_level=log_level
    )
    report = run(cfg, config_path=config, force=force)
    rprint(f"[green]OK[/green]: wrote report: {report}")


@app.command("space-report")
def space_report(
    config: ConfigOpt = DEFAULT_CONFIG_PATH,
    threads: ThreadsOpt = None,
    seed: SeedOpt = None,
    out_dir: OutDirOpt = None,
    set_: SetOpt = None,
    force: ForceOpt = False,
    log_level: LogLevelOpt = None,
) -> None:
    """Report node duplication of the sampler and SpG compression."""
    from setsgrl.pipelines.space_report import run

    cfg = _resolve(
        config, threads=threads, seed=seed, out_dir=out_dir, sets=set_, log_level=log_level
    )
    report = run(cfg, config_path=config, force=force)
    rprint(f"[green]OK[/green]: wrote report: {report}")


if __name__ == "__main__":
    app()
