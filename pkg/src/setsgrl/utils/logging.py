from __future__ import annotations

import logging
import sys

from rich.console import Console
from rich.logging import RichHandler

_NOISY = ("matplotlib", "PIL")


def setup_logging(level: str = "INFO") -> None:
    """
    Route root logging through RichHandler on stderr; stdout stays free for CLI result lines.
    """
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=True)],
        force=True,
    )
    for name in _NOISY:
        logging.getLogger(name).setLevel(max(logging.WARNING, logging.getLogger().level))


def progress_enabled() -> bool:
    # tqdm bars only when a human is watching
    return sys.stderr.isatty() and logging.getLogger().isEnabledFor(logging.INFO)
