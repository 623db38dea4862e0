"""Exception hierarchy shared by the library modules and the pipelines."""

from __future__ import annotations


class SetSgrlError(Exception):
    """Base class for every error raised by setsgrl."""


class ValidationError(SetSgrlError, ValueError):
    """An input violates a documented precondition."""


class ParseError(ValidationError):
    def __init__(self, message: str, line_number: int) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class SamplingError(SetSgrlError):
    def __init__(self, seed: int, cause: BaseException) -> None:
        super().__init__(f"sampling failed for seed {seed}: {cause}")
        self.seed = seed


class JoinError(SetSgrlError):
    def __init__(self, query_index: int, cause: BaseException) -> None:
        super().__init__(f"join failed for query #{query_index}: {cause}")
        self.query_index = query_index


class TrainingError(SetSgrlError, RuntimeError):
    def __init__(self, message: str, batch_index: int) -> None:
        super().__init__(f"batch {batch_index}: {message}")
        self.batch_index = batch_index


class InternalError(SetSgrlError, RuntimeError):
    """An algorithm invariant was broken; indicates a bug, not bad input."""


class StageError(SetSgrlError):
    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__(f"stage '{stage}' failed: {cause!r}")
        self.stage = stage
