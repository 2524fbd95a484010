# zpgan/core/exceptions.py
from typing import Optional


class ZpganError(Exception):
    """Base class for every error raised on purpose by this package."""


class ConfigError(ZpganError, ValueError):
    pass


class DatasetFormatError(ZpganError, ValueError):
    pass


class ShapeMismatchError(ZpganError, ValueError):
    pass


class SizeMismatchError(DatasetFormatError):
    pass


class CheckpointError(ZpganError, ValueError):
    pass


class NonFiniteLossError(ZpganError, ArithmeticError):
    pass


class TrainingDivergedError(ZpganError, RuntimeError):
    def __init__(self, message: str, step: int, batch_index: int, dump_path: Optional[str] = None):
        super().__init__(message)
        self.step = step
        self.batch_index = batch_index
        self.dump_path = dump_path


class MissingInputError(ZpganError, FileNotFoundError):
    """A dataset, checkpoint or report directory the command needs is not there."""
