# Exception hierarchy and CLI exit codes.

import enum


class ExitCode(enum.IntEnum):
    OK = 0
    FAILURE = 1   # generic failure, gradcheck above tolerance
    CONFIG = 2    # schema violation in a config file or override
    DIVERGED = 3  # NaN loss during training


class PhybenchError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(PhybenchError, ValueError):
    """A precondition of an operation was violated."""


class RankError(InvalidInputError):
    """Requested stream count exceeds the numerical rank."""


class NotHermitianError(InvalidInputError):
    """Matrix is not Hermitian within tolerance."""


class ConvergenceError(PhybenchError, ArithmeticError):
    """An iterative factorization did not converge."""


class TrainingDivergedError(PhybenchError, ArithmeticError):
    def __init__(self, iteration: int, loss: float):
        super().__init__(f"training diverged at iteration {iteration} (loss={loss})")
        self.iteration = iteration
        self.loss = loss


class ConfigError(PhybenchError, ValueError):
    def __init__(self, key_path: str, reason: str):
        super().__init__(f"{key_path}: {reason}")
        self.key_path = key_path
        self.reason = reason


class FileFormatError(PhybenchError, ValueError):
    """Checkpoint or dataset file is malformed."""
