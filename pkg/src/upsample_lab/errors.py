"""Exception types raised across the package."""


class UpsampleLabError(Exception):
    """Base class for all package errors."""


class ShapeError(UpsampleLabError, ValueError):
    """Array shapes or channel counts are incompatible."""


class ConfigError(UpsampleLabError, ValueError):
    """A layer, stack, or analysis configuration is invalid."""


class RateMismatchError(ConfigError):
    """A signal's sampling rate does not match what a stack expects."""


class TapeError(UpsampleLabError, RuntimeError):
    """Reverse-mode tape misuse, e.g. backward before forward."""


class TrainingDivergedError(UpsampleLabError, FloatingPointError):
    """Loss became non-finite during training."""

    def __init__(self, step: int, loss: float):
        super().__init__(f"training diverged at step {step} (loss={loss})")
        self.step = step
        self.loss = loss
