"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid argument (bad shape, out-of-range parameter, unknown name)."""


class ConditioningError(ArithmeticError):
    """A kernel matrix could not be factorized or produced a negative variance."""


class InvalidBoundError(ValueError):
    """The RKHS norm bound is too small for the observed data."""


class TrainingDivergenceError(RuntimeError):
    """Feature-map training produced a non-finite loss."""

    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


class ConfigError(ValueError):
    """Run configuration failed validation."""
