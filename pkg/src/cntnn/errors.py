"""Exception types shared across the package."""


class SpecError(ValueError):
    """Invalid architecture or layer specification."""


class ShapeError(ValueError):
    """Input/parameter shape mismatch; message names expected vs. provided."""


class DataFormatError(ValueError):
    """Dataset file does not match its binary format contract."""


class ConfigError(ValueError):
    """Experiment configuration is invalid; message names the offending field."""


class MetricError(ValueError):
    """A metric was requested on an unsupported layer kind or with bad arguments."""


class TrainingDiverged(RuntimeError):
    """Loss became NaN/Inf during training."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"training diverged (non-finite loss) at epoch {epoch}")
