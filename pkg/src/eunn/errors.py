"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not agree."""


class InvalidPlanError(ValueError):
    """A rotation layer has overlapping or out-of-range pairs."""


class UnsupportedDimensionError(ValueError):
    """The requested mesh cannot be built for this dimension."""


class ConfigError(ValueError):
    """A configuration value is out of range or inconsistent."""


class ValidationError(ValueError):
    """An input matrix or file failed a numerical validation check."""


class ParseError(ValueError):
    """A text file could not be parsed; carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


class IngestionError(IOError):
    """A dataset file is missing or corrupt."""


class TrainingDiverged(RuntimeError):
    """Loss or gradients became non-finite during training."""
