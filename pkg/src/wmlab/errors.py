"""Exception types shared across the package.

The CLI maps each class to a stable error category and exit code, so these
are part of the artifact's external contract.
"""


class WmlabError(Exception):
    """Base class for all package errors."""

    category = "runtime"


class UsageError(WmlabError):
    """An operation was called with arguments violating its contract."""

    category = "usage"


class ConfigError(WmlabError):
    """A configuration value (file, flag, or dataclass field) is invalid."""

    category = "config"


class DataFormatError(WmlabError):
    """A binary file failed magic/version/length validation."""

    category = "data"


class TrainingDiverged(WmlabError):
    """Loss or gradients became non-finite during training."""

    category = "runtime"
