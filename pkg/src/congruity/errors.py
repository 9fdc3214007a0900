"""Exception taxonomy shared across the package.

The CLI maps these to exit codes: validation problems (ShapeError,
ConfigError, ContractError, DataError) exit 1; file and format problems
(FormatError, OSError) exit 2.
"""


class CongruityError(Exception):
    """Base class for package-specific errors."""


class ShapeError(CongruityError):
    """Tensor shapes are incompatible with the requested operation."""


class ConfigError(CongruityError):
    """Invalid configuration value or combination."""


class ContractError(CongruityError):
    """An API precondition was violated."""


class DataError(CongruityError):
    """A sample or dataset failed validation."""


class FormatError(CongruityError):
    """A manifest, blob, or checkpoint file is malformed."""
