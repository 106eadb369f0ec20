"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes: ConfigError -> 1,
DataError (and checkpoint errors) -> 2, NumericError -> 3.
"""


class DemandcastError(Exception):
    """Base class for all package errors."""


class ConfigError(DemandcastError):
    """Invalid configuration or usage."""


class DataError(DemandcastError):
    """Malformed, inconsistent or insufficient input data."""


class NumericError(DemandcastError):
    """Non-finite values encountered during training or checking."""


class CheckpointError(DataError):
    """Base class for checkpoint load failures."""


class BadMagicError(CheckpointError):
    """File does not start with the checkpoint magic bytes."""


class VersionError(CheckpointError):
    """Checkpoint version is not supported."""


class TruncatedError(CheckpointError):
    """Checkpoint file ends before the declared payload is complete."""


class ChecksumError(CheckpointError):
    """Checkpoint payload does not match its CRC."""
