"""Exception types shared across the package."""


class FgsmUnlearnError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(FgsmUnlearnError):
    """Tensor shapes do not conform; the message names the offending axes."""


class ValidationError(FgsmUnlearnError):
    """A value-level precondition failed (labels, ranges, empty inputs)."""


class CheckpointError(FgsmUnlearnError):
    """Base class for checkpoint file problems."""


class BadMagicError(CheckpointError):
    """File does not start with the expected magic bytes."""


class VersionError(CheckpointError):
    """Checkpoint format version is not supported."""


class TruncatedError(CheckpointError):
    """Payload is shorter than the manifest promises."""


class ManifestError(CheckpointError):
    """Tensor manifest disagrees with the expected parameter set."""


class IdxFormatError(FgsmUnlearnError):
    """An IDX data file is missing, malformed, or inconsistent."""


class DatasetFloorError(FgsmUnlearnError):
    """Deleting k more examples would shrink the train set below the floor."""
