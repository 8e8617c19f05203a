"""Exception taxonomy shared across the pipeline."""


class PlateSRError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(PlateSRError, ValueError):
    """An argument violates an operation's precondition."""


class DegenerateInputError(PlateSRError, ValueError):
    """Input admits no meaningful result (e.g. constant image thresholding)."""


class WeightSchemaError(PlateSRError):
    """Weight store does not match the declared architecture."""


class WeightFormatError(PlateSRError):
    """Weight container is malformed. Carries the byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UndefinedMetricError(PlateSRError, ValueError):
    """Metric has a zero denominator or an empty input."""


class AdapterError(PlateSRError):
    """External adapter process failed. Carries captured stderr."""

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class ManifestError(PlateSRError):
    """Manifest or annotation file is malformed."""
