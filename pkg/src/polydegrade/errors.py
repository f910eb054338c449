"""Exception types shared across the pipeline."""


class ValidationError(ValueError):
    """An argument or domain object violates its documented invariants."""


class ConfigurationError(ValueError):
    """A configuration is internally inconsistent or infeasible."""


class MeasurementError(ValueError):
    """Pixel accounting cannot be performed on the given canvases."""


class DecodeError(ValueError):
    """Byte stream is not a PNG this pipeline can read."""


class PredictionsError(ValueError):
    """A predictions file violates the CSV contract.

    ``lines`` holds 1-based line numbers of the offending rows, when known.
    """

    def __init__(self, message: str, lines: list[int] | None = None):
        super().__init__(message)
        self.lines = lines or []
