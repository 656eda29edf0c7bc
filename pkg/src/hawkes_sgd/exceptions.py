"""Exception types shared across the package."""


class CapabilityError(NotImplementedError):
    """An operation was requested for a kernel family pair without a closed form."""


class PlanError(ValueError):
    """A sampling plan is inconsistent with the data it is applied to."""


class ValidationError(ValueError):
    """Input data failed validation (ingestion, config, event streams)."""


class ParseError(ValidationError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(RuntimeError):
    """A numerical failure (non-finite gradient, diverging iterate).

    `payload` holds a small dict of diagnostic values for post-mortem use.
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = dict(payload or {})
