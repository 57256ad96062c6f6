"""Exception types shared across the package."""


class NLSLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(NLSLabError, ValueError):
    """A parameter is outside its allowed range.

    ``field`` names the offending parameter so callers (and the config
    parser) can point at it.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class DomainError(NLSLabError, ValueError):
    """A formula was evaluated outside its domain of validity."""


class GuardViolation(NLSLabError, RuntimeError):
    """An evolution left the regime where the periodic box is trustworthy."""

    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(f"t={time:.17g}: {message}")


class ExtractionError(NLSLabError, RuntimeError):
    """Scattering-state extraction could not be carried out."""


class CrossCheckError(NLSLabError, RuntimeError):
    """Two independent evaluations of the same quantity disagree."""


class FormatError(NLSLabError, ValueError):
    """A snapshot file is malformed."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"byte {offset}: {message}")
