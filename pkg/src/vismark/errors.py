"""Exception types shared across the package."""


class VismarkError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(VismarkError):
    """A file does not conform to its declared binary or JSON layout."""


class TruncatedFileError(FormatError):
    """A file payload is shorter than its header declares."""


class ValidationError(VismarkError):
    """A value-level invariant is violated (non-finite data, bad range, ...)."""


class ShapeError(ValidationError):
    """Array dimensions do not agree."""


class DomainError(VismarkError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateVocabularyError(VismarkError):
    """Linguistic filtering retained no tokens at all."""


class InsufficientDataError(VismarkError):
    """Too few countable positions to run a statistical test.

    Carries the number of positions that were countable so callers can
    report it.
    """

    def __init__(self, message: str, n_counted: int = 0):
        super().__init__(message)
        self.n_counted = n_counted


class ConfigError(VismarkError):
    """Mutually inconsistent configuration, e.g. a vocabulary size mismatch."""
