class ExtractorError(Exception):
    """Base class for extraction failures."""


class ParseError(ExtractorError):
    """A tweet record could not be parsed."""


class CapacityError(ExtractorError):
    """A day produced more slices than the declared maximum."""


class ModelUnavailableError(ExtractorError):
    """The embedding model (or its runtime) is not installed/downloadable."""
