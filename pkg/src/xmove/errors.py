"""Exception types shared across the pipeline.

Every module raises subclasses of PipelineError so the CLI can map failures
to exit codes (1 for validation-class errors, 2 for missing prerequisites).
"""


class PipelineError(Exception):
    """Base class for all toolkit errors."""


class ParseError(PipelineError):
    """A source file could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(PipelineError):
    """Input data violates a structural invariant."""


class AlignmentError(PipelineError):
    """Two date-indexed collections have no usable overlap."""


class InsufficientDataError(PipelineError):
    """Not enough rows to satisfy a window or warm-up requirement."""


class ConfigError(PipelineError):
    """A configuration value is out of its legal range."""


class ShapeError(PipelineError):
    """Array dimensions do not match what an operation requires."""


class NormalizationError(PipelineError):
    """A feature could not be normalized (zero previous value)."""


class TrainingError(PipelineError):
    """Model training cannot proceed (e.g. a single-class dataset)."""


class EmbeddingFormatError(PipelineError):
    """An embedding file has an unknown magic or version."""


class DimensionError(PipelineError):
    """An embedding file declares an unexpected vector width."""


class CorruptionError(PipelineError):
    """An embedding file is structurally damaged; carries the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"offset {offset}: {message}"
        super().__init__(message)


class CapacityError(PipelineError):
    """A stack holds more slices than the declared maximum."""


class DependencyError(PipelineError):
    """A required upstream artifact is missing."""
