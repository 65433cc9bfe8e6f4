"""Exception hierarchy shared across the package."""


class PlanloopError(Exception):
    """Base class for all package errors."""


class ParseError(PlanloopError):
    """Malformed input with a known location."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(PlanloopError):
    """Input is well-formed but violates the declared schema."""


class DemoValidationError(PlanloopError):
    """A demonstration violates a structural invariant."""


class SegmentationError(PlanloopError):
    """Segmentation preconditions not met (no interaction, bad ordering, ...)."""


class VariantError(PlanloopError):
    """Executable/semantic tree variant used where the other is required."""


class TreeError(PlanloopError):
    """A behavior tree violates a structural invariant."""


class RepairError(PlanloopError):
    """Raw LLM output could not be repaired into a valid tree.

    Carries the raw text so callers can surface it to the user for rephrasing.
    """

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class DecodeError(PlanloopError):
    """Semantic entry cannot be converted back to numbers."""


class BackendError(PlanloopError):
    """LLM backend transport failure; retriable."""


class SessionError(PlanloopError):
    """Refinement session misuse (restore at floor, rating version 0, ...)."""


class StoreError(PlanloopError):
    """Persistence failure."""


class StoreCorruptError(StoreError):
    """A persisted record failed to load and was quarantined."""
