"""Exception types shared across the engine.

Every data-level failure raises a subclass of ChainVError so the CLI can map
any of them to a single exit code. Usage errors (bad flags) never reach this
hierarchy; they are handled by the argument parser.
"""

from __future__ import annotations


class ChainVError(Exception):
    """Base class for all data and contract violations raised by the engine."""


class ParseError(ChainVError):
    """A wire-format line could not be decoded at all.

    ``offset`` is the character offset of the failure within the line, when
    the underlying decoder reports one.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (offset {offset})"
        super().__init__(message)
        self.offset = offset


class SchemaError(ChainVError):
    """A decoded record violates a field-level invariant.

    ``field`` names the offending field so callers can report it precisely.
    """

    def __init__(self, field: str, message: str | None = None):
        detail = message or "invalid value"
        super().__init__(f"field '{field}': {detail}")
        self.field = field


class ShapeError(ChainVError):
    """Tensor arguments disagree on a shared dimension."""


class RangeError(ChainVError):
    """A scalar argument is outside its documented range."""


class EmptyInputError(ChainVError):
    """An aggregate operation received zero elements."""


class DegenerateGeometryError(ChainVError):
    """Geometry collapsed below the dimension the operation requires."""


class AlignmentError(ChainVError):
    """A script referenced a trace step that the trace stream does not carry."""


class DivisionError(ChainVError):
    """A metric denominator is zero."""


class DegenerateCorrelation(UserWarning):
    """Correlation requested on a constant vector; the result was pinned to 0."""
