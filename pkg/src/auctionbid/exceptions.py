"""Exception hierarchy.

``ValidationError`` subclasses signal bad input (CLI exit code 2); anything
else escaping the CLI is treated as an internal error.
"""


class AuctionBidError(Exception):
    """Base class for all package errors."""


class ValidationError(AuctionBidError, ValueError):
    """Input failed a documented contract."""


class EmptyLadder(ValidationError):
    pass


class OffGridPrice(ValidationError):
    pass


class VolumeOutOfRange(ValidationError):
    pass


class IncompatibleGrids(ValidationError):
    pass


class InsufficientHistory(ValidationError):
    pass


class NonMonotoneExcess(ValidationError):
    pass


class DegenerateSlope(AuctionBidError):
    pass


class MissingHistory(ValidationError):
    pass


class WindowTooShort(ValidationError):
    pass


class LayoutMismatch(ValidationError):
    pass


class EmptyResiduals(ValidationError):
    pass


class EmptyGains(ValidationError):
    pass


class SingularS2(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class AlignmentError(ValidationError):
    pass


class MissingCurves(ValidationError):
    pass


class SchemaError(ValidationError):
    pass


class DuplicateRow(ValidationError):
    pass


class GapError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class Unbounded(AuctionBidError):
    """The piecewise-linear objective has no finite maximiser.

    ``fallback`` holds the corner adjacent to the winning sentinel so callers
    that must emit a bid can still do so.
    """

    def __init__(self, message, fallback):
        super().__init__(message)
        self.fallback = fallback
