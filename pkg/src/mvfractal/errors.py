"""Exception types raised across the package.

All of them derive from :class:`MvFractalError`, which is itself a
``ValueError`` so callers that only care about bad input can catch that.
"""


class MvFractalError(ValueError):
    """Base class for every error raised by mvfractal."""


# signal model
class EmptyInputError(MvFractalError):
    pass


class NonFiniteError(MvFractalError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"non-finite sample at index {index}")


class RateNonPositiveError(MvFractalError):
    pass


class EmbeddingFailure(MvFractalError):
    """Circulant embedding of the fGn covariance has negative eigenvalues."""


# matrix norms
class NotSymmetricError(MvFractalError):
    pass


class NotPositiveDefiniteError(MvFractalError):
    def __init__(self, min_eigenvalue, message=None):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(message or f"matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")


class DimensionMismatchError(MvFractalError):
    pass


class DegenerateSegmentError(MvFractalError):
    """A zero segment summary met a negative moment order."""


# fluctuation analysis
class ScaleTooLargeError(MvFractalError):
    pass


class RankDeficientFitError(MvFractalError):
    pass


class MultichannelInputError(MvFractalError):
    pass


class InsufficientSamplesError(MvFractalError):
    pass


# features
class TooFewScalesError(MvFractalError):
    pass


class GridTooCoarseError(MvFractalError):
    pass


# mvmd
class KTooLargeError(MvFractalError):
    pass


class SingleModeError(MvFractalError):
    pass


class IndexOutOfRangeError(MvFractalError):
    pass


# diagnosis
class InsufficientReferenceError(MvFractalError):
    pass


class NoSeparationError(MvFractalError):
    pass


# io
class ParseError(MvFractalError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ChannelNotFoundError(MvFractalError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"channel not found: {label!r}")


class TruncatedRecordError(MvFractalError):
    pass


class StageError(MvFractalError):
    """Wraps any failure inside the pipeline with the name of the stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
