"""Exception hierarchy.

Every error raised by the package derives from :class:`DSCPError`, which
itself is a :class:`ValueError` so callers validating user input can catch
either.
"""


class DSCPError(ValueError):
    """Base class for all package errors."""


# ingestion / frames
class NonMonotoneTime(DSCPError):
    pass


class IrregularSampling(DSCPError):
    pass


class RaggedFeatures(DSCPError):
    pass


class NonFinite(DSCPError):
    pass


class TooShort(DSCPError):
    pass


# predictors
class SingularFit(DSCPError):
    pass


class ShapeMismatch(DSCPError):
    pass


# clustering
class TooFewWindows(DSCPError):
    pass


class SingleCluster(DSCPError):
    pass


class EmptySequence(DSCPError):
    pass


class HorizonMismatch(DSCPError):
    pass


# error sets / conformal
class EmptySample(DSCPError):
    pass


class EmptyCluster(DSCPError):
    pass


class EmptySet(DSCPError):
    pass


# metrics
class Misaligned(DSCPError):
    pass


class EmptyInput(DSCPError):
    pass


# synth / config / scheduling
class InvalidSpec(DSCPError):
    pass


class InvalidConfig(DSCPError):
    pass


class InfeasiblePlan(DSCPError):
    pass
