"""Exception hierarchy shared by every divrr module."""

from __future__ import annotations


class DivrrError(Exception):
    """Base class for all errors raised by this package."""


# scoring
class MissingLogit(DivrrError):
    pass


class NonPositiveTemperature(DivrrError):
    pass


class NonFiniteLogit(DivrrError):
    pass


class ProviderUnavailable(DivrrError):
    pass


class MalformedResponse(DivrrError):
    pass


class MissingCandidates(MalformedResponse):
    """None of the candidate tokens appeared among the returned top logprobs."""


# refinement
class BudgetExceeded(DivrrError):
    pass


class InvalidPose(DivrrError):
    pass


# memory
class EmbeddingDimensionMismatch(DivrrError):
    pass


class EmbedderUnavailable(DivrrError):
    pass


class DegenerateEmbedding(DivrrError):
    pass


class DuplicateWaypointAdmission(DivrrError):
    pass


class EmptyResultSet(DivrrError):
    pass


# world
class TimestepOutOfRange(DivrrError):
    pass


class HorizonExceeded(DivrrError):
    pass


class UnsatisfiableConstraints(DivrrError):
    pass


# exploration
class NoFreeNeighbor(DivrrError):
    pass


# remote
class TransportError(ProviderUnavailable):
    """Network failure or timeout that survived every retry."""


class EmptyCompletion(MalformedResponse):
    pass


# config / harness
class ParseError(DivrrError):
    pass


class ValidationError(DivrrError):
    def __init__(self, field: str, constraint: str):
        self.field = field
        self.constraint = constraint
        super().__init__(f"{field}: {constraint}")


class DuplicateLabel(DivrrError):
    pass


class SuiteParseError(DivrrError):
    pass


class PartialFailure(DivrrError):
    def __init__(self, failed: int, report=None):
        self.failed = failed
        self.report = report
        super().__init__(f"{failed} episode(s) aborted")


class IoFailure(DivrrError):
    pass
