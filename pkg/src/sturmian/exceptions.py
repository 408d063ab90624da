"""Exception types raised across the package."""


__all__ = [
    "SturmianError",
    "PrecisionExhausted",
    "DigitsExhausted",
    "ProjectionError",
    "BranchAmbiguityError",
    "NonContractionError",
    "PreconditionError",
    "TooFewScalesError",
]


class SturmianError(Exception):
    """Base class for all package errors."""


class PrecisionExhausted(SturmianError):
    """A continued-fraction remainder can no longer be resolved at the working precision.

    Raised for rational inputs (the remainder hits zero) and for inputs whose
    next digit is ambiguous given the accumulated error bound.
    """


class DigitsExhausted(SturmianError):
    """A finite digit sequence is shorter than the number of digits requested."""


class ProjectionError(SturmianError):
    """Normal-line projection between Fricke levels failed to converge."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class BranchAmbiguityError(SturmianError):
    """Both preimage branches of the semiconjugacy lie too close to the linear prediction."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NonContractionError(SturmianError):
    """An iteration that should contract did not (hypothesis of the contraction principle violated)."""


class PreconditionError(SturmianError):
    """Input violates an operation's documented precondition."""


class TooFewScalesError(SturmianError):
    """Box counting was left with fewer than two usable scales."""
