"""Exception hierarchy; each class maps to a CLI exit code."""


class LabError(Exception):
    code = "ERROR"
    exit_code = 1


class PreconditionError(LabError, ValueError):
    code = "PRECONDITION"
    exit_code = 2


class PrecisionMismatch(PreconditionError):
    code = "PRECISION_MISMATCH"


class NotADiffeomorphism(PreconditionError):
    code = "NOT_A_DIFFEOMORPHISM"


class BracketError(PreconditionError):
    code = "BRACKET"


class ResourceCapExceeded(LabError):
    code = "RESOURCE_CAP"
    exit_code = 3

    def __init__(self, message, level_reached=None):
        super().__init__(message)
        self.level_reached = level_reached


class PrecisionExhausted(ResourceCapExceeded):
    code = "PRECISION_EXHAUSTED"


class NumericalInvariantViolation(LabError):
    code = "INVARIANT_VIOLATION"
    exit_code = 4


class PeriodicOrbitDetected(NumericalInvariantViolation):
    """The orbit behaves as if the rotation number were rational."""

    code = "PERIODIC_ORBIT"


class MonotonicityViolation(NumericalInvariantViolation):
    code = "MONOTONICITY"


class StagnationError(NumericalInvariantViolation):
    code = "STAGNATION"
