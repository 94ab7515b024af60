"""Exception hierarchy shared by all modules."""


class NumericError(Exception):
    """Base class for numerical failures (CLI exit code 3)."""


class DomainError(NumericError, ValueError):
    pass


class PoleProximity(NumericError):
    pass


class ConvergenceFailure(NumericError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class BoundaryInput(NumericError, ValueError):
    pass


class ToleranceNotMet(NumericError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class RegimeMismatch(NumericError):
    pass


class NoisyGradient(NumericError):
    pass


class ConstraintNotMet(NumericError):
    def __init__(self, message, residual=float("nan"), best=None):
        super().__init__(message)
        self.residual = residual
        self.best = best
