"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    pass


class DegenerateInputError(ValueError):
    pass


class IntegrationError(RuntimeError):
    pass


class TrainingDivergedError(RuntimeError):
    """Raised when a loss or gradient becomes non-finite.

    ``state`` carries whatever the caller wants dumped for a post-mortem
    (epoch, step, last finite loss).
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state or {}


class InfeasibleTargetError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


class ParseError(ValueError):
    pass
