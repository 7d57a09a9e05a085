"""Exception types raised across the toolkit."""


class MatchaError(Exception):
    """Base class for every error raised by this package."""


class NonSymmetric(MatchaError, ValueError):
    pass


class GenerationFailed(MatchaError, RuntimeError):
    pass


class GraphFormatError(MatchaError, ValueError):
    pass


class Disconnected(MatchaError, ValueError):
    pass


class InvalidBudget(MatchaError, ValueError):
    pass


class DegeneratePlan(MatchaError, ValueError):
    pass


class InvalidPolicyParams(MatchaError, ValueError):
    pass


class IndexOutOfRange(MatchaError, IndexError):
    pass


class NonFinite(MatchaError, FloatingPointError):
    """A training update produced NaN or Inf; ``iteration`` says where."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class StepSizeViolation(MatchaError, ValueError):
    pass


class ConfigError(MatchaError, ValueError):
    pass
