"""Exception hierarchy shared by all envrisk modules."""


class EnvRiskError(ValueError):
    """Base class for all input and precondition failures."""


class EmptyInput(EnvRiskError):
    pass


class NegativeWeight(EnvRiskError):
    pass


class ZeroTotalWeight(EnvRiskError):
    pass


class NonFiniteValue(EnvRiskError):
    pass


class LengthMismatch(EnvRiskError):
    pass


class BinningInfeasible(EnvRiskError):
    pass


class DomainError(EnvRiskError):
    pass


class TooLarge(EnvRiskError):
    pass


class InvalidProbability(EnvRiskError):
    pass


class IndexOutOfRange(EnvRiskError, IndexError):
    pass


class GridNotAttainable(EnvRiskError):
    pass


class LevelNotAttainable(EnvRiskError):
    pass


class NonConcaveSpec(EnvRiskError):
    pass


class NonConcave(EnvRiskError):
    pass


class NotDominated(EnvRiskError):
    pass


class StateNotInSupport(EnvRiskError, KeyError):
    pass


class MalformedInput(EnvRiskError):
    """Raised for unreadable scenario files; carries the offending row."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row
