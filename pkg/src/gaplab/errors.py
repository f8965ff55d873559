"""Exception hierarchy shared by all gaplab modules."""


class GaplabError(Exception):
    """Base class for every error raised by gaplab."""


class InfeasibleStateSpaceError(GaplabError):
    pass


class CapacityError(GaplabError):
    pass


class InvalidMoveError(GaplabError):
    pass


class MissingBoundaryError(GaplabError):
    pass


class ReducibilityError(GaplabError):
    pass


class InvalidRatesError(GaplabError):
    pass


class DetailedBalanceError(GaplabError):
    pass


class KernelAsymmetryError(GaplabError):
    pass


class ConvergenceError(GaplabError):
    pass


class DivergenceError(GaplabError):
    pass


class NotApplicableError(GaplabError):
    pass


class ConfigError(GaplabError):
    pass


class BudgetError(GaplabError):
    pass


class InfeasibleTargetError(GaplabError):
    pass
