"""Exception and warning types raised across the package."""


class EnsembleOLSError(Exception):
    """Base class for all package errors."""


class ConstraintInfeasible(EnsembleOLSError, ValueError):
    """Fixed-size subsets cannot satisfy ``|S| < |T| - 1``."""


class RejectionBudgetExhausted(EnsembleOLSError, RuntimeError):
    """Coin-flip sampling hit ``max_rejects`` without an admissible draw."""


class EmptyInput(EnsembleOLSError, ValueError):
    pass


class InvalidDimensions(EnsembleOLSError, ValueError):
    pass


class DimensionMismatch(EnsembleOLSError, ValueError):
    pass


class SingularSystem(EnsembleOLSError, ArithmeticError):
    pass


class BudgetExceeded(EnsembleOLSError, MemoryError):
    pass


class DomainError(EnsembleOLSError, ValueError):
    """Closed-form expression evaluated outside its domain of validity."""


class DegenerateDenominator(DomainError):
    pass


class InfeasibleInterval(DomainError):
    pass


class InfeasibleSizes(EnsembleOLSError, ValueError):
    pass


class ConfigError(EnsembleOLSError, ValueError):
    """Invalid experiment or CLI configuration."""


class RankDeficient(EnsembleOLSError, ArithmeticError):
    """Raised only when even the SVD fallback cannot produce a solution."""


class RankDeficientWarning(UserWarning):
    """A member submatrix was numerically rank-deficient; SVD fallback used."""
