"""Exception types shared across the solver modules."""


class IapiError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(IapiError, ValueError):
    """An array argument has the wrong shape or dimension."""


class ConfigError(IapiError, ValueError):
    """A problem configuration file is malformed or inconsistent."""


class HistoryMismatchError(ConfigError):
    """A history file does not belong to the supplied configuration."""


class ExprSyntaxError(IapiError, ValueError):
    """Expression text could not be parsed.

    ``position`` is the 0-based character index at which parsing failed.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownIdentifierError(ExprSyntaxError):
    """An identifier is neither a variable, constant, nor known function."""


class WrongArityError(ExprSyntaxError):
    """A function call has the wrong number of arguments."""


class VariableOutOfRangeError(ExprSyntaxError):
    """A state variable index lies outside 1..n."""


class EvalError(IapiError, ArithmeticError):
    """Expression evaluation hit a domain violation (log of nonpositive,
    division by zero, fractional power of a negative, ...)."""


class NumericsError(IapiError, RuntimeError):
    """A numerical kernel failed to meet its accuracy contract."""


class RankDeficientError(IapiError, ValueError):
    """The least-squares regressor matrix is numerically rank deficient."""


class NonFiniteStateError(IapiError, RuntimeError):
    """The vector field returned NaN or Inf during integration."""


class TailNotNegligibleError(IapiError, RuntimeError):
    """The truncated infinite-horizon tail is too large to accept."""


class NoBracketError(IapiError, ValueError):
    """Bisection endpoints do not bracket the target level."""


class EmptyGridError(IapiError, ValueError):
    """No lattice point passed the region membership filter."""


class RayEscapedParentError(IapiError, RuntimeError):
    """A boundary ray left the parent region before crossing the level."""


class NonPositiveMinimumError(IapiError, RuntimeError):
    """The boundary minimum is at or below the collapse floor."""


class RegionCollapsedError(IapiError, RuntimeError):
    """The updated region radius fell below the floor."""


class ContainmentViolatedError(IapiError, ValueError):
    """The claimed enlargement set does not contain the current region."""


class UnsupportedDimensionError(IapiError, ValueError):
    """The operation is only defined for a specific state dimension."""


class AdmissibilityCheckFailedError(IapiError, RuntimeError):
    """The initial policy failed its simulation-based admissibility gate."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class NotFittedError(IapiError, RuntimeError):
    """The estimator was used before ``fit`` ran."""


class NotPositiveDefiniteWarning(UserWarning):
    """A fitted value function is nonpositive at some nonzero sample."""
