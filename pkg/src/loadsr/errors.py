"""Exception types shared across the package.

The CLI maps these onto exit codes (see ``loadsr.cli``): configuration
problems exit 2, data problems exit 3, search failures exit 4.
"""


class ConfigError(ValueError):
    """Invalid configuration or precondition violation (bad depth, rate, ...)."""


class DataError(ValueError):
    """Dataset ingestion or shape problem (missing column, empty file, bad lag)."""


class SearchError(RuntimeError):
    """The search could not produce a result."""


class FitError(RuntimeError):
    """A baseline fit failed (rank-deficient design, degenerate data)."""


class DomainError(ValueError):
    """An operator received a non-finite input."""


class DegenerateEvaluationError(ArithmeticError):
    """A tree evaluation produced non-finite intermediates.

    This is a signal, not a crash: callers assign the expression zero reward.
    """


class EmptyPoolError(LookupError):
    """Queried a candidate pool that holds no entries."""


class ExpressionParseError(ValueError):
    """An expression string does not conform to the rendering grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position
