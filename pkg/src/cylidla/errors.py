"""Exception types shared across the package."""


class CylidlaError(Exception):
    """Base class for all package errors."""

    kind = "error"


class InvalidParameter(CylidlaError, ValueError):
    kind = "invalid-parameter"


class NotVertexTransitive(InvalidParameter):
    kind = "not-vertex-transitive"


class NumericFailure(CylidlaError, RuntimeError):
    kind = "numeric-failure"


class BudgetExceeded(CylidlaError, RuntimeError):
    kind = "budget-exceeded"


class ConfigError(CylidlaError):
    kind = "config-parse"


class MissingInput(CylidlaError, FileNotFoundError):
    kind = "missing-file"
