"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2, data
problems exit 3 and numerical failures exit 4.
"""


class PcsiBenchError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PcsiBenchError, ValueError):
    """Invalid parameters or configuration."""


class DataError(PcsiBenchError, ValueError):
    """Input data violates a contract."""


class NumericalError(PcsiBenchError, ArithmeticError):
    """A numerical routine failed."""


class DomainError(ConfigurationError):
    """Argument outside the function's domain."""


class SampleSizeError(DomainError):
    pass


class ShapeError(DataError):
    pass


class SchemaError(DataError):
    """Column layout does not match what was expected."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = list(columns)


class DuplicateIdError(DataError):
    pass


class ConsistencyError(DataError):
    pass


class EligibilityError(DataError):
    """A participant lacks the records required by the PCSI windows."""


class DegenerateTableError(DataError):
    pass


class DegenerateVariableError(DataError):
    pass


class FamilyError(ConfigurationError):
    pass


class FeasibilityError(ConfigurationError):
    pass


class SampleBudgetError(ConfigurationError):
    pass


class ConvergenceError(NumericalError):
    pass


class DefinitenessError(NumericalError):
    pass


class DivergenceError(NumericalError):
    pass


class SearchFailureError(NumericalError):
    pass
