"""Exception types raised across the package."""


class QBMError(Exception):
    """Base class for all package errors."""


class InvalidSubsetError(QBMError, ValueError):
    pass


class InvalidCovarianceError(QBMError, ValueError):
    pass


class UnphysicalStateError(QBMError, ValueError):
    pass


class ArityError(QBMError, ValueError):
    pass


class NumericalDegeneracyError(QBMError, ArithmeticError):
    pass


class InstabilityError(QBMError, ValueError):
    """Potential matrix is not positive definite.

    The offending eigenvalue is kept in ``min_eigenvalue``.
    """

    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class ConfigurationError(QBMError, ValueError):
    """Invalid experiment or measure configuration.

    ``field`` names the offending configuration key when there is one.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ConsistencyError(QBMError, RuntimeError):
    """An internal numerical-consistency check failed."""


class OracleInconclusiveError(QBMError, RuntimeError):
    pass
