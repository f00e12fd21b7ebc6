"""Exception hierarchy.

The CLI maps the three families onto exit codes: ``ConfigError`` -> 2,
``AuditFailure`` -> 3, ``CapExceeded`` -> 4.
"""


class SumProductError(Exception):
    pass


class ConfigError(SumProductError, ValueError):
    pass


class NonPrimeP(ConfigError):
    pass


class ReduciblePolynomial(ConfigError):
    pass


class UnsupportedExtension(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class FieldMismatch(ConfigError):
    pass


class IndexOutOfRange(ConfigError):
    pass


class InvalidRank(ConfigError):
    pass


class SizeTooLarge(ConfigError):
    pass


class CapExceeded(SumProductError):
    pass


class EnumerationCapExceeded(CapExceeded):
    pass


class BudgetExceeded(CapExceeded):
    pass


class SpectralCapExceeded(CapExceeded):
    pass


class NoConvergence(CapExceeded):
    """Power iteration hit ``max_iter``; ``report`` holds the best iterate."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class AuditFailure(SumProductError):
    """A structural check failed. ``counterexample`` describes the first one."""

    def __init__(self, message, counterexample=None):
        super().__init__(message)
        self.counterexample = counterexample
