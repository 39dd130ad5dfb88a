"""Exception hierarchy shared by all koopctl modules."""


class KoopctlError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(KoopctlError, ValueError):
    """Invalid configuration or user input."""


class DimensionError(KoopctlError, ValueError):
    """Operand shapes are incompatible."""


class InputError(KoopctlError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class NumericError(KoopctlError, ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class SingularMatrixError(NumericError):
    def __init__(self, pivot_index, pivot_value):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        super().__init__(
            f"matrix is singular: |pivot| = {abs(pivot_value):.3e} at index {pivot_index}"
        )


class RankDeficiencyError(NumericError):
    pass


class ConvergenceError(NumericError):
    pass


class ConjugacyError(NumericError):
    pass


class UncontrollableError(NumericError):
    pass


class RewardError(NumericError):
    pass


class IdentificationError(NumericError):
    pass


class TrainingError(NumericError):
    pass


class UsageError(KoopctlError, ValueError):
    """An API was called in a way it does not support."""
