"""Exception types raised by the workbench.

Each failure class maps onto one CLI exit code: configuration and
validation problems exit with 2, numerical failures exit with 1.
"""


class IptDesignError(Exception):
    """Base class for all workbench errors."""


class ConfigError(IptDesignError, ValueError):
    """Malformed or inconsistent user input (config file, parameters)."""


class NetworkValidationError(ConfigError):
    """One or more network parameters failed validation.

    Attributes
    ----------
    field_errors : dict
        Maps each offending field name to a short diagnostic.
    """

    def __init__(self, field_errors):
        self.field_errors = dict(field_errors)
        lines = [f"{k}: {v}" for k, v in sorted(self.field_errors.items())]
        super().__init__("invalid network parameters; " + "; ".join(lines))


class NotRealSignalError(IptDesignError, ValueError):
    """A spectrum lacks the conjugate symmetry of a real waveform."""


class NumericalError(IptDesignError, ArithmeticError):
    """Base class for numerical failures (exit code 1)."""


class SingularSystemError(NumericalError):
    """The assembled harmonic system is singular or badly conditioned."""

    def __init__(self, message, condition_estimate=float("inf")):
        self.condition_estimate = condition_estimate
        super().__init__(message)


class ResidualError(NumericalError):
    """A linear solve finished but missed its residual tolerance."""


class DesignError(NumericalError):
    """The design-equation root finder failed or a postcondition broke."""


class ConvergenceError(NumericalError):
    """A transient run did not reach periodic steady state.

    Attributes
    ----------
    history : tuple of float
        Periodicity residual after each simulated cycle.
    """

    def __init__(self, message, history=()):
        self.history = tuple(history)
        super().__init__(message)


class InstabilityError(NumericalError):
    """State growth during time stepping exceeded the stability guard."""
