"""Exception hierarchy shared by all geoseek modules."""


class GeoseekError(Exception):
    """Base class for library errors."""


class DomainError(GeoseekError, ValueError):
    """A chart point lies outside its chart domain."""


class ChartExitError(GeoseekError):
    """A geodesic or flow left the chart domain.

    ``last_point`` is the last state that was still inside the domain and
    ``trajectory`` holds the partial flow when raised by an integrator.
    """

    def __init__(self, message, last_point=None, trajectory=None):
        super().__init__(message)
        self.last_point = last_point
        self.trajectory = trajectory


class UnsupportedOperationError(GeoseekError, NotImplementedError):
    pass


class NumericalError(GeoseekError, ArithmeticError):
    pass


class FrequencyError(GeoseekError, ValueError):
    """Dither multipliers violate the non-resonance conditions."""

    def __init__(self, violations):
        self.violations = list(violations)
        text = "; ".join(str(v) for v in self.violations)
        super().__init__(f"dither frequencies violate non-resonance: {text}")


class OracleContractError(GeoseekError, ValueError):
    """The cost oracle returned a value outside its contract (negative or NaN)."""


class IntegrationDivergedError(GeoseekError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class DegenerateFitError(GeoseekError, ValueError):
    """A log-log fit was requested on values at the rounding floor."""


class ConfigError(GeoseekError, ValueError):
    """Unreadable or invalid experiment config; ``violations`` lists every problem."""

    def __init__(self, message, violations=()):
        self.violations = list(violations)
        if self.violations:
            message = message + "\n" + "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(message)
