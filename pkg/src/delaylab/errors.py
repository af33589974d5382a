"""Exception hierarchy shared by the analytic and simulation layers."""


class DelaylabError(Exception):
    """Base class for all package errors."""


class ValidationError(DelaylabError, ValueError):
    """Invalid input parameters.

    ``field`` carries a dotted path to the offending value when known
    (e.g. ``rows[2].lambda``).
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class InvalidDistributionError(ValidationError):
    """Moment pair that no distribution can have (second moment < mean^2)."""


class InstabilityError(ValidationError):
    """Offered load rho >= 1; no stationary regime exists."""

    def __init__(self, rho, field=None):
        self.rho = rho
        super().__init__(f"unstable system: rho = {rho:.6g} >= 1", field)


class RegimeMismatchError(ValidationError):
    """Packet-length support incompatible with the requested delay regime."""


class ConfigurationError(ValidationError):
    """Bad run controls, e.g. a seed reused across replications."""


class ModelRangeError(DelaylabError):
    """The nonzero-switchover formulas left their range of validity."""
