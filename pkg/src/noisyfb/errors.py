class NoisyFbError(Exception):
    """Base class for package errors."""


class ConfigError(NoisyFbError, ValueError):
    """A configuration field is missing, malformed or inconsistent."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class InfeasibleParametersError(NoisyFbError, ValueError):
    """The requested operating point admits no valid scheme parameters."""


class OutOfRegimeError(NoisyFbError, ValueError):
    """A closed-form expression is evaluated outside its validity region."""
