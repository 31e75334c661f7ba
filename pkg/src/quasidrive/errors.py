"""Exception types shared across the toolkit."""


class QuasidriveError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(QuasidriveError):
    """Invalid or conflicting run configuration."""


class NumericError(QuasidriveError):
    """A numerical routine failed to meet its contract."""


class ConvergenceError(NumericError):
    """An iterative routine exceeded its iteration or refinement budget."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TrackingError(NumericError):
    """Diabatic state tracking lost a level during a parameter sweep."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location
