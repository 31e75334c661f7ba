"""quasidrive: quasienergy spectroscopy and escape kinetics of driven
nonlinear oscillators in the rotating-wave approximation."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    ConvergenceError,
    NumericError,
    QuasidriveError,
    TrackingError,
)
