"""Exception hierarchy shared by the services, the CLI and the HTTP API.

Each error knows its CLI exit code and HTTP status so both front ends can
report failures without a translation table of their own.
"""

from typing import Any, Dict, Optional


class StMetaError(Exception):
    """Base exception for simulation and analysis failures."""

    exit_code: int = 3
    status_code: int = 500

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable error payload."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": self.details,
        }


class ConfigError(StMetaError):
    """Invalid configuration, parameters or input files."""

    exit_code = 1
    status_code = 422


class ModelParameterError(ConfigError):
    """Model parameters violate the Schmitt-Trigger preconditions."""

    pass


class WaveformError(ConfigError):
    """Malformed waveform or out-of-span evaluation."""

    pass


class InfeasibleError(StMetaError):
    """The requested scenario cannot be realized by the circuit."""

    exit_code = 2
    status_code = 409


class OutOfRegionError(InfeasibleError):
    """An operating point falls outside the region an operation requires."""

    pass


class NoCrossingError(InfeasibleError):
    """A trajectory never crosses the requested threshold."""

    pass


class NumericError(StMetaError):
    """Numerical failure: tolerance, bracketing or fitting."""

    pass


class ToleranceError(NumericError):
    """Tolerance not achievable within the step or event budget."""

    pass


class BracketingError(NumericError):
    """A root finder was given an interval without a sign change."""

    pass


class DegenerateFitError(NumericError):
    """Least-squares fit is underdetermined or degenerate."""

    pass
