"""Exceptions raised by the asteroid GNC package."""
from __future__ import annotations

from pathlib import Path


class GncError(Exception):
    """Base error for the package."""


class ConversionError(GncError, ValueError):
    """Error to indicate an element or attitude conversion is undefined."""


class IntegrationError(GncError):
    """Error to indicate the ODE integrator failed."""


class FilterDivergence(GncError):
    """Error to indicate a filter covariance lost positive definiteness."""

    def __init__(self, message: str, diagnostics: dict | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class QpNotConverged(GncError):
    """Error to indicate the QP solver hit its iteration limit."""


class ScenarioError(GncError):
    """Error to indicate an invalid scenario configuration."""


class DataFileError(GncError):
    """Error to indicate a malformed coefficient or landmark file."""

    def __init__(self, path: str | Path, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = Path(path)


class SatelliteFailure(GncError):
    """Error to indicate a satellite pipeline failed during a run."""

    def __init__(self, sat_id: str, time_s: float, message: str) -> None:
        super().__init__(f"Satellite {sat_id} failed at t={time_s:.1f} s: {message}")
        self.sat_id = sat_id
        self.time_s = time_s


class OutputError(GncError):
    """Error to indicate results could not be written or read back."""

    def __init__(self, path: str | Path, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = Path(path)
