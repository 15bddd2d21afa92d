"""Exception types raised across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """Invalid input. ``field`` is a dotted path into the offending config."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.message = message
        self.field = field

    def to_dict(self) -> dict:
        return {"error": "validation", "field": self.field, "message": self.message}


class OracleCapError(ValidationError):
    """Requested oracle size exceeds the dense state-vector cap."""


class DivergentRatioError(ArithmeticError):
    """Noise-to-signal ratio diverges (echo intensity is zero)."""


class NoSignalError(ArithmeticError):
    """Every atom starts excited, so there is no collective echo at all."""
