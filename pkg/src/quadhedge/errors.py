"""Exception types shared across the package.

Every error carries a machine-readable ``code`` and a ``context`` dict so the
CLI can emit structured JSON on stderr.
"""

from __future__ import annotations


class QuadHedgeError(Exception):
    """Base class for all package errors."""

    code = "error"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self), "context": self.context}


class ConfigError(QuadHedgeError):
    """Invalid parameters or misaligned step/monitoring configuration."""

    code = "config"


class DegenerateSampleError(QuadHedgeError):
    """Return sample carries no usable dispersion."""

    code = "degenerate_sample"


class DegenerateMeasureError(QuadHedgeError):
    """Levy measure with zero second moment."""

    code = "degenerate_measure"


class InversionError(QuadHedgeError):
    """Fourier CDF inversion failed its accuracy checks; context holds diagnostics."""

    code = "inversion"


class EngineError(QuadHedgeError):
    """Internal consistency failure in the lattice engine."""

    code = "engine"
