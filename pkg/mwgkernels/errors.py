"""Exception hierarchy shared by every mwgkernels module."""

from __future__ import annotations


class MwgError(Exception):
    """Base class for all mwgkernels errors."""


class InvalidArgumentError(MwgError, ValueError):
    """Raised when an argument is malformed or structurally incompatible."""


class UnknownNameError(MwgError, KeyError):
    """Raised when a parameter name is not present in a position."""

    def __str__(self) -> str:
        # KeyError quotes its argument; keep the message readable.
        return str(self.args[0]) if self.args else ""


class IndexRangeError(MwgError, IndexError):
    """Raised when a trace index or burn-in is out of range."""


class PreconditionError(MwgError, RuntimeError):
    """Raised when a run cannot start from the supplied state."""


class UnsupportedInfoError(MwgError, TypeError):
    """Raised when side information lacks a field a diagnostic needs."""


class InfeasibleEventsError(MwgError, ValueError):
    """Raised when an event tensor drives a compartment negative."""


class ConfigError(MwgError, ValueError):
    """Raised when an experiment configuration fails validation."""
