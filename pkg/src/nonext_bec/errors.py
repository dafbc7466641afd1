"""Exception types shared across the package.

The CLI maps these onto its exit codes, so library code should raise the
most specific one that applies rather than bare ValueError.
"""


class NonextBecError(Exception):
    """Base class for package errors."""


class DomainError(NonextBecError, ValueError):
    """Input outside the mathematical domain of an operation."""


class DivergenceError(DomainError):
    """A requested quantity diverges (e.g. critical density for d <= 2)."""


class SizingError(NonextBecError):
    """A resource cap was exceeded (mode count, coefficient budget, ...)."""


class TruncationError(NonextBecError):
    """Truncation could not be certified at the requested tolerance."""


class ConfigError(NonextBecError, ValueError):
    """A run configuration failed validation."""
