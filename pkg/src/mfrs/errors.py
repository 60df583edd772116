"""Exception types shared across the package."""


class MFRSError(Exception):
    """Base class for all package errors."""


class ValidationError(MFRSError, ValueError):
    """Input failed a precondition (shape, finiteness, parameter range)."""


class ConfigurationError(MFRSError, ValueError):
    """A configuration cannot produce a usable run (degenerate split, no windows)."""


class RangeError(MFRSError, IndexError):
    """An index or window falls outside the series it addresses."""


class AlignmentError(MFRSError, RuntimeError):
    """Alignment could not be computed on any channel."""


class NumericalError(MFRSError, FloatingPointError):
    """A non-finite value appeared in parameters or gradients."""
