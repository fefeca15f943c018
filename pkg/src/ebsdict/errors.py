"""Exception types shared across the package."""


class EbsdictError(Exception):
    """Base class for package errors."""


class ConfigError(EbsdictError):
    """Bad configuration file or option value."""


class ContainerFormatError(EbsdictError):
    """Corrupt or mismatched binary container."""


class DegenerateFitError(EbsdictError):
    """A numerical fit collapsed (zero resultant, all-equal data, ...)."""


class ThresholdError(EbsdictError):
    """Mode detection could not derive a requested classifier threshold."""
