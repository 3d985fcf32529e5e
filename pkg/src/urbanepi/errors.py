"""Exception types shared across the package."""


class UrbanEpiError(Exception):
    """Base class for all package errors."""


class ConfigurationError(UrbanEpiError):
    """A parameter combination is invalid or infeasible."""


class InputError(UrbanEpiError):
    """An external input (file, distribution, matrix) is malformed."""
