"""Exception hierarchy shared by every ftnlab module."""


class FtnError(Exception):
    """Base class for ftnlab errors."""


class ParameterError(FtnError, ValueError):
    """An argument violates a documented precondition."""


class NumericalError(FtnError, ArithmeticError):
    """A numerical procedure failed (factorization, non-finite loss, ...)."""


class FormatError(FtnError):
    """A file on disk is malformed, truncated, or of an unsupported version."""


class ConfigError(FtnError):
    """A configuration is inconsistent or references unknown keys."""


class MissingArtifactError(FtnError, FileNotFoundError):
    """A required model or data file is absent."""
