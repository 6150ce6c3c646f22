"""Exception hierarchy shared across the package."""


class GeneFunnelError(Exception):
    """Base class for all package errors."""


class ParseError(GeneFunnelError):
    """Malformed input file (ragged rows, non-numeric cells, ...)."""


class ValidationError(GeneFunnelError):
    """Inputs violate a documented precondition or invariant."""


class ConfigError(GeneFunnelError):
    """Invalid configuration value or unknown enum member."""


class PipelineError(GeneFunnelError):
    """A pipeline stage cannot proceed (e.g. stage 1 kept no genes)."""
