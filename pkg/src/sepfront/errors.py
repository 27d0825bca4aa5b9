"""Exception hierarchy shared by all sepfront modules."""


class SepfrontError(Exception):
    """Base class for all sepfront errors."""


class ConfigurationError(SepfrontError):
    """Invalid configuration: unsupported options, bad indices, missing streams."""


class InputError(SepfrontError):
    """Invalid input data: shape mismatches, NaN/Inf samples, degenerate signals."""


class NumericalError(SepfrontError):
    """A numerical procedure failed beyond recoverable fallbacks."""
