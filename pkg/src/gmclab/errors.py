"""Exception hierarchy shared across the package."""


class GmcLabError(Exception):
    """Base class for all package errors."""


class ConfigError(GmcLabError):
    """Invalid experiment configuration or config file."""


class NumericError(GmcLabError):
    """A numeric procedure failed to converge or produced invalid output."""


class EmbeddingError(NumericError):
    """Circulant embedding produced significant negative spectral mass."""

    def __init__(self, message, negative_mass=None):
        super().__init__(message)
        self.negative_mass = negative_mass
