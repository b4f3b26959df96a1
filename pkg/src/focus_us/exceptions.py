"""Exception types raised across the toolkit."""


class InvalidParameterError(ValueError):
    """A constructor or operation received a parameter outside its domain."""


class InvalidInputError(ValueError):
    """Input data is inconsistent with the geometry or with itself."""


class OutOfBandError(IndexError):
    """A spectral index needed by a computation is not covered by the data."""


class StaleLUTError(RuntimeError):
    """A Q-coefficient table does not match the spectra it is applied to."""


class CacheCollisionError(RuntimeError):
    """A cache entry with a matching key was built from different parameters."""


class MeasurementError(RuntimeError):
    """A PSF measurement could not be made on the given line(s)."""


class NumericalError(ArithmeticError):
    """Non-finite values were produced by a computation."""


class ConfigError(InvalidParameterError):
    """An experiment configuration is malformed or references missing files."""
