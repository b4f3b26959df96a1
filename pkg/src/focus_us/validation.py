"""Small input-validation helpers shared by the functional API and estimators."""

import numpy as np

from .exceptions import InvalidInputError, InvalidParameterError, NumericalError


def check_positive(name, value):
    if not np.isfinite(value) or value <= 0:
        raise InvalidParameterError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_nonnegative_int(name, value):
    if int(value) != value or value < 0:
        raise InvalidParameterError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def check_channel_matrix(data, n_elements=None):
    """Return ``data`` as a 2-D float64 array, optionally checking the row count."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[np.newaxis, :]
    if data.ndim != 2:
        raise InvalidInputError(f"channel data must be 2-D (elements x samples), got shape {data.shape}")
    if n_elements is not None and data.shape[0] != n_elements:
        raise InvalidInputError(
            f"channel data has {data.shape[0]} rows but the array geometry has {n_elements} elements"
        )
    return data


def check_sorted(name, values):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or np.any(np.diff(values) <= 0):
        raise InvalidInputError(f"{name} must be a strictly increasing 1-D sequence")
    return values


def check_finite(name, values):
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"non-finite values detected in {name}")
    return values
