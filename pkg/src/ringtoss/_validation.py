"""Input validation helpers shared by the estimator and the functional API."""

from fractions import Fraction
import numbers

import numpy as np

from .exceptions import DimensionMismatch, NotStochastic

STOCHASTIC_TOL = 1e-9


def to_exact(values):
    """Convert an array-like of numbers (or numeric strings) to an object
    array of ``Fraction``.  Floats are converted exactly."""
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        if isinstance(v, Fraction):
            out[idx] = v
        elif isinstance(v, str):
            out[idx] = Fraction(v)
        elif isinstance(v, numbers.Rational):
            out[idx] = Fraction(int(v.numerator), int(v.denominator))
        else:
            out[idx] = Fraction(float(v))
    return out


def is_exact(arr):
    return isinstance(arr, np.ndarray) and arr.dtype == object


def check_pmf(p, exact=False, name="pmf", tol=STOCHASTIC_TOL):
    """Validate a probability vector and return it as a 1-D array.

    With ``exact=True`` the result holds ``Fraction`` entries and must sum
    to one exactly.
    """
    if exact:
        arr = to_exact(p)
    else:
        arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise DimensionMismatch(f"{name} must be a non-empty vector, got shape {arr.shape}")
    if any(v < 0 for v in arr):
        raise NotStochastic(f"{name} has negative entries")
    if exact:
        total = sum(arr, Fraction(0))
        if total != 1:
            raise NotStochastic(f"{name} sums to {total}, not exactly 1")
    else:
        if not np.all(np.isfinite(arr)):
            raise NotStochastic(f"{name} has non-finite entries")
        total = float(np.sum(arr))
        if abs(total - 1.0) > tol:
            raise NotStochastic(f"{name} sums to {total!r}")
    return arr


def check_channel(channel, n_inputs=None, exact=False, tol=STOCHASTIC_TOL):
    """Validate a row-stochastic matrix (rows = inputs, columns = outputs)."""
    if exact:
        mat = to_exact(channel)
    else:
        mat = np.asarray(channel, dtype=float)
    if mat.ndim != 2 or mat.shape[0] == 0 or mat.shape[1] == 0:
        raise DimensionMismatch(f"channel must be a non-empty matrix, got shape {mat.shape}")
    if n_inputs is not None and mat.shape[0] != n_inputs:
        raise DimensionMismatch(
            f"channel has {mat.shape[0]} rows but the input distribution has {n_inputs} symbols"
        )
    for x, row in enumerate(mat):
        try:
            check_pmf(row, exact=exact, name=f"channel row {x}", tol=tol)
        except DimensionMismatch:  # pragma: no cover - shape checked above
            raise
    return mat


def check_index(i, n, name="index"):
    if isinstance(i, (bool, np.bool_)) or not isinstance(i, (numbers.Integral, np.integer)):
        raise TypeError(f"{name} must be an integer, got {type(i).__name__}")
    i = int(i)
    if not 0 <= i < n:
        raise IndexError(f"{name} {i} out of range for alphabet of size {n}")
    return i
