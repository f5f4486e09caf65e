"""Input checks shared by the estimator classes."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .model import Alphabet


def check_channel_matrix(h):
    """Finite 2-D float matrix with at least as many rows as columns."""
    h = check_array(h, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    n, m = h.shape
    if n < m:
        raise ValueError(f"need at least as many rows as columns, got shape {h.shape}")
    return h


def check_observations(y, n):
    """Return ``(Y, was_1d)`` with ``Y`` of shape ``(n_obs, n)``."""
    arr = np.asarray(y, dtype=np.float64)
    was_1d = arr.ndim == 1
    arr = check_array(np.atleast_2d(arr), dtype=np.float64, ensure_all_finite=True)
    if arr.shape[1] != n:
        raise ValueError(f"each observation must have length {n}, got {arr.shape[1]}")
    return arr, was_1d


def check_sparsity(l, m):
    if l is None:
        return m
    if not isinstance(l, numbers.Integral) or isinstance(l, bool):
        raise TypeError(f"sparsity must be an integer, got {type(l).__name__}")
    if not 0 <= l <= m:
        raise ValueError(f"sparsity {l} outside [0, {m}]")
    return int(l)


def check_probability(p, name="one_minus_eps"):
    if not 0.0 < float(p) < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {p}")
    return float(p)


def check_noise_var(s):
    s = float(s)
    if not s >= 0.0 or not np.isfinite(s):
        raise ValueError(f"noise_var must be finite and non-negative, got {s}")
    return s


def check_alphabet(a):
    return Alphabet.from_name(a)
