"""Scalar and matrix primitives: QR, incomplete gamma, exact binomials, radius."""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._householder import householder_qr
from .exceptions import ExactOverflowError, NoConvergenceError, RankDeficientError

__all__ = [
    "QrFactors",
    "qr_decompose",
    "regularized_gamma",
    "binomial",
    "choose_radius",
    "MAX_EXACT_INT",
]

# Widest exact integer the counting code will hand out (unsigned 128-bit).
MAX_EXACT_INT = (1 << 128) - 1

_RANK_TOL = 1e-10
_GAMMA_EPS = 1e-14
_GAMMA_MAX_ITER = 10_000
_TINY = 1e-300


@dataclass(frozen=True)
class QrFactors:
    """Thin/complement split of a full QR factorization ``H = [Q1 Q2] [R; 0]``.

    Attributes
    ----------
    q1 : ndarray, shape (n, m)
    q2 : ndarray, shape (n, n - m)
    r : ndarray, shape (m, m)
        Upper triangular with a strictly positive diagonal.
    """

    q1: np.ndarray
    q2: np.ndarray
    r: np.ndarray


def qr_decompose(h):
    """Householder QR of a tall matrix with the diagonal of R made positive.

    Parameters
    ----------
    h : array_like, shape (n, m)
        Real matrix with ``n >= m``.

    Returns
    -------
    QrFactors

    Raises
    ------
    RankDeficientError
        If some ``|R[k, k]|`` falls below ``1e-10 * ||h||_F``.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {h.shape}")
    n, m = h.shape
    if n < m:
        raise ValueError(f"need n >= m, got n={n}, m={m}")
    if not np.isfinite(h).all():
        raise ValueError("matrix contains non-finite entries")

    q, r = householder_qr(np.ascontiguousarray(h))

    tol = _RANK_TOL * math.sqrt(float(np.vdot(h, h)))
    diag = r.diagonal()
    if diag.min() <= tol:
        k = int(np.argmin(diag))
        raise RankDeficientError(
            f"|R[{k},{k}]| = {diag[k]:.3e} below tolerance {tol:.3e}"
        )
    return QrFactors(q1=q[:, :m], q2=q[:, m:], r=r)


def _gamma_series(a, x):
    # P(a, x) by the power series, valid for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    else:
        raise NoConvergenceError(f"gamma series did not converge (a={a}, x={x})")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a, x):
    # Q(a, x) by the modified Lentz continued fraction, valid for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    f = d
    for i in range(1, _GAMMA_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        f *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    else:
        raise NoConvergenceError(f"gamma continued fraction did not converge (a={a}, x={x})")
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * f


def regularized_gamma(shape, x):
    """Regularized lower incomplete gamma function ``P(shape, x)``.

    This is the CDF of a Gamma(shape, 1) variable, so ``P(n/2, t/2)`` is the
    chi-square CDF with ``n`` degrees of freedom at ``t``.
    """
    if not shape > 0:
        raise ValueError(f"shape must be positive, got {shape}")
    if math.isnan(x) or x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < shape + 1.0:
        return min(1.0, _gamma_series(shape, x))
    return max(0.0, 1.0 - _gamma_cfrac(shape, x))


def binomial(n, k):
    """Exact binomial coefficient, zero outside ``0 <= k <= n``."""
    if n < 0 or k < 0 or k > n:
        return 0
    value = math.comb(n, k)
    if value > MAX_EXACT_INT:
        raise ExactOverflowError(f"C({n},{k}) exceeds 128-bit exact range")
    return value


def choose_radius(n, sigma2, one_minus_eps, max_steps=200):
    """Squared search radius ``d^2 = alpha * n * sigma2`` with chi-square coverage.

    ``alpha`` solves ``P(n/2, alpha*n/2) = one_minus_eps``, i.e. the true
    point falls inside the sphere with probability ``one_minus_eps``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if not 0.0 < one_minus_eps < 1.0:
        raise ValueError(f"one_minus_eps must lie in (0, 1), got {one_minus_eps}")
    return _radius_multiplier(int(n), float(one_minus_eps), int(max_steps)) * n * sigma2


@lru_cache(maxsize=4096)
def _radius_multiplier(n, one_minus_eps, max_steps):
    half = 0.5 * n

    def cdf(alpha):
        return regularized_gamma(half, alpha * half)

    lo, hi = 0.0, 1.0
    steps = 0
    while cdf(hi) < one_minus_eps:
        lo, hi = hi, 2.0 * hi
        steps += 1
        if steps > max_steps:
            raise NoConvergenceError("could not bracket the radius multiplier")
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < one_minus_eps:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * hi:
            return hi
    raise NoConvergenceError("bisection for the radius multiplier did not converge")
