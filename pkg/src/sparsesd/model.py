"""Problem definitions, sparse-prior counting and seeded instance generation."""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import TooLargeError
from .numerics import binomial

__all__ = [
    "Alphabet",
    "IlsInstance",
    "GenSpec",
    "sparse_count",
    "enumerate_sparse",
    "sparse_points",
    "prefix_prior_binary",
    "prefix_prior_ternary",
    "mean_sq_norm",
    "sigma2_from_snr",
    "sample_sparse",
    "generate_instance",
    "trial_seed",
    "DEFAULT_ENUM_CAP",
]

DEFAULT_ENUM_CAP = 1 << 26
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Alphabet:
    """Finite integer symbol set containing zero, kept in ascending order."""

    symbols: tuple
    name: str = "custom"

    def __post_init__(self):
        syms = tuple(int(s) for s in self.symbols)
        if len(set(syms)) != len(syms):
            raise ValueError(f"alphabet symbols must be distinct: {syms}")
        if list(syms) != sorted(syms):
            raise ValueError(f"alphabet symbols must be ascending: {syms}")
        if 0 not in syms:
            raise ValueError(f"alphabet must contain 0, got {syms}")
        object.__setattr__(self, "symbols", syms)

    @classmethod
    def binary01(cls):
        return cls((0, 1), "binary01")

    @classmethod
    def ternary(cls):
        return cls((-1, 0, 1), "ternary")

    @classmethod
    def from_name(cls, name):
        """Look up ``binary01``/``binary``/``ternary`` or parse ``"a,b,c"``."""
        if isinstance(name, Alphabet):
            return name
        key = str(name).strip().lower()
        if key in ("binary01", "binary"):
            return cls.binary01()
        if key == "ternary":
            return cls.ternary()
        try:
            syms = sorted(int(tok) for tok in key.split(","))
        except ValueError:
            raise ValueError(f"unknown alphabet {name!r}") from None
        return cls(tuple(syms), "custom")

    @property
    def size(self):
        return len(self.symbols)

    @property
    def nonzero(self):
        return tuple(s for s in self.symbols if s != 0)

    @property
    def nonnegative(self):
        return self.symbols[0] >= 0

    @property
    def spacing(self):
        """Smallest gap between consecutive symbols (1 for unit-spaced sets)."""
        if len(self.symbols) < 2:
            return 0
        return min(b - a for a, b in zip(self.symbols, self.symbols[1:]))

    def as_array(self):
        return np.asarray(self.symbols, dtype=np.int64)

    def nearest(self, values):
        """Round each entry of ``values`` to the closest symbol (ties go low)."""
        values = np.asarray(values, dtype=float)
        syms = self.as_array().astype(float)
        idx = np.argmin(np.abs(values[..., None] - syms), axis=-1)
        return self.as_array()[idx]


@dataclass
class IlsInstance:
    """``min ||y - H x||^2`` over ``x`` in ``alphabet^m`` with ``||x||_0 <= l``."""

    h: np.ndarray
    y: np.ndarray
    alphabet: Alphabet
    l: int
    sigma2: float = 0.0

    def __post_init__(self):
        self.h = np.atleast_2d(np.asarray(self.h, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.alphabet = Alphabet.from_name(self.alphabet)
        n, m = self.h.shape
        if n < m:
            raise ValueError(f"need n >= m, got H of shape {self.h.shape}")
        if self.y.shape[0] != n:
            raise ValueError(f"y has length {self.y.shape[0]}, expected {n}")
        if not 0 <= int(self.l) <= m:
            raise ValueError(f"sparsity bound l={self.l} outside [0, {m}]")
        self.l = int(self.l)
        if not self.sigma2 >= 0:
            raise ValueError(f"sigma2 must be non-negative, got {self.sigma2}")
        self.sigma2 = float(self.sigma2)

    @property
    def n(self):
        return self.h.shape[0]

    @property
    def m(self):
        return self.h.shape[1]


@dataclass(frozen=True)
class GenSpec:
    m: int
    n: int
    alphabet: Alphabet = field(default_factory=Alphabet.binary01)
    l: int = 0
    snr_db: float = 10.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alphabet", Alphabet.from_name(self.alphabet))
        if not 1 <= self.m <= self.n:
            raise ValueError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if not 0 <= self.l <= self.m:
            raise ValueError(f"need 0 <= l <= m, got l={self.l}")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def sparse_count(k, l, alphabet):
    """Number of vectors in ``alphabet^k`` with at most ``l`` nonzeros."""
    alphabet = Alphabet.from_name(alphabet)
    nz = alphabet.size - 1
    return sum(binomial(k, j) * nz**j for j in range(min(k, l) + 1))


def enumerate_sparse(k, l, alphabet, cap=DEFAULT_ENUM_CAP):
    """Yield every ``l``-sparse vector of ``alphabet^k`` once, lexicographically.

    Raises
    ------
    TooLargeError
        If the set holds more than ``cap`` vectors.
    """
    alphabet = Alphabet.from_name(alphabet)
    if not 0 <= l:
        raise ValueError(f"l must be non-negative, got {l}")
    total = sparse_count(k, l, alphabet)
    if total > cap:
        raise TooLargeError(f"{total} sparse vectors exceed the enumeration cap {cap}")
    syms = alphabet.symbols
    prefix = [0] * k

    def rec(pos, budget):
        if pos == k:
            yield tuple(prefix)
            return
        for s in syms:
            cost = 1 if s != 0 else 0
            if cost > budget:
                continue
            prefix[pos] = s
            yield from rec(pos + 1, budget - cost)

    return rec(0, l)


@lru_cache(maxsize=128)
def _sparse_points_cached(k, l, syms):
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64)
    blocks = []
    for s in syms:
        if s == 0:
            tail = _sparse_points_cached(k - 1, l, syms)
        elif l > 0:
            tail = _sparse_points_cached(k - 1, l - 1, syms)
        else:
            continue
        head = np.full((tail.shape[0], 1), s, dtype=np.int64)
        blocks.append(np.hstack([head, tail]))
    out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def sparse_points(k, l, alphabet, cap=DEFAULT_ENUM_CAP):
    """Array form of :func:`enumerate_sparse` (rows in the same order)."""
    alphabet = Alphabet.from_name(alphabet)
    total = sparse_count(k, l, alphabet)
    if total > cap:
        raise TooLargeError(f"{total} sparse vectors exceed the enumeration cap {cap}")
    return _sparse_points_cached(int(k), int(min(l, k)), alphabet.symbols)


@lru_cache(maxsize=128)
def _sparse_points_float(k, l, syms):
    out = _sparse_points_cached(k, l, syms).astype(float)
    out.setflags(write=False)
    return out


def prefix_prior_binary(m, k, k1, k3):
    """Count of binary ``x`` with ``||x||_0 = k3`` whose last ``k`` entries hold ``k1`` ones."""
    if not 0 <= k <= m:
        return 0
    if k1 < max(k3 - (m - k), 0) or k1 > min(k, k3):
        return 0
    return binomial(k, k1) * binomial(m - k, k3 - k1)


def prefix_prior_ternary(m, k, k1, k3, a):
    """Ternary analogue of :func:`prefix_prior_binary`; ``a`` counts +1s in the suffix."""
    if not 0 <= k <= m:
        return 0
    if k1 < max(k3 - (m - k), 0) or k1 > min(k, k3) or not 0 <= a <= k1:
        return 0
    return (
        binomial(k, a)
        * binomial(k - a, k1 - a)
        * binomial(m - k, k3 - k1)
        * 2 ** (k3 - k1)
    )


def mean_sq_norm(m, l, alphabet):
    """``E ||x||^2`` for ``x`` uniform over the ``l``-sparse set."""
    return _mean_sq_norm(int(m), int(l), Alphabet.from_name(alphabet))


@lru_cache(maxsize=1024)
def _mean_sq_norm(m, l, alphabet):
    nz = alphabet.nonzero
    if not nz:
        return 0.0
    mean_sym2 = sum(s * s for s in nz) / len(nz)
    total = sparse_count(m, l, alphabet)
    weighted = sum(binomial(m, j) * len(nz) ** j * j for j in range(min(m, l) + 1))
    return mean_sym2 * weighted / total


def sigma2_from_snr(snr_db, m, l, alphabet):
    """Noise variance giving ``10 log10(E||x||^2 / sigma2) = snr_db``; +inf dB gives 0.

    When ``l = 0`` the prior has no energy and ``E||x||^2`` is replaced by 1.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    energy = mean_sq_norm(m, l, alphabet)
    # an all-zero prior (l = 0) has no signal energy; reference unit energy instead
    return (energy if energy > 0 else 1.0) / 10.0 ** (snr_db / 10.0)


@lru_cache(maxsize=1024)
def _weight_cdf(m, l, n_nonzero):
    weights = np.array(
        [binomial(m, j) * n_nonzero**j for j in range(min(m, l) + 1)], dtype=float
    )
    return np.cumsum(weights / weights.sum())


def sample_sparse(rng, m, l, alphabet):
    """Draw ``x`` uniformly from the ``l``-sparse subset of ``alphabet^m``."""
    alphabet = Alphabet.from_name(alphabet)
    nz = np.asarray(alphabet.nonzero, dtype=np.int64)
    cdf = _weight_cdf(m, l, len(nz))
    # the weight of each ||x||_0 = j shell is C(m, j) (L-1)^j
    j = min(int(np.searchsorted(cdf, rng.random(), side="right")), len(cdf) - 1)
    x = np.zeros(m, dtype=np.int64)
    if j:
        support = rng.permutation(m)[:j]
        x[support] = nz[rng.integers(len(nz), size=j)]
    return x


def generate_instance(spec):
    """Seeded Gaussian instance: returns ``(IlsInstance, x_true)``."""
    rng = np.random.default_rng(int(spec.seed))
    h = rng.standard_normal((spec.n, spec.m))
    x_true = sample_sparse(rng, spec.m, spec.l, spec.alphabet)
    sigma2 = sigma2_from_snr(spec.snr_db, spec.m, spec.l, spec.alphabet)
    noise = rng.standard_normal(spec.n)
    y = h @ x_true
    if sigma2 > 0:
        y = y + math.sqrt(sigma2) * noise
    inst = IlsInstance(h=h, y=y, alphabet=spec.alphabet, l=spec.l, sigma2=sigma2)
    return inst, x_true


def _splitmix64(z):
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seed(base_seed, index):
    """Per-trial seed derived from a base seed by a fixed 64-bit mix."""
    return _splitmix64((_splitmix64(int(base_seed) & _MASK64) + int(index)) & _MASK64)
