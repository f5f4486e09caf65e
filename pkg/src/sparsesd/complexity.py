"""Expected complexity of sparsity-aware sphere decoding, and its variance.

Conventions
-----------
Level ``k`` counts nodes whose last ``k`` entries are fixed.  At radius
``d2`` a level-``k`` suffix at squared distance ``eta`` from the true suffix
survives with probability ``P((n - m + k)/2, d2 / (2 (sigma2 + eta)))``,
where ``P`` is the regularized lower incomplete gamma function.  Counts are
exact integers; they are converted to floats only when multiplied by these
probabilities.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .decoder import decode_sparse_fp, flop_model, prepare
from .model import (
    Alphabet,
    GenSpec,
    generate_instance,
    prefix_prior_binary,
    prefix_prior_ternary,
    sigma2_from_snr,
    sparse_count,
    trial_seed,
)
from .numerics import binomial, choose_radius, regularized_gamma

__all__ = [
    "count_binary",
    "count_ternary",
    "ternary_eta",
    "binary_eta_counts",
    "ternary_eta_counts",
    "expected_nodes_binary",
    "expected_nodes_ternary",
    "expected_nodes_unaware",
    "expected_nodes",
    "total_cost",
    "ComplexityReport",
    "complexity_report",
    "report_rows",
    "REPORT_HEADER",
    "pair_count",
    "pair_counts_by_stats",
    "joint_prob_equal",
    "VarianceEstimate",
    "variance_mc",
]


# ---------------------------------------------------------------- counting


def count_binary(k1, k2, k, eta):
    """Binary ``x_a`` of weight ``k2`` at Hamming distance ``eta`` from a weight-``k1`` ``x_t``.

    Both vectors have length ``k``.  Off-lattice ``eta`` (wrong parity or out
    of range) gives 0.
    """
    if not (0 <= k1 <= k and 0 <= k2 <= k and eta >= 0):
        return 0
    if k1 < k2:
        twice_p = eta - (k2 - k1)
        if twice_p < 0 or twice_p % 2:
            return 0
        p = twice_p // 2  # zeros of x_a on the ones of x_t
        q = k - k2 - p  # zeros of x_a on the zeros of x_t
    else:
        twice_q = eta - (k1 - k2)
        if twice_q < 0 or twice_q % 2:
            return 0
        q = twice_q // 2  # ones of x_a on the zeros of x_t
        p = k2 - q  # ones of x_a on the ones of x_t
    if p < 0 or q < 0:
        return 0
    return binomial(k1, p) * binomial(k - k1, q)


def _as_pmatrix(p_matrix):
    """Return a lookup ``P[(i, j)]`` from a dict or a 3x3 array indexed ``[i+1, j+1]``."""
    if isinstance(p_matrix, dict):
        get = lambda i, j: int(p_matrix.get((i, j), 0))  # noqa: E731
    else:
        arr = np.asarray(p_matrix, dtype=np.int64)
        if arr.shape != (3, 3):
            raise ValueError(f"p_matrix must be 3x3, got shape {arr.shape}")
        get = lambda i, j: int(arr[i + 1, j + 1])  # noqa: E731
    return {(i, j): get(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)}


def ternary_eta(p_matrix):
    """Squared distance ``sum p_ij |i - j|^2`` implied by an alignment matrix."""
    p = _as_pmatrix(p_matrix)
    return sum(v * (i - j) ** 2 for (i, j), v in p.items())


def _g1(k1, k2, k, a, p10, p1m1, pm10, pm11):
    rest = k2 - (k1 - pm10 - p10)
    return (
        binomial(a, p10)
        * binomial(a - p10, p1m1)
        * binomial(k1 - a, pm10)
        * binomial(k1 - a - pm10, pm11)
        * binomial(k - k1, rest)
        * (2**rest if rest >= 0 else 0)
    )


def _g2(k1, k2, k, a, p, p1m1, p11, pm11):
    last = k2 - (p + p1m1 + p11 + pm11)
    return (
        binomial(k - k1, p)
        * binomial(a, p1m1)
        * binomial(a - p1m1, p11)
        * binomial(k1 - a, pm11)
        * binomial(k1 - a - pm11, last)
        * (2**p if p >= 0 else 0)
    )


def count_ternary(k1, k2, k, a, p_matrix):
    """Ternary ``x_a`` of weight ``k2`` aligned with ``x_t`` as ``p_matrix`` prescribes.

    ``x_t`` has ``k1`` nonzeros, ``a`` of them equal to +1.  ``p_matrix[i][j]``
    (or ``{(i, j): count}``) is the number of positions where ``x_t`` holds
    ``i`` and ``x_a`` holds ``j``.  Matrices inconsistent with
    ``(k1, k2, k, a)`` count 0.  The squared distance is :func:`ternary_eta`.
    """
    p = _as_pmatrix(p_matrix)
    if min(p.values()) < 0:
        return 0
    rows = {
        1: sum(p[(1, j)] for j in (-1, 0, 1)),
        -1: sum(p[(-1, j)] for j in (-1, 0, 1)),
        0: sum(p[(0, j)] for j in (-1, 0, 1)),
    }
    if rows[1] != a or rows[-1] != k1 - a or rows[0] != k - k1:
        return 0
    nonzero_a = sum(v for (i, j), v in p.items() if j != 0)
    if nonzero_a != k2:
        return 0
    # the two sign choices on the zeros of x_t are already counted by 2^p
    zeros_split = binomial(p[(0, 1)] + p[(0, -1)], p[(0, 1)])
    if k1 <= k2:
        g = _g1(k1, k2, k, a, p[(1, 0)], p[(1, -1)], p[(-1, 0)], p[(-1, 1)])
    else:
        g = _g2(k1, k2, k, a, p[(0, 1)] + p[(0, -1)], p[(1, -1)], p[(1, 1)], p[(-1, 1)])
    # g sums over the +/- split on the zeros of x_t; attribute it evenly
    return g * zeros_split // (2 ** (p[(0, 1)] + p[(0, -1)]))


@lru_cache(maxsize=None)
def binary_eta_counts(k1, k2, k):
    """``{eta: count_binary(k1, k2, k, eta)}`` over the lattice of attainable ``eta``."""
    out = {}
    for eta in range(abs(k1 - k2), min(k1 + k2, k) + 1, 2):
        c = count_binary(k1, k2, k, eta)
        if c:
            out[eta] = c
    return out


@lru_cache(maxsize=None)
def ternary_eta_counts(k1, k2, k, a):
    """``{eta: count}`` of ternary weight-``k2`` vectors at squared distance ``eta``.

    Iterates the free alignment entries: ``(p10, p1m1, pm10, pm11)`` when
    ``k1 <= k2`` and ``(p, p1m1, p11, pm11)`` otherwise, with the remaining
    entries fixed by the row sums.
    """
    out = {}
    if not (0 <= a <= k1 <= k and 0 <= k2 <= k):
        return out
    b = k1 - a
    if k1 <= k2:
        for p10 in range(0, min(a, k - k2) + 1):
            for p1m1 in range(0, a - p10 + 1):
                for pm10 in range(0, min(b, k - k2 - p10) + 1):
                    for pm11 in range(0, b - pm10 + 1):
                        g = _g1(k1, k2, k, a, p10, p1m1, pm10, pm11)
                        if g:
                            rest = k2 - (k1 - pm10 - p10)
                            eta = p10 + 4 * p1m1 + pm10 + 4 * pm11 + rest
                            out[eta] = out.get(eta, 0) + g
    else:
        for p in range(0, min(k2, k - k1) + 1):
            for p1m1 in range(0, min(a, k2 - p) + 1):
                for p11 in range(0, min(a - p1m1, k2 - p - p1m1) + 1):
                    for pm11 in range(0, min(k2 - p - p1m1 - p11, b) + 1):
                        g = _g2(k1, k2, k, a, p, p1m1, p11, pm11)
                        if g:
                            pm1m1 = k2 - (p + p1m1 + p11 + pm11)
                            p10 = a - p1m1 - p11
                            pm10 = b - pm11 - pm1m1
                            eta = p + 4 * p1m1 + p10 + 4 * pm11 + pm10
                            out[eta] = out.get(eta, 0) + g
    return out


# ------------------------------------------------------- expected node counts


def _survival(shape, d2, sigma2, eta):
    scale = sigma2 + eta
    if scale == 0:
        return 1.0 if d2 >= 0 else 0.0
    return regularized_gamma(shape, d2 / (2.0 * scale))


def _check_dims(m, n, k, l):
    if not 1 <= k <= m <= n:
        raise ValueError(f"need 1 <= k <= m <= n, got k={k}, m={m}, n={n}")
    if not 0 <= l <= m:
        raise ValueError(f"need 0 <= l <= m, got l={l}")


def _binary(m, n, k, l_prior, l_dec, sigma2, d2):
    _check_dims(m, n, k, l_prior)
    shape = 0.5 * (n - m + k)
    gam = {}
    total = 0.0
    norm = 0
    for k3 in range(0, l_prior + 1):
        for k1 in range(max(k3 - (m - k), 0), min(k, k3) + 1):
            weight = prefix_prior_binary(m, k, k1, k3)
            if not weight:
                continue
            norm += weight
            inner = 0.0
            for k2 in range(0, min(k, l_dec) + 1):
                for eta, g in binary_eta_counts(k1, k2, k).items():
                    if eta not in gam:
                        gam[eta] = _survival(shape, d2, sigma2, eta)
                    inner += gam[eta] * g
            total += weight * inner
    return total / norm


def _ternary(m, n, k, l_prior, l_dec, sigma2, d2):
    _check_dims(m, n, k, l_prior)
    shape = 0.5 * (n - m + k)
    gam = {}
    total = 0.0
    norm = 0
    for k3 in range(0, l_prior + 1):
        for k1 in range(max(k3 - (m - k), 0), min(k, k3) + 1):
            for a in range(0, k1 + 1):
                weight = prefix_prior_ternary(m, k, k1, k3, a)
                if not weight:
                    continue
                norm += weight
                inner = 0.0
                for k2 in range(0, min(k, l_dec) + 1):
                    for eta, g in ternary_eta_counts(k1, k2, k, a).items():
                        if eta not in gam:
                            gam[eta] = _survival(shape, d2, sigma2, eta)
                        inner += gam[eta] * g
                total += weight * inner
    return total / norm


def expected_nodes_binary(m, n, k, l, sigma2, d2):
    """``E[N_k | d2]`` for the sparsity-aware search over ``{0, 1}``."""
    return _binary(m, n, k, l, l, sigma2, d2)


def expected_nodes_ternary(m, n, k, l, sigma2, d2):
    """``E[N_k | d2]`` for the sparsity-aware search over ``{-1, 0, 1}``."""
    return _ternary(m, n, k, l, l, sigma2, d2)


def expected_nodes_unaware(m, n, k, l_true, sigma2, d2, alphabet="binary01"):
    """``E[N_k | d2]`` when ``x`` is ``l_true``-sparse but the search ignores sparsity."""
    alphabet = Alphabet.from_name(alphabet)
    fn = _ternary if alphabet.symbols == (-1, 0, 1) else _binary
    if fn is _binary and alphabet.symbols != (0, 1):
        raise ValueError(f"no closed form for alphabet {alphabet.symbols}")
    return fn(m, n, k, l_true, k, sigma2, d2)


def expected_nodes(m, n, l, sigma2, d2, alphabet, sparse=True):
    """Vector ``(E[N_1], ..., E[N_m])`` for a binary or ternary alphabet."""
    alphabet = Alphabet.from_name(alphabet)
    if alphabet.symbols == (0, 1):
        fn = _binary
    elif alphabet.symbols == (-1, 0, 1):
        fn = _ternary
    else:
        raise ValueError(f"no closed form for alphabet {alphabet.symbols}")
    return np.array(
        [fn(m, n, k, l, l if sparse else k, sigma2, d2) for k in range(1, m + 1)]
    )


def total_cost(e_nk, f=flop_model):
    """Return ``(C, e_c)``: the cost ``sum_k f(k) E[N_k]`` and ``log C / log m``.

    ``e_c`` is ``-inf`` when ``C == 0``.
    """
    e_nk = np.asarray(e_nk, dtype=float)
    m = e_nk.shape[0]
    c = float(sum(f(k) * e_nk[k - 1] for k in range(1, m + 1)))
    if c <= 0:
        return c, -math.inf
    if m < 2:
        return c, math.nan
    return c, math.log(c) / math.log(m)


# ------------------------------------------------------------------ reports


REPORT_HEADER = ("m", "n", "k", "l", "alphabet", "snr_db", "d2", "e_nk", "C", "e_c")


@dataclass
class ComplexityReport:
    """Per-level expected node counts and the cost summary at one radius."""

    m: int
    n: int
    l: int
    alphabet: str
    snr_db: float
    sigma2: float
    d2: float
    e_nk: np.ndarray
    total_cost: float
    exponent: float
    sparse: bool = True
    variance_mc: float = None
    variance_stderr: float = None
    extra: dict = field(default_factory=dict)


def complexity_report(m, n, l, alphabet, snr_db, *, d2=None, one_minus_eps=0.99,
                      sparse=True, f=flop_model):
    """Closed-form :class:`ComplexityReport` for a Gaussian instance family.

    ``d2`` defaults to the chi-square radius at coverage ``one_minus_eps``.
    """
    alphabet = Alphabet.from_name(alphabet)
    sigma2 = sigma2_from_snr(snr_db, m, l, alphabet)
    if d2 is None:
        d2 = choose_radius(n, sigma2, one_minus_eps)
    e_nk = expected_nodes(m, n, l, sigma2, d2, alphabet, sparse=sparse)
    c, e_c = total_cost(e_nk, f)
    return ComplexityReport(
        m=m, n=n, l=l, alphabet=alphabet.name, snr_db=float(snr_db), sigma2=sigma2,
        d2=float(d2), e_nk=e_nk, total_cost=c, exponent=e_c, sparse=sparse,
    )


def report_rows(report):
    """One CSV row per level, columns as :data:`REPORT_HEADER`."""
    return [
        (report.m, report.n, k, report.l, report.alphabet, report.snr_db, report.d2,
         float(report.e_nk[k - 1]), report.total_cost, report.exponent)
        for k in range(1, report.m + 1)
    ]


# ------------------------------------------------------------ pair counting


def pair_count(k, l, l_prime, beta, eta, gamma, a, u, v):
    """Pairs of difference vectors with the given overlap statistics.

    With ``k <= l``, counts ternary ``x_b`` (length ``k``) and ``x_c``
    (length ``l``) such that ``||x_b||_0 = beta``, ``||x_c||_0 = eta``, the
    last ``k`` entries of ``x_c`` hold ``gamma`` nonzeros of which ``a`` are
    +1, and ``x_b`` matches ``+1`` on ``u`` and ``-1`` on ``v`` of them while
    being zero on the rest.  For ``k > l`` the two vectors swap roles.
    """
    if k > l:
        k, l = l, k
    if not (0 <= beta <= min(k, 2 * l_prime) and 0 <= eta <= min(l, 2 * l_prime)):
        return 0
    if not max(eta - (l - k), 0) <= gamma <= min(eta, k):
        return 0
    delta = u + v
    if min(a, u, v) < 0 or beta - delta < 0:
        return 0
    return (
        binomial(l - k, eta - gamma)
        * binomial(k, gamma)
        * binomial(gamma, a)
        * binomial(a, u)
        * binomial(gamma - a, v)
        * binomial(k - gamma, beta - delta)
        * 2 ** (eta - gamma + beta - delta)
    )


def pair_counts_by_stats(k, l, l_prime):
    """``{(beta, eta, gamma, delta): count}`` aggregated over ``(a, u, v)``."""
    s, b = min(k, l), max(k, l)
    out = {}
    for eta in range(0, min(b, 2 * l_prime) + 1):
        for gamma in range(max(eta - (b - s), 0), min(eta, s) + 1):
            for beta in range(0, min(s, 2 * l_prime) + 1):
                for a in range(0, gamma + 1):
                    for u in range(max(beta - (s - a), 0), min(beta, a) + 1):
                        for v in range(max(beta - (u + s - gamma), 0),
                                       min(gamma - a, beta - u) + 1):
                            g = pair_count(k, l, l_prime, beta, eta, gamma, a, u, v)
                            if g:
                                key = (beta, eta, gamma, u + v)
                                out[key] = out.get(key, 0) + g
    return out


def joint_prob_equal(d2, sigma2, x_c_norm2, l):
    """Joint survival probability of two nested suffixes that differ by nothing."""
    if d2 <= 0:
        return 0.0
    return _survival(0.5 * l, d2, sigma2, x_c_norm2)


# ----------------------------------------------------------------- variance


@dataclass(frozen=True)
class VarianceEstimate:
    """Monte Carlo moments of the per-trial cost ``sum_k f(k) N_k``."""

    variance: float
    stderr: float
    mean: float
    mean_stderr: float
    analytic_mean: float
    trials: int
    d2: float


def _jackknife_variance(x):
    x = np.asarray(x, dtype=float)
    t = x.shape[0]
    if t < 3:
        return float(np.var(x, ddof=1)) if t > 1 else 0.0, math.inf
    c = x - x.mean()
    s1 = c.sum()
    s2 = (c * c).sum()
    loo_mean = (s1 - c) / (t - 1)
    loo_var = (s2 - c * c - (t - 1) * loo_mean**2) / (t - 2)
    se = math.sqrt((t - 1) / t * float(((loo_var - loo_var.mean()) ** 2).sum()))
    return float(s2 / (t - 1)), se


def variance_mc(spec, trials, d2_mode="chi2", *, one_minus_eps=0.99, offset=0,
                f=flop_model):
    """Sample variance of the fixed-radius search cost over seeded trials.

    Parameters
    ----------
    spec : GenSpec
        Instance family; ``spec.seed`` is the base seed.
    trials : int
    d2_mode : {"chi2"} or float
        ``"chi2"`` uses the coverage radius at ``one_minus_eps``; a number is
        taken as ``d2`` directly.
    offset : int
        First trial index, so disjoint seed ranges can be compared.

    Returns
    -------
    VarianceEstimate
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sigma2 = sigma2_from_snr(spec.snr_db, spec.m, spec.l, spec.alphabet)
    if d2_mode == "chi2":
        d2 = choose_radius(spec.n, sigma2, one_minus_eps)
    else:
        d2 = float(d2_mode)
    weights = np.array([f(k) for k in range(1, spec.m + 1)], dtype=float)
    costs = np.empty(trials)
    for i in range(trials):
        seed = trial_seed(spec.seed, offset + i)
        inst, _ = generate_instance(
            GenSpec(spec.m, spec.n, spec.alphabet, spec.l, spec.snr_db, seed)
        )
        _, stats = decode_sparse_fp(inst, d2, prep=prepare(inst))
        costs[i] = float(weights @ stats.nodes_per_level)
    variance, se = _jackknife_variance(costs)
    try:
        e_nk = expected_nodes(spec.m, spec.n, spec.l, sigma2, d2, spec.alphabet)
        analytic = total_cost(e_nk, f)[0]
    except ValueError:
        analytic = math.nan
    mean_se = math.sqrt(variance / trials) if trials > 1 else math.inf
    return VarianceEstimate(variance, se, float(costs.mean()), mean_se, analytic,
                            trials, d2)
