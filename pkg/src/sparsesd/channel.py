"""Sparse channel estimation by zero-tap detection.

A known training sequence ``u`` of length ``M`` is sent through a channel
with ``L`` taps of which ``m_sharp`` are nonzero.  The observations are
``x = U h + noise`` with ``U`` the ``(M + L - 1) x L`` convolution matrix.
Estimation runs in three steps: an unstructured least-squares fit ``h_ls``,
detection of the tap support ``b`` on the lattice ``U diag(h_ls)``, and a
least-squares refit restricted to the detected support.
"""

import math
from dataclasses import dataclass

import numpy as np

from .bound import omp_flops, omp_solve
from .decoder import SearchStats, decode_classical, decode_sparse_se
from .exceptions import RankDeficientError
from .harness import _map, manifest_path, write_csv, write_manifest
from .model import IlsInstance, trial_seed

__all__ = [
    "ChannelInstance",
    "METHODS",
    "CHANNEL_HEADER",
    "training_sequence",
    "build_toeplitz",
    "channel_sigma2",
    "make_channel",
    "least_squares",
    "detect_support",
    "estimate_channel",
    "run_channel_experiment",
]

METHODS = ("oracle", "sparse_sd", "classical_sd", "omp")
CHANNEL_HEADER = ("snr_db", "method", "mean_mse", "stderr", "mean_nodes", "mean_flops")

# taps whose LS estimate is this small relative to the largest are left out
# of the detection lattice; they would give all-zero columns
_ACTIVE_TOL = 1e-12


@dataclass
class ChannelInstance:
    """Training system ``x_obs = u_mat @ h + noise`` with ``h = diag(h) b``."""

    u_seq: np.ndarray
    u_mat: np.ndarray
    h: np.ndarray
    b: np.ndarray
    x_obs: np.ndarray
    sigma2: float

    @property
    def n_taps(self):
        return self.u_mat.shape[1]

    @property
    def order(self):
        """Number of nonzero taps."""
        return int(np.count_nonzero(self.b))


def training_sequence(M):
    """Alternating constant-modulus sequence ``(1, -1, 1, ...)`` of length ``M``."""
    if M < 1:
        raise ValueError(f"need M >= 1, got {M}")
    return np.where(np.arange(M) % 2 == 0, 1.0, -1.0)


def build_toeplitz(u_seq, L):
    """Convolution matrix of shape ``(M + L - 1, L)``; column ``j`` is ``u`` shifted by ``j``."""
    u = np.asarray(u_seq, dtype=float).ravel()
    M = u.shape[0]
    if M < 1 or L < 1:
        raise ValueError(f"need M >= 1 and L >= 1, got M={M}, L={L}")
    out = np.zeros((M + L - 1, L))
    for j in range(L):
        out[j:j + M, j] = u
    return out


def channel_sigma2(snr_db, M, L, m_sharp):
    """Noise variance for a per-sample receive SNR of ``snr_db``.

    The mean received energy is ``m_sharp * ||u||^2 = m_sharp * M`` for
    unit-variance taps and a constant-modulus training sequence, spread over
    ``M + L - 1`` samples.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return m_sharp * M / ((M + L - 1) * 10.0 ** (snr_db / 10.0))


def make_channel(L, M, m_sharp, snr_db, seed, u_seq=None):
    """Seeded instance: support uniform over ``m_sharp``-subsets, N(0, 1) taps.

    The noise is drawn as a standard normal vector and scaled, so instances
    with the same seed differ across SNR only by the noise level.
    """
    if not 0 <= m_sharp <= L:
        raise ValueError(f"need 0 <= m_sharp <= L, got m_sharp={m_sharp}, L={L}")
    rng = np.random.default_rng(int(seed))
    support = np.sort(rng.permutation(L)[:m_sharp])
    b = np.zeros(L, dtype=np.int64)
    b[support] = 1
    h = np.zeros(L)
    h[support] = rng.standard_normal(m_sharp)
    noise = rng.standard_normal(M + L - 1)
    u = training_sequence(M) if u_seq is None else np.asarray(u_seq, dtype=float)
    u_mat = build_toeplitz(u, L)
    sigma2 = channel_sigma2(snr_db, u.shape[0], L, m_sharp)
    x = u_mat @ h + math.sqrt(sigma2) * noise
    return ChannelInstance(u, u_mat, h, b, x, sigma2)


def least_squares(a, x):
    """Least-squares solution; raises on a rank-deficient system."""
    a = np.asarray(a, dtype=float)
    if a.shape[1] == 0:
        return np.zeros(0)
    coef, _, rank, _ = np.linalg.lstsq(a, x, rcond=None)
    if rank < a.shape[1]:
        raise RankDeficientError(f"restricted system has rank {rank} < {a.shape[1]}")
    return coef


def detect_support(inst, method, m_sharp=None, one_minus_eps=0.99):
    """Detected tap support and search statistics for one method.

    Returns
    -------
    (ndarray of int, SearchStats)
        Sorted support indices.
    """
    L = inst.n_taps
    m_sharp = inst.order if m_sharp is None else int(m_sharp)
    if method == "oracle":
        return np.flatnonzero(inst.b), SearchStats.empty(L)
    if method == "omp":
        fit = omp_solve(inst.u_mat, inst.x_obs, m_sharp)
        stats = SearchStats.empty(L)
        stats.flops = omp_flops(inst.u_mat.shape[0], L, int(fit.support.size))
        return np.sort(fit.support), stats
    if method not in ("sparse_sd", "classical_sd"):
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")

    h_ls = least_squares(inst.u_mat, inst.x_obs)
    scale = np.max(np.abs(h_ls)) if h_ls.size else 0.0
    active = np.flatnonzero(np.abs(h_ls) > _ACTIVE_TOL * scale)
    stats = SearchStats.empty(L)
    if active.size == 0:
        return active, stats
    lattice = inst.u_mat[:, active] * h_ls[active]
    l = min(m_sharp, active.size) if method == "sparse_sd" else active.size
    ils = IlsInstance(lattice, inst.x_obs, "binary01", l, inst.sigma2)
    if method == "sparse_sd":
        res = decode_sparse_se(ils, one_minus_eps)
    else:
        res = decode_classical(ils, one_minus_eps)
    stats.nodes_per_level[: active.size] = res.stats.nodes_per_level
    stats.flops = res.stats.flops
    stats.radius_restarts = res.stats.radius_restarts
    stats.solutions_examined = res.stats.solutions_examined
    return active[res.x_hat != 0], stats


def estimate_channel(inst, method, m_sharp=None, one_minus_eps=0.99):
    """Structured channel estimate and its normalized squared error.

    Returns
    -------
    (h_hat, mse)
        ``mse = ||h - h_hat||^2 / ||h||^2``.
    """
    support, _ = detect_support(inst, method, m_sharp, one_minus_eps)
    return _refit(inst, support)


def _refit(inst, support):
    h_hat = np.zeros(inst.n_taps)
    h_hat[support] = least_squares(inst.u_mat[:, support], inst.x_obs)
    denom = float(inst.h @ inst.h)
    err = inst.h - h_hat
    mse = float(err @ err) / denom if denom > 0 else float(err @ err)
    return h_hat, mse


def _trial(args):
    L, M, m_sharp, snr_grid, methods, base, i, u_seq = args
    seed = trial_seed(base, i)
    out = []
    for snr in snr_grid:
        inst = make_channel(L, M, m_sharp, snr, seed, u_seq)
        for method in methods:
            support, stats = detect_support(inst, method, m_sharp)
            _, mse = _refit(inst, support)
            out.append((snr, method, mse, stats.total_nodes, stats.flops))
    return out


def run_channel_experiment(L, M, m_sharp, snr_grid, trials, seed, *, methods=METHODS,
                           u_seq=None, output_path=None, workers=1):
    """Normalized MSE and detection cost per method and SNR.

    Returns rows keyed by :data:`CHANNEL_HEADER`, ordered by SNR then method.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    snr_grid = [float(s) for s in snr_grid]
    if not snr_grid:
        raise ValueError("empty SNR grid")
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    jobs = [(L, M, m_sharp, snr_grid, tuple(methods), seed, i, u_seq)
            for i in range(trials)]
    results = _map(_trial, jobs, workers)
    acc = {}
    for per_trial in results:
        for snr, method, mse, nodes, flops in per_trial:
            acc.setdefault((snr, method), []).append((mse, nodes, flops))
    rows = []
    for snr in snr_grid:
        for method in methods:
            vals = np.array(acc[(snr, method)], dtype=float)
            mse = vals[:, 0]
            se = float(mse.std(ddof=1) / math.sqrt(len(mse))) if len(mse) > 1 else math.nan
            rows.append({
                "snr_db": snr, "method": method, "mean_mse": float(mse.mean()),
                "stderr": se, "mean_nodes": float(vals[:, 1].mean()),
                "mean_flops": float(vals[:, 2].mean()),
            })
    if output_path:
        write_csv(output_path, CHANNEL_HEADER, rows)
        config = {"L": L, "M": M, "m_sharp": m_sharp, "snr_grid": snr_grid,
                  "trials": trials, "methods": list(methods)}
        write_manifest(manifest_path(output_path), "channel", config, seed, [output_path])
    return rows
