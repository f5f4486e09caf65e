"""Relaxed sparse least-squares bounds and the decoder that prunes with them.

At a node that fixes the suffix ``x[k-1:]`` the remaining cost is
``min ||w - R[:k-1, :k-1] v||^2`` over integer, sparse ``v``.  Dropping the
integer constraint and solving the sparse problem greedily by orthogonal
matching pursuit gives a cheap estimate of that cost.  OMP is not certified
optimal, so the estimate is a heuristic bound and ``safe_mode`` disables it.
"""

from dataclasses import dataclass

import numpy as np

from .decoder import _growing
from .model import Alphabet

__all__ = [
    "OmpResult",
    "omp_solve",
    "lower_bound",
    "lower_bound_audit",
    "decode_sparse_lb",
    "omp_flops",
    "DEFAULT_BOUND_THRESHOLD",
]

DEFAULT_BOUND_THRESHOLD = 64
_IMPROVE_TOL = 1e-12


@dataclass(frozen=True)
class OmpResult:
    """Greedy sparse least-squares fit.

    Attributes
    ----------
    support : ndarray of int
        Selected column indices in selection order.
    coeffs : ndarray
        Least-squares coefficients on ``support``.
    residual2 : float
        Squared norm of the final residual.
    history : tuple of float
        Residual norms after each accepted atom, starting with ``||w||^2``.
    """

    support: np.ndarray
    coeffs: np.ndarray
    residual2: float
    history: tuple = ()


def omp_solve(a, w, budget):
    """Orthogonal matching pursuit with at most ``budget`` atoms.

    Columns are scored by ``|a_j^T res| / ||a_j||``; the first maximal
    column wins ties.  After each pick the coefficients are refit by least
    squares on the whole support.  The loop stops after ``budget`` atoms or
    once the squared residual improves by less than ``1e-12``.

    Parameters
    ----------
    a : array_like, shape (p, q)
    w : array_like, shape (p,)
    budget : int

    Returns
    -------
    OmpResult
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    w = np.asarray(w, dtype=float).ravel()
    if a.shape[0] != w.shape[0]:
        raise ValueError(f"a has {a.shape[0]} rows but w has length {w.shape[0]}")
    if budget < 0:
        raise ValueError(f"budget must be non-negative, got {budget}")
    norms = np.sqrt(np.einsum("ij,ij->j", a, a))
    usable = norms > 0
    res = w.copy()
    r2 = float(res @ res)
    history = [r2]
    support = []
    coeffs = np.zeros(0)
    tried = np.zeros(a.shape[1], dtype=bool)
    for _ in range(min(int(budget), a.shape[1])):
        score = np.zeros(a.shape[1])
        ok = usable & ~tried
        if not ok.any():
            break
        score[ok] = np.abs(a[:, ok].T @ res) / norms[ok]
        score[~ok] = -1.0
        j = int(np.argmax(score))
        tried[j] = True
        trial = support + [j]
        sub = a[:, trial]
        if np.linalg.matrix_rank(sub) < len(trial):
            # column already in the span of the support
            continue
        c, *_ = np.linalg.lstsq(sub, w, rcond=None)
        new_res = w - sub @ c
        new_r2 = float(new_res @ new_res)
        support, coeffs, res = trial, c, new_res
        improvement = r2 - new_r2
        r2 = min(r2, new_r2)
        history.append(r2)
        if improvement < _IMPROVE_TOL:
            break
    return OmpResult(np.asarray(support, dtype=np.int64), coeffs, r2, tuple(history))


def omp_flops(p, q, n_atoms):
    """Operation count charged for an OMP run on a ``p x q`` matrix.

    Each of the ``n_atoms + 1`` selection rounds scores every column
    (``2 p q``); each accepted atom ``j`` pays a least-squares refit
    (``2 p j^2``) and a residual update (``2 p``).
    """
    rounds = n_atoms + 1
    refits = sum(2 * p * j * j + 2 * p for j in range(1, n_atoms + 1))
    return int(2 * p * q * rounds + refits)


def _split(z, r, x_suffix):
    z = np.asarray(z, dtype=float)
    r = np.asarray(r, dtype=float)
    x_suffix = np.asarray(x_suffix, dtype=float)
    p = r.shape[0] - x_suffix.shape[0]
    if p < 1:
        raise ValueError("the suffix must leave at least one free entry")
    w = z[:p] - r[:p, p:] @ x_suffix
    return r[:p, :p], w


def lower_bound(z, r, x_suffix, l_tilde, alphabet=None):
    """OMP estimate of the best completion cost below a fixed suffix.

    ``x_suffix`` holds the last entries of ``x``; the remaining ``p`` leading
    entries are relaxed to reals with at most ``l_tilde`` nonzeros.  The
    value is the unrounded OMP residual, never negative.
    """
    a, w = _split(z, r, x_suffix)
    return omp_solve(a, w, max(int(l_tilde), 0)).residual2


def lower_bound_audit(z, r, x_suffix, l_tilde, alphabet):
    """Return ``(unrounded, rounded)`` bound values.

    The rounded value snaps the OMP coefficients to the nearest alphabet
    symbols and re-evaluates the residual; it is always at least the
    unrounded one.
    """
    alphabet = Alphabet.from_name(alphabet)
    a, w = _split(z, r, x_suffix)
    fit = omp_solve(a, w, max(int(l_tilde), 0))
    v = np.zeros(a.shape[1])
    if fit.support.size:
        v[fit.support] = alphabet.nearest(fit.coeffs)
    e = w - a @ v
    return fit.residual2, float(e @ e)


def decode_sparse_lb(inst, one_minus_eps=0.99, safe_mode=False, *,
                     bound_threshold=DEFAULT_BOUND_THRESHOLD, prep=None):
    """Sparsity-aware sphere decoding with OMP bound pruning.

    A node is expanded only when its partial residual plus the OMP bound on
    its best completion stays inside the sphere.  The bound is consulted
    once ``bound_threshold`` nodes have been visited in the current pass,
    so small, high-SNR searches skip its overhead.

    Parameters
    ----------
    inst : IlsInstance
    one_minus_eps : float
    safe_mode : bool
        Prune by sphere and sparsity only.  The result is then identical to
        :func:`~sparsesd.decoder.decode_sparse`.
    bound_threshold : int
    prep : Prepared, optional
    """
    if safe_mode:
        return _growing(inst, one_minus_eps, inst.l, "fp_growing", prep)
    return _growing(
        inst, one_minus_eps, inst.l, "fp_lower_bound", prep,
        use_bound=True, bound_threshold=int(bound_threshold),
    )
