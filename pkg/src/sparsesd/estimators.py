"""Estimator-style wrappers: ``fit`` factors the channel, ``predict`` decodes.

The classes follow scikit-learn conventions (constructor stores parameters
verbatim, fitted attributes end in ``_``, ``get_params``/``set_params``
come from :class:`~sklearn.base.BaseEstimator`), so they can be cloned and
grid-searched.  ``fit`` takes the channel matrix rather than a design
matrix and a target, because the decoding problem has no training labels.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _validation as v
from .bound import decode_sparse_lb, omp_flops, omp_solve
from .channel import ChannelInstance, build_toeplitz, detect_support, least_squares
from .decoder import (
    Prepared,
    SearchStats,
    brute_force,
    decode_classical,
    decode_sparse,
    decode_sparse_se,
)
from .model import IlsInstance
from .numerics import qr_decompose

__all__ = ["SparseSphereDecoder", "OMPDecoder", "SparseChannelEstimator"]

_METHODS = ("sparse", "sparse_se", "sparse_lb", "classical", "brute")


def _symbol_accuracy(x_hat, x_true):
    x_true = np.atleast_2d(np.asarray(x_true))
    x_hat = np.atleast_2d(x_hat)
    if x_true.shape != x_hat.shape:
        raise ValueError(f"expected X of shape {x_hat.shape}, got {x_true.shape}")
    return 1.0 - float(np.mean(x_hat != x_true))


class SparseSphereDecoder(BaseEstimator):
    """Sparse integer least-squares detector for a fixed channel.

    Parameters
    ----------
    alphabet : str or Alphabet, default="binary01"
    sparsity : int, optional
        Maximum number of nonzero symbols; ``None`` means no limit.
    noise_var : float, default=0.0
        Noise variance used to size the first search sphere.
    one_minus_eps : float, default=0.99
        Probability that the first sphere holds the transmitted vector.
    method : {"sparse", "sparse_se", "sparse_lb", "classical", "brute"}
    safe_mode : bool, default=False
        Only for ``method="sparse_lb"``: disable bound pruning.
    bound_threshold : int, default=64

    Attributes
    ----------
    n_features_in_ : int
        Length of an observation vector (rows of ``H``).
    n_symbols_ : int
        Length of the decoded vector (columns of ``H``).
    stats_ : list of SearchStats
        Search statistics from the latest :meth:`predict` call.
    residuals_ : ndarray
        ``||y - H x_hat||^2`` for each observation of the latest call.

    Examples
    --------
    >>> import numpy as np
    >>> h = np.eye(3)
    >>> dec = SparseSphereDecoder(sparsity=1).fit(h)
    >>> dec.predict([0.1, 0.9, -0.1]).tolist()
    [0, 1, 0]
    """

    def __init__(self, alphabet="binary01", sparsity=None, noise_var=0.0, one_minus_eps=0.99,
                 method="sparse", safe_mode=False, bound_threshold=64):
        self.alphabet = alphabet
        self.sparsity = sparsity
        self.noise_var = noise_var
        self.one_minus_eps = one_minus_eps
        self.method = method
        self.safe_mode = safe_mode
        self.bound_threshold = bound_threshold

    def fit(self, H, y=None):
        """Validate ``H`` and compute its QR factorization.

        Raises
        ------
        RankDeficientError
            If ``H`` does not have full column rank.
        """
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {_METHODS}")
        h = v.check_channel_matrix(H)
        self.alphabet_ = v.check_alphabet(self.alphabet)
        self.sparsity_ = v.check_sparsity(self.sparsity, h.shape[1])
        v.check_noise_var(self.noise_var)
        v.check_probability(self.one_minus_eps)
        self.h_ = h
        self.qr_ = qr_decompose(h)
        self.n_features_in_, self.n_symbols_ = h.shape
        self._colnorm = np.sqrt(np.sum(self.qr_.r ** 2, axis=0))
        return self

    def _prepared(self, y):
        inst = IlsInstance(self.h_, y, self.alphabet_, self.sparsity_, float(self.noise_var))
        q2y = self.qr_.q2.T @ y
        return Prepared(
            inst=inst, r=np.ascontiguousarray(self.qr_.r),
            z=np.ascontiguousarray(self.qr_.q1.T @ y), q2norm=float(q2y @ q2y),
            tie_abs=1e-12 * (float(y @ y) + 1.0), colnorm=self._colnorm,
        )

    def _decode(self, prep):
        eps = self.one_minus_eps
        if self.method == "sparse":
            return decode_sparse(prep.inst, eps, prep=prep)
        if self.method == "sparse_se":
            return decode_sparse_se(prep.inst, eps, prep=prep)
        if self.method == "sparse_lb":
            return decode_sparse_lb(prep.inst, eps, self.safe_mode,
                                    bound_threshold=self.bound_threshold, prep=prep)
        if self.method == "classical":
            return decode_classical(prep.inst, eps, prep=prep)
        return brute_force(prep.inst)

    def predict(self, Y):
        """Decode one observation ``(n,)`` or a batch ``(n_obs, n)``.

        Returns
        -------
        ndarray of int
            Shape ``(m,)`` or ``(n_obs, m)``, matching the input.
        """
        check_is_fitted(self, "qr_")
        obs, was_1d = v.check_observations(Y, self.n_features_in_)
        out = np.empty((obs.shape[0], self.n_symbols_), dtype=np.int64)
        self.stats_, res = [], []
        for i, y in enumerate(obs):
            result = self._decode(self._prepared(y))
            out[i] = result.x_hat
            self.stats_.append(result.stats)
            res.append(result.residual2)
        self.residuals_ = np.asarray(res)
        return out[0] if was_1d else out

    def score(self, Y, X):
        """Fraction of correctly detected symbols."""
        return _symbol_accuracy(self.predict(Y), X)


class OMPDecoder(BaseEstimator):
    """Greedy baseline: OMP with ``sparsity`` atoms, coefficients rounded to the alphabet.

    Parameters
    ----------
    alphabet : str or Alphabet, default="binary01"
    sparsity : int, optional
    """

    def __init__(self, alphabet="binary01", sparsity=None):
        self.alphabet = alphabet
        self.sparsity = sparsity

    def fit(self, H, y=None):
        h = v.check_channel_matrix(H)
        self.alphabet_ = v.check_alphabet(self.alphabet)
        self.sparsity_ = v.check_sparsity(self.sparsity, h.shape[1])
        self.h_ = h
        self.n_features_in_, self.n_symbols_ = h.shape
        return self

    def predict(self, Y):
        check_is_fitted(self, "h_")
        obs, was_1d = v.check_observations(Y, self.n_features_in_)
        out = np.zeros((obs.shape[0], self.n_symbols_), dtype=np.int64)
        n, m = self.h_.shape
        self.stats_ = []
        for i, y in enumerate(obs):
            fit = omp_solve(self.h_, y, self.sparsity_)
            if fit.support.size:
                out[i, fit.support] = self.alphabet_.nearest(fit.coeffs)
            stats = SearchStats.empty(m)
            stats.flops = omp_flops(n, m, int(fit.support.size))
            self.stats_.append(stats)
        return out[0] if was_1d else out

    def score(self, Y, X):
        """Fraction of correctly detected symbols."""
        return _symbol_accuracy(self.predict(Y), X)


class SparseChannelEstimator(BaseEstimator):
    """Sparse FIR channel estimation from a known training sequence.

    ``fit`` takes the training sequence and builds its convolution matrix;
    ``predict`` maps received blocks to channel estimates.  The support is
    found by zero-tap detection (or OMP) and the taps are refit by least
    squares on it.

    Parameters
    ----------
    n_taps : int
        Channel length ``L``.
    n_nonzero : int
        Number of nonzero taps assumed by the detector.
    method : {"sparse_sd", "classical_sd", "omp"}
    noise_var : float, default=0.0
    one_minus_eps : float, default=0.99
    """

    def __init__(self, n_taps=20, n_nonzero=3, method="sparse_sd", noise_var=0.0,
                 one_minus_eps=0.99):
        self.n_taps = n_taps
        self.n_nonzero = n_nonzero
        self.method = method
        self.noise_var = noise_var
        self.one_minus_eps = one_minus_eps

    def fit(self, u_seq, y=None):
        if self.method not in ("sparse_sd", "classical_sd", "omp"):
            raise ValueError(f"unknown method {self.method!r}")
        u = np.asarray(u_seq, dtype=np.float64).ravel()
        if u.size == 0 or not np.all(np.isfinite(u)):
            raise ValueError("training sequence must be non-empty and finite")
        if not 1 <= int(self.n_nonzero) <= int(self.n_taps):
            raise ValueError(f"need 1 <= n_nonzero <= n_taps, got {self.n_nonzero}")
        v.check_noise_var(self.noise_var)
        v.check_probability(self.one_minus_eps)
        self.u_seq_ = u
        self.u_mat_ = build_toeplitz(u, int(self.n_taps))
        self.n_features_in_ = self.u_mat_.shape[0]
        return self

    def predict(self, X):
        """Channel estimates of shape ``(n_taps,)`` or ``(n_obs, n_taps)``."""
        check_is_fitted(self, "u_mat_")
        obs, was_1d = v.check_observations(X, self.n_features_in_)
        L = int(self.n_taps)
        out = np.zeros((obs.shape[0], L))
        self.supports_ = []
        for i, x in enumerate(obs):
            inst = ChannelInstance(self.u_seq_, self.u_mat_, np.zeros(L),
                                   np.zeros(L, dtype=np.int64), x, float(self.noise_var))
            support, _ = detect_support(inst, self.method, int(self.n_nonzero),
                                        self.one_minus_eps)
            out[i, support] = least_squares(self.u_mat_[:, support], x)
            self.supports_.append(support)
        return out[0] if was_1d else out

    def score(self, X, h_true):
        """Negative mean normalized squared error (higher is better)."""
        h_hat = np.atleast_2d(self.predict(X))
        h_true = np.atleast_2d(np.asarray(h_true, dtype=float))
        err = np.sum((h_hat - h_true) ** 2, axis=1) / np.sum(h_true ** 2, axis=1)
        return -float(np.mean(err))
