"""Sparsity-aware sphere decoding for sparse integer least squares."""

from ._version import __version__
from .bound import OmpResult, decode_sparse_lb, lower_bound, omp_solve
from .decoder import (
    DecodeResult,
    SearchStats,
    brute_force,
    decode_classical,
    decode_sparse,
    decode_sparse_fp,
    decode_sparse_se,
)
from .estimators import OMPDecoder, SparseChannelEstimator, SparseSphereDecoder
from .exceptions import (
    ExactOverflowError,
    NoConvergenceError,
    RankDeficientError,
    SparseSDError,
    TooLargeError,
)
from .model import Alphabet, GenSpec, IlsInstance, enumerate_sparse, generate_instance
from .numerics import binomial, choose_radius, qr_decompose, regularized_gamma

__all__ = [
    "__version__",
    "Alphabet",
    "IlsInstance",
    "GenSpec",
    "DecodeResult",
    "SearchStats",
    "OmpResult",
    "enumerate_sparse",
    "generate_instance",
    "decode_sparse_fp",
    "decode_sparse",
    "decode_sparse_se",
    "decode_classical",
    "decode_sparse_lb",
    "brute_force",
    "SparseSphereDecoder",
    "OMPDecoder",
    "SparseChannelEstimator",
    "omp_solve",
    "lower_bound",
    "qr_decompose",
    "regularized_gamma",
    "binomial",
    "choose_radius",
    "SparseSDError",
    "RankDeficientError",
    "NoConvergenceError",
    "TooLargeError",
    "ExactOverflowError",
]
