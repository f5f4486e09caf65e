"""Sphere decoders for sparsity-constrained integer least squares.

All decoders share one compiled depth-first search (``_search.tree_search``)
and differ only in enumeration order, radius handling and the sparsity
budget.  Every returned residual is recomputed as ``||y - H x_hat||^2`` so
decoders that agree on ``x_hat`` agree on ``residual2`` bit for bit.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _search
from .model import IlsInstance, _sparse_points_float, sparse_points
from .numerics import choose_radius, qr_decompose

__all__ = [
    "SearchStats",
    "DecodeResult",
    "Prepared",
    "prepare",
    "radius_schedule",
    "decode_sparse_fp",
    "decode_fixed",
    "VARIANTS",
    "decode_sparse",
    "decode_sparse_se",
    "decode_classical",
    "brute_force",
    "flop_model",
]

logger = logging.getLogger(__name__)

_TIE_REL = 1e-10
# the schedule stops once 1 - eps gets this close to one
_MAX_PROB = 1.0 - 1e-12


def flop_model(k):
    """Operations charged for one visited node at tree level ``k``."""
    return _search.FLOP_SLOPE * k + _search.FLOP_BASE


@dataclass
class SearchStats:
    """Per-level node counters and work accounting for one decode."""

    nodes_per_level: np.ndarray
    flops: int = 0
    radius_restarts: int = 0
    solutions_examined: int = 0
    bound_calls: int = 0
    bound_prunes: int = 0

    @classmethod
    def empty(cls, m):
        return cls(nodes_per_level=np.zeros(m, dtype=np.int64))

    @property
    def total_nodes(self):
        return int(self.nodes_per_level.sum())

    def absorb(self, other):
        self.nodes_per_level = self.nodes_per_level + other.nodes_per_level
        self.flops += other.flops
        self.solutions_examined += other.solutions_examined
        self.bound_calls += other.bound_calls
        self.bound_prunes += other.bound_prunes

    def __eq__(self, other):
        if not isinstance(other, SearchStats):
            return NotImplemented
        return (
            np.array_equal(self.nodes_per_level, other.nodes_per_level)
            and self.flops == other.flops
            and self.radius_restarts == other.radius_restarts
            and self.solutions_examined == other.solutions_examined
            and self.bound_calls == other.bound_calls
            and self.bound_prunes == other.bound_prunes
        )


@dataclass
class DecodeResult:
    x_hat: np.ndarray
    residual2: float
    stats: SearchStats
    mode: str
    d2: float = float("nan")

    def __eq__(self, other):
        if not isinstance(other, DecodeResult):
            return NotImplemented
        return (
            np.array_equal(self.x_hat, other.x_hat)
            and self.residual2 == other.residual2
            and self.stats == other.stats
            and self.mode == other.mode
            and (self.d2 == other.d2 or (np.isnan(self.d2) and np.isnan(other.d2)))
        )


@dataclass
class Prepared:
    """QR-reduced form of an instance, reused across radius restarts."""

    inst: IlsInstance
    r: np.ndarray
    z: np.ndarray
    q2norm: float
    tie_abs: float
    colnorm: np.ndarray = field(repr=False)


def prepare(inst):
    qr = qr_decompose(inst.h)
    z = qr.q1.T @ inst.y
    q2y = qr.q2.T @ inst.y
    r = np.ascontiguousarray(qr.r)
    return Prepared(
        inst=inst,
        r=r,
        z=np.ascontiguousarray(z),
        q2norm=float(q2y @ q2y),
        tie_abs=1e-12 * (float(inst.y @ inst.y) + 1.0),
        colnorm=np.sqrt(np.sum(r * r, axis=0)),
    )


def _residual2(inst, x):
    e = inst.y - inst.h @ x
    return float(e @ e)


def _run(prep, d2, l, *, zigzag=False, radius_update=False, use_bound=False,
         bound_threshold=0, early_cut=None):
    inst = prep.inst
    if early_cut is None:
        early_cut = inst.alphabet.nonnegative
    found, x, _metric, nodes, flops, leaves, calls, prunes = _search.tree_search(
        prep.r,
        prep.z,
        float(d2) - prep.q2norm,
        inst.alphabet.as_array(),
        int(l),
        bool(zigzag),
        bool(radius_update),
        bool(use_bound),
        int(bound_threshold),
        bool(early_cut),
        prep.tie_abs,
        prep.colnorm,
    )
    stats = SearchStats(
        nodes_per_level=nodes,
        flops=int(flops),
        solutions_examined=int(leaves),
        bound_calls=int(calls),
        bound_prunes=int(prunes),
    )
    return (x.copy() if found else None), stats


def decode_sparse_fp(inst, d2, *, early_cut=None, prep=None):
    """One fixed-radius Fincke-Pohst pass of the sparsity-aware search.

    Returns
    -------
    (DecodeResult or None, SearchStats)
        ``None`` when no ``l``-sparse point lies inside the sphere.
    """
    prep = prep or prepare(inst)
    x, stats = _run(prep, d2, inst.l, early_cut=early_cut)
    if x is None:
        return None, stats
    return DecodeResult(x, _residual2(inst, x), stats, "fp_fixed", float(d2)), stats


# search options per decoder label; unaware variants use the budget m
VARIANTS = {
    "sparse": dict(mode="fp_fixed", sparse=True, opts={}),
    "sparse_se": dict(mode="se_radius_update", sparse=True,
                      opts=dict(zigzag=True, radius_update=True)),
    "sparse_lb": dict(mode="fp_lower_bound", sparse=True, opts=dict(use_bound=True)),
    "classical": dict(mode="classical", sparse=False, opts=dict(early_cut=False)),
    "classical_se": dict(mode="classical", sparse=False,
                         opts=dict(zigzag=True, radius_update=True, early_cut=False)),
}


def decode_fixed(inst, d2, variant="sparse", *, prep=None, bound_threshold=64):
    """Single search pass at radius ``d2`` for any label in :data:`VARIANTS`.

    Returns ``(DecodeResult or None, SearchStats)`` like :func:`decode_sparse_fp`.
    """
    try:
        spec = VARIANTS[variant]
    except KeyError:
        raise ValueError(f"unknown decoder variant {variant!r}") from None
    prep = prep or prepare(inst)
    opts = dict(spec["opts"])
    if opts.get("use_bound"):
        opts["bound_threshold"] = int(bound_threshold)
    l = inst.l if spec["sparse"] else inst.m
    x, stats = _run(prep, d2, l, **opts)
    if x is None:
        return None, stats
    return DecodeResult(x, _residual2(inst, x), stats, spec["mode"], float(d2)), stats


def radius_schedule(one_minus_eps):
    """Coverage probabilities tried in turn: the requested one, then 1 - 10^-(2+j)."""
    yield one_minus_eps
    j = 0
    while True:
        p = 1.0 - 10.0 ** (-(2 + j))
        j += 1
        if p > _MAX_PROB:
            return
        if p > one_minus_eps:
            yield p


def _radii(inst, prep, one_minus_eps):
    last = 0.0
    if inst.sigma2 > 0:
        for p in radius_schedule(one_minus_eps):
            last = choose_radius(inst.n, inst.sigma2, p)
            yield last
    else:
        # noiseless: only exact (to rounding) fits sit in the first sphere
        last = prep.q2norm + prep.tie_abs
        yield last
    # the all-zero vector is always feasible, so this sphere is never empty
    yield max(float(inst.y @ inst.y) * (1 + 1e-9) + prep.tie_abs, last)


def _growing(inst, one_minus_eps, l, mode, prep=None, **search_kw):
    if prep is None:
        prep = prepare(inst)
    total = SearchStats.empty(inst.m)
    restarts = 0
    for d2 in _radii(inst, prep, one_minus_eps):
        x, stats = _run(prep, d2, l, **search_kw)
        total.absorb(stats)
        if x is not None:
            total.radius_restarts = restarts
            return DecodeResult(x, _residual2(inst, x), total, mode, float(d2))
        restarts += 1
        logger.debug("empty sphere at d2=%.6g, growing radius", d2)
    raise AssertionError("the final sphere contains the zero vector")


def decode_sparse(inst, one_minus_eps=0.99, *, early_cut=None, prep=None):
    """Sparsity-aware Fincke-Pohst decoding with radius growth on empty spheres.

    Parameters
    ----------
    inst : IlsInstance
    one_minus_eps : float
        Coverage probability of the first sphere; later spheres follow
        :func:`radius_schedule`.
    early_cut : bool, optional
        Skip larger symbols once the sparsity budget is exceeded at a level.
        Defaults to on for non-negative alphabets.
    prep : Prepared, optional
        Output of :func:`prepare` for ``inst``, to share one QR across calls.
    """
    return _growing(inst, one_minus_eps, inst.l, "fp_growing", prep, early_cut=early_cut)


def decode_sparse_se(inst, one_minus_eps=0.99, *, early_cut=None, prep=None):
    """Schnorr-Euchner (zig-zag) enumeration with radius update."""
    return _growing(
        inst, one_minus_eps, inst.l, "se_radius_update", prep,
        zigzag=True, radius_update=True, early_cut=early_cut,
    )


def decode_classical(inst, one_minus_eps=0.99, *, radius_update=False, prep=None):
    """Sparsity-unaware baseline: the same search with the budget set to ``m``."""
    if radius_update:
        return _growing(
            inst, one_minus_eps, inst.m, "classical", prep,
            zigzag=True, radius_update=True, early_cut=False,
        )
    return _growing(inst, one_minus_eps, inst.m, "classical", prep, early_cut=False)


def brute_force(inst, cap=None, chunk=1 << 16):
    """Exhaustive minimization over every ``l``-sparse vector (test oracle)."""
    kw = {} if cap is None else {"cap": cap}
    pts = sparse_points(inst.m, inst.l, inst.alphabet, **kw)
    fpts = _sparse_points_float(inst.m, min(inst.l, inst.m), inst.alphabet.symbols)
    scores = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], chunk):
        block = fpts[start:start + chunk]
        e = inst.y[None, :] - block @ inst.h.T
        scores[start:start + chunk] = np.einsum("ij,ij->i", e, e)
    best = scores.min()
    tie_abs = 1e-12 * (float(inst.y @ inst.y) + 1.0)
    # rows are in lexicographic order, so the first near-minimal row wins ties
    idx = int(np.flatnonzero(scores <= best + _TIE_REL * best + tie_abs)[0])
    x = pts[idx].copy()
    stats = SearchStats.empty(inst.m)
    stats.solutions_examined = int(pts.shape[0])
    return DecodeResult(x, _residual2(inst, x), stats, "brute_force")
