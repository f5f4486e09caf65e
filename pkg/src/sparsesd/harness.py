"""Seeded Monte Carlo experiments: error rates, node counts and theory checks.

Trial ``i`` at every grid point uses the seed ``trial_seed(base, i)``, so all
decoders see the same instances and results do not depend on the number of
worker processes.  Output tables are plain lists of dicts; CSV files have a
fixed header and every float is written with 17 significant digits.
"""

import csv
import dataclasses
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._version import __version__
from .bound import decode_sparse_lb, omp_flops, omp_solve
from .complexity import expected_nodes
from .decoder import (
    SearchStats,
    brute_force,
    decode_classical,
    decode_fixed,
    decode_sparse,
    decode_sparse_se,
    prepare,
)
from .exceptions import SparseSDError
from .model import Alphabet, GenSpec, generate_instance, sigma2_from_snr, trial_seed
from .numerics import choose_radius

__all__ = [
    "ExperimentSpec",
    "TrialRecord",
    "DECODER_LABELS",
    "RESULT_HEADER",
    "THEORY_HEADER",
    "run_trials",
    "run_experiment",
    "run_omp_baseline",
    "compare_theory",
    "omp_decode",
    "fmt",
    "write_csv",
    "write_manifest",
]

logger = logging.getLogger(__name__)

DECODER_LABELS = ("sparse", "sparse_se", "sparse_lb", "classical", "classical_se",
                  "omp", "brute")

RESULT_HEADER = (
    "m", "n", "l", "alphabet", "snr_db", "decoder", "trials", "completed",
    "empty_spheres", "failures", "error_rate", "error_rate_se", "mean_flops",
    "flops_se", "e_c", "mean_nodes", "nodes_se",
)

THEORY_HEADER = (
    "m", "n", "l", "alphabet", "snr_db", "d2", "k", "analytic", "empirical",
    "stderr", "z", "pass",
)

Z_LIMIT = 4.0


@dataclass(frozen=True)
class ExperimentSpec:
    """Grid of instance families, the decoders to run and the trial budget.

    ``n=None`` pairs every ``m`` with ``n = m``.  Grid points with ``l > m``
    or ``m > n`` are skipped.
    """

    m: tuple = (10,)
    l: tuple = (3,)
    snr_db: tuple = (10.0,)
    n: tuple = None
    alphabet: str = "binary01"
    decoders: tuple = ("sparse",)
    trials: int = 100
    fixed_radius: bool = False
    one_minus_eps: float = 0.99
    seed: int = 0
    bound_threshold: int = 64
    safe_mode: bool = False
    output_path: str = None

    def __post_init__(self):
        for name in ("m", "l", "snr_db", "n"):
            value = getattr(self, name)
            if value is None:
                continue
            if np.isscalar(value):
                value = (value,)
            value = tuple(value)
            if not value:
                raise ValueError(f"grid {name!r} is empty")
            object.__setattr__(self, name, value)
        if isinstance(self.decoders, str):
            object.__setattr__(self, "decoders", (self.decoders,))
        object.__setattr__(self, "decoders", tuple(self.decoders))
        unknown = [d for d in self.decoders if d not in DECODER_LABELS]
        if unknown:
            raise ValueError(f"unknown decoders {unknown}; choose from {DECODER_LABELS}")
        if not self.decoders:
            raise ValueError("no decoders given")
        if int(self.trials) < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not 0.0 < self.one_minus_eps < 1.0:
            raise ValueError("one_minus_eps must lie in (0, 1)")
        Alphabet.from_name(self.alphabet)

    def grid(self):
        """Valid ``(m, n, l, snr_db)`` points in a canonical order."""
        points = []
        for m in self.m:
            ns = (m,) if self.n is None else self.n
            for n, l, snr in itertools.product(ns, self.l, self.snr_db):
                if 1 <= m <= n and 0 <= l <= m:
                    points.append((int(m), int(n), int(l), float(snr)))
        if not points:
            raise ValueError("the grid has no valid (m, n, l) combination")
        return points

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class TrialRecord:
    seed: int
    decoder: str
    error_count: int
    nodes_per_level: np.ndarray
    flops: int
    residual2: float
    wall_time: float = 0.0
    empty: bool = False
    failed: bool = False
    extra: dict = field(default_factory=dict)


def fmt(value):
    """Text form used in every output file (17 significant digits for floats)."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return ";".join(fmt(v) for v in value)
    return str(value)


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(row[h]) for h in header])


def manifest_path(path):
    root, _ = os.path.splitext(path)
    return root + ".manifest.json"


def write_manifest(path, kind, config, seed, outputs):
    """JSON record of what produced ``outputs``; contains no timestamps."""
    doc = {
        "kind": kind,
        "version": __version__,
        "seed": int(seed),
        "config": config,
        "outputs": [os.path.basename(p) for p in outputs],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Alphabet):
        return obj.name if obj.name != "custom" else ",".join(map(str, obj.symbols))
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def omp_decode(inst):
    """Relax to reals, fit ``l`` atoms by OMP and snap to the alphabet."""
    fit = omp_solve(inst.h, inst.y, inst.l)
    x = np.zeros(inst.m, dtype=np.int64)
    if fit.support.size:
        x[fit.support] = inst.alphabet.nearest(fit.coeffs)
    stats = SearchStats.empty(inst.m)
    stats.flops = omp_flops(inst.n, inst.m, int(fit.support.size))
    e = inst.y - inst.h @ x
    return x, float(e @ e), stats


def _decode_one(label, inst, prep, spec, d2):
    """Return ``(x_hat or None, residual2, stats)`` for one decoder label."""
    if label == "omp":
        return omp_decode(inst)
    if label == "brute":
        res = brute_force(inst)
        return res.x_hat, res.residual2, res.stats
    if spec.fixed_radius:
        res, stats = decode_fixed(inst, d2, label, prep=prep,
                                  bound_threshold=spec.bound_threshold)
        if res is None:
            return None, math.nan, stats
        return res.x_hat, res.residual2, stats
    eps = spec.one_minus_eps
    if label == "sparse":
        res = decode_sparse(inst, eps, prep=prep)
    elif label == "sparse_se":
        res = decode_sparse_se(inst, eps, prep=prep)
    elif label == "sparse_lb":
        res = decode_sparse_lb(inst, eps, spec.safe_mode,
                               bound_threshold=spec.bound_threshold, prep=prep)
    elif label == "classical":
        res = decode_classical(inst, eps, prep=prep)
    else:
        res = decode_classical(inst, eps, radius_update=True, prep=prep)
    return res.x_hat, res.residual2, res.stats


def _fixed_d2(spec, m, n, l, snr):
    sigma2 = sigma2_from_snr(snr, m, l, spec.alphabet)
    if not sigma2 > 0:
        raise ValueError("fixed-radius runs need a finite SNR")
    return choose_radius(n, sigma2, spec.one_minus_eps)


def run_trials(spec, point, decoders=None):
    """All trials at one grid point: ``{decoder: [TrialRecord, ...]}``."""
    m, n, l, snr = point
    decoders = spec.decoders if decoders is None else decoders
    d2 = _fixed_d2(spec, m, n, l, snr) if spec.fixed_radius else math.nan
    out = {d: [] for d in decoders}
    for i in range(int(spec.trials)):
        seed = trial_seed(spec.seed, i)
        inst, x_true = generate_instance(GenSpec(m, n, spec.alphabet, l, snr, seed))
        try:
            prep = prepare(inst)
        except SparseSDError as exc:
            logger.warning("trial %d (seed %d) skipped: %s", i, seed, exc)
            for d in decoders:
                out[d].append(TrialRecord(seed, d, 0, np.zeros(m, np.int64), 0,
                                          math.nan, failed=True))
            continue
        for d in decoders:
            t0 = time.perf_counter()
            try:
                x, r2, stats = _decode_one(d, inst, prep, spec, d2)
            except SparseSDError as exc:
                logger.warning("%s failed on seed %d: %s", d, seed, exc)
                out[d].append(TrialRecord(seed, d, 0, np.zeros(m, np.int64), 0,
                                          math.nan, failed=True))
                continue
            wall = time.perf_counter() - t0
            empty = x is None
            errors = 0 if empty else int(np.count_nonzero(x != x_true))
            out[d].append(TrialRecord(seed, d, errors, stats.nodes_per_level.copy(),
                                      int(stats.flops), r2, wall, empty))
    return out


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    if values.shape[0] == 0:
        return math.nan, math.nan
    if values.shape[0] == 1:
        return float(values[0]), math.nan
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.shape[0]))


def _aggregate(spec, point, label, records):
    m, n, l, snr = point
    ok = [r for r in records if not r.failed]
    decoded = [r for r in ok if not r.empty]
    errors = sum(r.error_count for r in decoded)
    total = len(decoded) * m
    rate = errors / total if total else math.nan
    rate_se = math.sqrt(rate * (1 - rate) / total) if total else math.nan
    flops_mean, flops_se = _mean_se([r.flops for r in ok])
    if ok:
        nodes = np.array([r.nodes_per_level for r in ok], dtype=float)
        nodes_mean = nodes.mean(axis=0)
        nodes_se = (nodes.std(axis=0, ddof=1) / math.sqrt(len(ok))
                    if len(ok) > 1 else np.full(m, math.nan))
    else:
        nodes_mean = nodes_se = np.full(m, math.nan)
    e_c = math.log(flops_mean) / math.log(m) if m > 1 and flops_mean > 0 else math.nan
    return {
        "m": m, "n": n, "l": l, "alphabet": Alphabet.from_name(spec.alphabet).name,
        "snr_db": snr, "decoder": label, "trials": int(spec.trials),
        "completed": len(decoded), "empty_spheres": len(ok) - len(decoded),
        "failures": len(records) - len(ok), "error_rate": rate,
        "error_rate_se": rate_se, "mean_flops": flops_mean, "flops_se": flops_se,
        "e_c": e_c, "mean_nodes": nodes_mean, "nodes_se": nodes_se,
    }


def _point_rows(args):
    spec, point = args
    records = run_trials(spec, point)
    return [_aggregate(spec, point, d, records[d]) for d in spec.decoders]


def _map(fn, items, workers):
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def run_experiment(spec, workers=1):
    """Aggregate every decoder over every grid point.

    Returns a list of rows keyed by :data:`RESULT_HEADER`.  When
    ``spec.output_path`` is set the rows go to that CSV file with a JSON
    manifest next to it.
    """
    points = spec.grid()
    per_point = _map(_point_rows, [(spec, p) for p in points], workers)
    rows = [row for chunk in per_point for row in chunk]
    if spec.output_path:
        write_csv(spec.output_path, RESULT_HEADER, rows)
        write_manifest(manifest_path(spec.output_path), "experiment", spec.to_dict(),
                       spec.seed, [spec.output_path])
    return rows


def run_omp_baseline(spec, workers=1):
    """:func:`run_experiment` with OMP-and-round as the only decoder."""
    return run_experiment(dataclasses.replace(spec, decoders=("omp",)), workers)


def _theory_rows(args):
    spec, point = args
    m, n, l, snr = point
    sigma2 = sigma2_from_snr(snr, m, l, spec.alphabet)
    d2 = _fixed_d2(spec, m, n, l, snr)
    analytic = expected_nodes(m, n, l, sigma2, d2, spec.alphabet)
    records = run_trials(spec, point, decoders=("sparse",))["sparse"]
    nodes = np.array([r.nodes_per_level for r in records if not r.failed], dtype=float)
    emp = nodes.mean(axis=0)
    se = nodes.std(axis=0, ddof=1) / math.sqrt(nodes.shape[0])
    rows = []
    for k in range(1, m + 1):
        diff = emp[k - 1] - analytic[k - 1]
        # node counts are integers, so the mean cannot resolve less than 1/T
        z = diff / max(se[k - 1], 1.0 / nodes.shape[0])
        rows.append({
            "m": m, "n": n, "l": l, "alphabet": Alphabet.from_name(spec.alphabet).name,
            "snr_db": snr, "d2": d2, "k": k, "analytic": float(analytic[k - 1]),
            "empirical": float(emp[k - 1]), "stderr": float(se[k - 1]), "z": float(z),
            "pass": bool(abs(z) <= Z_LIMIT),
        })
    return rows


def compare_theory(spec, workers=1, output_path=None):
    """Per-level closed-form ``E[N_k]`` against fixed-radius simulation.

    Raises
    ------
    ValueError
        If ``spec.fixed_radius`` is off; the closed forms assume one pass at
        a fixed radius.
    """
    if not spec.fixed_radius:
        raise ValueError("compare_theory needs fixed_radius=True")
    points = spec.grid()
    chunks = _map(_theory_rows, [(spec, p) for p in points], workers)
    rows = [row for chunk in chunks for row in chunk]
    if output_path:
        write_csv(output_path, THEORY_HEADER, rows)
        write_manifest(manifest_path(output_path), "compare_theory", spec.to_dict(),
                       spec.seed, [output_path])
    return rows
