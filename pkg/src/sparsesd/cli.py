"""Command-line front end: ``sparsesd {decode,analyze,simulate,channel}``.

Every run writes its outputs plus ``<command>.manifest.json`` into the
output directory (``--out``, else ``$SPARSESD_OUTPUT_DIR``, else
``./results``).  A manifest can be passed back with ``--config`` to repeat
the run.  Exit status: 0 on success, 2 for bad input or configuration,
1 for internal errors.
"""

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from ._version import __version__
from .bound import decode_sparse_lb
from .channel import run_channel_experiment
from .complexity import complexity_report, total_cost, expected_nodes
from .decoder import brute_force, decode_classical, decode_sparse, decode_sparse_se
from .exceptions import RankDeficientError, TooLargeError
from .harness import (
    ExperimentSpec,
    compare_theory,
    fmt,
    omp_decode,
    run_experiment,
    write_csv,
    write_manifest,
)
from .model import Alphabet, GenSpec, IlsInstance, generate_instance, sigma2_from_snr

__all__ = ["main", "build_parser", "parse_grid", "read_instance", "UsageError"]

logger = logging.getLogger("sparsesd")

ENV_OUTPUT_DIR = "SPARSESD_OUTPUT_DIR"
DECODE_CHOICES = ("sparse", "sparse_se", "sparse_lb", "classical", "brute", "omp")

ANALYZE_HEADER = (
    "m", "n", "k", "l", "alphabet", "snr_db", "d2", "e_nk", "C", "e_c",
    "e_nk_unaware", "C_unaware", "e_c_unaware",
)


class UsageError(Exception):
    """Bad user input; reported with exit status 2."""


# ------------------------------------------------------------------ parsing


def parse_grid(text, kind=float):
    """``"0:25:5"`` -> 0, 5, ..., 25 (inclusive); ``"1,2,4"`` -> list; ``"3"`` -> [3]."""
    if isinstance(text, (list, tuple)):
        return [kind(v) for v in text]
    if isinstance(text, (int, float)):
        return [kind(text)]
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                raise ValueError
            start, stop, step = parts
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [kind(start + i * step) for i in range(count)]
        return [kind(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"bad grid {text!r}; use start:stop:step or a comma list") from None


def read_instance(path):
    """Parse the plain-text instance format.

    Line 1 holds ``n m``; the next ``n`` lines hold the rows of ``H``; then
    ``n`` numbers for ``y`` (any line breaks); then ``alphabet l sigma2``.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise UsageError(f"cannot read instance file: {exc}") from None
    if not lines:
        raise UsageError("instance file is empty; expected 'n m' on line 1")

    def numbers(tokens, what):
        try:
            return [float(t) for t in tokens]
        except ValueError:
            raise UsageError(f"{what}: not a number in {' '.join(tokens)!r}") from None

    head = lines[0]
    if len(head) != 2 or not all(t.isdigit() for t in head):
        raise UsageError(f"field 'n m' (line 1): expected two integers, got {' '.join(head)!r}")
    n, m = int(head[0]), int(head[1])
    if n < 1 or m < 1:
        raise UsageError("field 'n m': dimensions must be positive")
    if len(lines) < 1 + n + 1:
        raise UsageError(f"field 'H': expected {n} rows, file has {len(lines) - 1} more lines")
    rows = []
    for i in range(n):
        row = numbers(lines[1 + i], f"field 'H' row {i + 1}")
        if len(row) != m:
            raise UsageError(f"field 'H' row {i + 1}: expected {m} values, got {len(row)}")
        rows.append(row)
    rest = lines[1 + n:]
    if not rest:
        raise UsageError("field 'y': missing")
    tail = rest[-1]
    y_tokens = [t for ln in rest[:-1] for t in ln]
    y = numbers(y_tokens, "field 'y'")
    if len(y) != n:
        raise UsageError(f"field 'y': expected {n} values, got {len(y)}")
    if len(tail) != 3:
        raise UsageError(f"field 'alphabet l sigma2': expected 3 tokens, got {' '.join(tail)!r}")
    try:
        alphabet = Alphabet.from_name(tail[0])
    except ValueError as exc:
        raise UsageError(f"field 'alphabet': {exc}") from None
    try:
        l = int(tail[1])
    except ValueError:
        raise UsageError(f"field 'l': not an integer: {tail[1]!r}") from None
    sigma2 = numbers([tail[2]], "field 'sigma2'")[0]
    try:
        return IlsInstance(np.array(rows), np.array(y), alphabet, l, sigma2)
    except ValueError as exc:
        raise UsageError(f"invalid instance: {exc}") from None


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    # a run manifest nests the parameters under "config"
    if "kind" in doc and isinstance(doc.get("config"), dict):
        doc = dict(doc["config"])
    return {k.replace("-", "_"): v for k, v in doc.items()}


def _resolve(args, defaults):
    """Merge: explicit flags > config file > built-in defaults."""
    config = _load_config(args.config)
    unknown = set(config) - set(defaults) - {"command"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None:
            value = config.get(key, default)
        out[key] = value
    return out


def _out_dir(value):
    path = value or os.environ.get(ENV_OUTPUT_DIR) or "results"
    os.makedirs(path, exist_ok=True)
    return path


# ----------------------------------------------------------------- commands


DECODE_DEFAULTS = dict(
    input=None, m=8, n=None, l=2, alphabet="binary01", snr=math.inf, seed=0,
    decoder="sparse", safe_mode=False, one_minus_eps=0.99, bound_threshold=64, out=None,
)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        # JSON has no inf/nan; write them as strings
        return v if math.isfinite(v) else fmt(v)
    return v


def cmd_decode(args):
    cfg = _resolve(args, DECODE_DEFAULTS)
    if cfg["decoder"] not in DECODE_CHOICES:
        raise UsageError(f"unknown decoder {cfg['decoder']!r}")
    x_true = None
    if cfg["input"]:
        inst = read_instance(cfg["input"])
    else:
        m = int(cfg["m"])
        n = int(cfg["n"]) if cfg["n"] is not None else m
        try:
            spec = GenSpec(m, n, cfg["alphabet"], int(cfg["l"]), float(cfg["snr"]),
                           int(cfg["seed"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        inst, x_true = generate_instance(spec)
    eps = float(cfg["one_minus_eps"])
    name = cfg["decoder"]
    if name == "omp":
        x, r2, stats = omp_decode(inst)
        mode = "omp"
    else:
        if name == "sparse":
            res = decode_sparse(inst, eps)
        elif name == "sparse_se":
            res = decode_sparse_se(inst, eps)
        elif name == "sparse_lb":
            res = decode_sparse_lb(inst, eps, bool(cfg["safe_mode"]),
                                   bound_threshold=int(cfg["bound_threshold"]))
        elif name == "classical":
            res = decode_classical(inst, eps)
        else:
            res = brute_force(inst)
        x, r2, stats, mode = res.x_hat, res.residual2, res.stats, res.mode
    doc = {
        "x_hat": _jsonable(x),
        "residual2": _jsonable(r2),
        "mode": mode,
        "decoder": name,
        "stats": {
            "nodes_per_level": _jsonable(stats.nodes_per_level),
            "total_nodes": stats.total_nodes,
            "flops": int(stats.flops),
            "radius_restarts": int(stats.radius_restarts),
            "solutions_examined": int(stats.solutions_examined),
            "bound_calls": int(stats.bound_calls),
            "bound_prunes": int(stats.bound_prunes),
        },
    }
    if x_true is not None:
        doc["x_true"] = _jsonable(x_true)
    out = _out_dir(cfg["out"])
    path = os.path.join(out, "decode.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    _manifest(out, "decode", cfg, [path])
    print(path)
    return 0


ANALYZE_DEFAULTS = dict(
    m=20, n=None, l="5", alphabet="binary01,ternary", snr="0:20:5", one_minus_eps=0.99,
    infinite_radius=False, seed=0, out=None,
)


def cmd_analyze(args):
    cfg = _resolve(args, ANALYZE_DEFAULTS)
    m = int(cfg["m"])
    n = int(cfg["n"]) if cfg["n"] is not None else m
    alphabets = cfg["alphabet"]
    if isinstance(alphabets, str):
        alphabets = [a for a in alphabets.split(";") if a] if ";" in alphabets else \
            _split_alphabets(alphabets)
    rows = []
    for alpha in alphabets:
        for l in parse_grid(cfg["l"], int):
            for snr in parse_grid(cfg["snr"]):
                try:
                    sigma2 = sigma2_from_snr(snr, m, l, alpha)
                    d2 = 1e12 * (sigma2 or 1.0) if cfg["infinite_radius"] else None
                    rep = complexity_report(m, n, l, alpha, snr, d2=d2,
                                            one_minus_eps=float(cfg["one_minus_eps"]))
                    una = expected_nodes(m, n, l, sigma2, rep.d2, alpha, sparse=False)
                except ValueError as exc:
                    raise UsageError(str(exc)) from None
                c_u, e_u = total_cost(una)
                for k in range(1, m + 1):
                    rows.append({
                        "m": m, "n": n, "k": k, "l": l, "alphabet": rep.alphabet,
                        "snr_db": float(snr), "d2": rep.d2, "e_nk": rep.e_nk[k - 1],
                        "C": rep.total_cost, "e_c": rep.exponent,
                        "e_nk_unaware": una[k - 1], "C_unaware": c_u, "e_c_unaware": e_u,
                    })
    out = _out_dir(cfg["out"])
    path = os.path.join(out, "analyze.csv")
    write_csv(path, ANALYZE_HEADER, rows)
    _manifest(out, "analyze", cfg, [path])
    print(path)
    return 0


def _split_alphabets(text):
    # "binary01,ternary" lists names; "-1,0,1" is a single custom alphabet
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if all(_is_int(p) for p in parts):
        return [text]
    return parts


def _is_int(s):
    try:
        int(s)
        return True
    except ValueError:
        return False


SIMULATE_DEFAULTS = dict(
    m="10", n=None, l="3", alphabet="binary01", snr="10", decoders="sparse,classical",
    trials=100, fixed_radius=False, compare_theory=False, one_minus_eps=0.99, seed=0,
    bound_threshold=64, safe_mode=False, workers=None, out=None,
)


def cmd_simulate(args):
    cfg = _resolve(args, SIMULATE_DEFAULTS)
    decoders = cfg["decoders"]
    if isinstance(decoders, str):
        decoders = [d.strip() for d in decoders.split(",") if d.strip()]
    out = _out_dir(cfg["out"])
    fixed = bool(cfg["fixed_radius"]) or bool(cfg["compare_theory"])
    try:
        spec = ExperimentSpec(
            m=tuple(parse_grid(cfg["m"], int)),
            n=None if cfg["n"] is None else tuple(parse_grid(cfg["n"], int)),
            l=tuple(parse_grid(cfg["l"], int)),
            snr_db=tuple(parse_grid(cfg["snr"])),
            alphabet=cfg["alphabet"], decoders=tuple(decoders),
            trials=int(cfg["trials"]), fixed_radius=fixed,
            one_minus_eps=float(cfg["one_minus_eps"]), seed=int(cfg["seed"]),
            bound_threshold=int(cfg["bound_threshold"]), safe_mode=bool(cfg["safe_mode"]),
            output_path=os.path.join(out, "simulate.csv"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    workers = _workers(cfg["workers"])
    run_experiment(spec, workers)
    outputs = [spec.output_path]
    if cfg["compare_theory"]:
        theory = os.path.join(out, "theory.csv")
        rows = compare_theory(spec, workers, output_path=theory)
        outputs.append(theory)
        failed = [r for r in rows if not r["pass"]]
        print(f"theory check: {len(rows) - len(failed)}/{len(rows)} levels within |z| <= 4")
    _manifest(out, "simulate", cfg, outputs)
    for p in outputs:
        print(p)
    return 0


CHANNEL_DEFAULTS = dict(
    L=20, M=6, m_sharp=3, snr="10:25:5", trials=500, seed=0,
    methods="oracle,sparse_sd,classical_sd,omp", workers=None, out=None,
)


def cmd_channel(args):
    cfg = _resolve(args, CHANNEL_DEFAULTS)
    methods = cfg["methods"]
    if isinstance(methods, str):
        methods = [s.strip() for s in methods.split(",") if s.strip()]
    out = _out_dir(cfg["out"])
    path = os.path.join(out, "channel.csv")
    try:
        run_channel_experiment(
            int(cfg["L"]), int(cfg["M"]), int(cfg["m_sharp"]), parse_grid(cfg["snr"]),
            int(cfg["trials"]), int(cfg["seed"]), methods=tuple(methods),
            output_path=path, workers=_workers(cfg["workers"]),
        )
    except (ValueError, RankDeficientError) as exc:
        raise UsageError(str(exc)) from None
    _manifest(out, "channel", cfg, [path])
    print(path)
    return 0


def _workers(value):
    if value is None:
        return os.cpu_count() or 1
    value = int(value)
    if value < 1:
        raise UsageError("--workers must be >= 1")
    return value


def _manifest(out, command, cfg, outputs):
    config = {k: _jsonable(v) for k, v in cfg.items() if k not in ("out", "workers")}
    return write_manifest(os.path.join(out, f"{command}.manifest.json"), command,
                          config, int(cfg.get("seed") or 0), outputs)


# ------------------------------------------------------------------- parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sparsesd", description="Sparsity-aware sphere decoding toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of parameters (or a run manifest)")
        p.add_argument("--out", help=f"output directory (default ${ENV_OUTPUT_DIR} or ./results)")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("decode", help="solve one instance")
    common(p)
    p.add_argument("--input", help="plain-text instance file")
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--alphabet")
    p.add_argument("--snr", type=float, help="SNR in dB (inf for noiseless)")
    p.add_argument("--decoder", choices=DECODE_CHOICES)
    p.add_argument("--safe-mode", dest="safe_mode", action="store_true", default=None)
    p.add_argument("--one-minus-eps", dest="one_minus_eps", type=float)
    p.add_argument("--bound-threshold", dest="bound_threshold", type=int)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("analyze", help="closed-form expected complexity")
    common(p)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--l", help="sparsity grid, e.g. 5 or 2,5 or 1:5:1")
    p.add_argument("--alphabet", help="comma list of alphabet names")
    p.add_argument("--snr", help="SNR grid in dB, e.g. 0:20:5")
    p.add_argument("--one-minus-eps", dest="one_minus_eps", type=float)
    p.add_argument("--infinite-radius", dest="infinite_radius", action="store_true",
                   default=None, help="use d2 = 1e12 sigma2 (the unbounded-sphere limit)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo experiment")
    common(p)
    p.add_argument("--m")
    p.add_argument("--n")
    p.add_argument("--l")
    p.add_argument("--alphabet")
    p.add_argument("--snr")
    p.add_argument("--decoders", help="comma list: sparse,sparse_se,sparse_lb,classical,"
                                      "classical_se,omp,brute")
    p.add_argument("--trials", type=int)
    p.add_argument("--fixed-radius", dest="fixed_radius", action="store_true", default=None)
    p.add_argument("--compare-theory", dest="compare_theory", action="store_true",
                   default=None)
    p.add_argument("--one-minus-eps", dest="one_minus_eps", type=float)
    p.add_argument("--bound-threshold", dest="bound_threshold", type=int)
    p.add_argument("--safe-mode", dest="safe_mode", action="store_true", default=None)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("channel", help="sparse channel estimation experiment")
    common(p)
    p.add_argument("--L", type=int, help="channel length")
    p.add_argument("--M", type=int, help="training length")
    p.add_argument("--m-sharp", dest="m_sharp", type=int, help="number of nonzero taps")
    p.add_argument("--snr")
    p.add_argument("--trials", type=int)
    p.add_argument("--methods")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_channel)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, TooLargeError, RankDeficientError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
