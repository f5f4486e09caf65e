"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line (visible with
``pytest -v -s`` and in the captured log) before asserting.
"""

import math
import time

import numpy as np
import pytest

from oracles import binary_pair_counts, sign_consistent_pairs, ternary_pair_counts
from sparsesd.bound import decode_sparse_lb
from sparsesd.channel import _refit, detect_support, make_channel
from sparsesd.complexity import (
    binary_eta_counts,
    count_binary,
    count_ternary,
    expected_nodes,
    expected_nodes_binary,
    expected_nodes_unaware,
    pair_counts_by_stats,
    ternary_eta,
    total_cost,
    variance_mc,
)
from sparsesd.decoder import brute_force, decode_sparse, decode_sparse_se, prepare
from sparsesd.harness import ExperimentSpec, compare_theory, run_experiment
from sparsesd.model import GenSpec, generate_instance, sigma2_from_snr, trial_seed
from sparsesd.numerics import binomial, choose_radius, qr_decompose, regularized_gamma

pytestmark = pytest.mark.acceptance


def report(capsys, number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    with capsys.disabled():
        print("\n" + line)
    return ok


def combined_se(*ses):
    return math.sqrt(sum(s * s for s in ses))


def test_criterion_01_oracle_exactness(capsys):
    t0 = time.perf_counter()
    checked = mismatches = 0
    for m in range(4, 11):
        for alphabet in ("binary01", "ternary"):
            for l in range(0, m + 1):
                for snr in (0.0, 10.0, 20.0):
                    for i in range(200):
                        seed = trial_seed(1000 * m + 10 * l + int(snr), i)
                        inst, _ = generate_instance(GenSpec(m, m, alphabet, l, snr, seed))
                        prep = prepare(inst)
                        ref = brute_force(inst)
                        for res in (decode_sparse(inst, prep=prep),
                                    decode_sparse_se(inst, prep=prep),
                                    decode_sparse_lb(inst, safe_mode=True, prep=prep)):
                            checked += 1
                            if res.residual2 != ref.residual2 or not np.array_equal(
                                    res.x_hat, ref.x_hat):
                                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 120
    report(capsys, 1, ok, f"{mismatches} mismatches in {checked} decodes, {elapsed:.1f}s")
    assert ok


def test_criterion_02_binary_counting(capsys):
    t0 = time.perf_counter()
    mismatches = 0
    for k in range(0, 9):
        pts, counts = binary_pair_counts(k)
        for t, x_t in enumerate(pts):
            k1 = int(x_t.sum())
            for k2 in range(k + 1):
                for eta in range(k + 1):
                    mismatches += count_binary(k1, k2, k, eta) != counts[t, k2, eta]
    identity = 0
    for k in range(1, 11):
        for l in range(k + 1):
            for k1 in range(k + 1):
                total = sum(sum(binary_eta_counts(k1, k2, k).values())
                            for k2 in range(min(k, l) + 1))
                identity += total != sum(binomial(k, j) for j in range(min(k, l) + 1))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and identity == 0
    report(capsys, 2, ok, f"{mismatches} pair-count and {identity} identity mismatches, "
                          f"{elapsed:.1f}s")
    assert ok


def _p_matrices(k, k1, a):
    import itertools

    rows = {1: a, -1: k1 - a, 0: k - k1}
    opts = {i: [c for c in itertools.product(range(n + 1), repeat=3) if sum(c) == n]
            for i, n in rows.items()}
    for r1 in opts[1]:
        for rm in opts[-1]:
            for r0 in opts[0]:
                yield {(i, j): row[idx] for i, row in ((1, r1), (-1, rm), (0, r0))
                       for idx, j in enumerate((-1, 0, 1))}


def test_criterion_03_ternary_counting(capsys):
    t0 = time.perf_counter()
    mismatches = cases = 0
    for k in range(0, 7):
        pts, counts = ternary_pair_counts(k)
        for t, x_t in enumerate(pts):
            k1 = int(np.count_nonzero(x_t))
            a = int((x_t == 1).sum())
            for k2 in range(k + 1):
                agg = {}
                for p in _p_matrices(k, k1, a):
                    c = count_ternary(k1, k2, k, a, p)
                    if c:
                        agg[ternary_eta(p)] = agg.get(ternary_eta(p), 0) + c
                want = {e: int(c) for e, c in enumerate(counts[t, k2]) if c}
                cases += 1
                mismatches += agg != want
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60
    report(capsys, 3, ok, f"{mismatches} mismatches over {cases} (x_t, k2) cases, "
                          f"{elapsed:.1f}s")
    assert ok


def _theory(m, l, alphabet, snrs, trials):
    spec = ExperimentSpec(m=(m,), l=(l,), snr_db=tuple(snrs), alphabet=alphabet,
                          trials=trials, fixed_radius=True, one_minus_eps=0.99, seed=2024)
    return compare_theory(spec)


def test_criterion_04_theorem_binary(capsys):
    t0 = time.perf_counter()
    rows = _theory(10, 3, "binary01", (5.0, 10.0, 15.0), 1000)
    elapsed = time.perf_counter() - t0
    worst = max(abs(r["z"]) for r in rows)
    ok = all(r["pass"] for r in rows) and len(rows) == 30 and elapsed < 300
    report(capsys, 4, ok, f"max |z| = {worst:.2f} over {len(rows)} levels, {elapsed:.1f}s")
    assert ok


def test_criterion_05_theorem_ternary(capsys):
    t0 = time.perf_counter()
    rows = _theory(8, 2, "ternary", (10.0,), 1000)
    elapsed = time.perf_counter() - t0
    worst = max(abs(r["z"]) for r in rows)
    ok = all(r["pass"] for r in rows) and len(rows) == 8 and elapsed < 300
    report(capsys, 5, ok, f"max |z| = {worst:.2f} over {len(rows)} levels, {elapsed:.1f}s")
    assert ok


def test_criterion_06_dominance_and_limits(capsys):
    m = n = 10
    l = 3
    violations = 0
    for snr in (5.0, 10.0, 15.0):
        sigma2 = sigma2_from_snr(snr, m, l, "binary01")
        d2 = choose_radius(n, sigma2, 0.99)
        for k in range(1, m + 1):
            aware = expected_nodes_binary(m, n, k, l, sigma2, d2)
            unaware = expected_nodes_unaware(m, n, k, l, sigma2, d2)
            violations += unaware < aware
    worst = 0.0
    for snr in (5.0, 10.0, 15.0):
        sigma2 = sigma2_from_snr(snr, m, l, "binary01")
        for k in range(1, m + 1):
            value = expected_nodes_binary(m, n, k, l, sigma2, 1e12 * sigma2)
            exact = sum(binomial(k, j) for j in range(min(k, l) + 1))
            worst = max(worst, abs(value - exact) / exact)
    ok = violations == 0 and worst <= 1e-6
    report(capsys, 6, ok, f"{violations} dominance violations, "
                          f"infinite-radius max rel. error {worst:.1e}")
    assert ok


def test_criterion_07_error_rate_ordering(capsys):
    t0 = time.perf_counter()
    spec = ExperimentSpec(m=(20,), l=(5,), snr_db=(10.0,), trials=500, seed=7,
                          decoders=("sparse", "classical", "omp"))
    rows = {r["decoder"]: r for r in run_experiment(spec)}
    s, c, o = rows["sparse"], rows["classical"], rows["omp"]
    gap_c = c["error_rate"] - s["error_rate"]
    gap_o = o["error_rate"] - s["error_rate"]
    se_c = combined_se(s["error_rate_se"], c["error_rate_se"])
    se_o = combined_se(s["error_rate_se"], o["error_rate_se"])
    elapsed = time.perf_counter() - t0
    ok = gap_c > 2 * se_c and gap_o > 2 * se_o and elapsed < 600
    report(capsys, 7, ok,
           f"error rates sparse {s['error_rate']:.4f}, classical {c['error_rate']:.4f}, "
           f"omp {o['error_rate']:.4f}; gaps {gap_c / se_c:.1f} and {gap_o / se_o:.1f} "
           f"combined SE, {elapsed:.1f}s")
    assert ok


def test_criterion_08_lower_bound_speedup(capsys):
    t0 = time.perf_counter()
    fewer = []
    for snr in (0.0, 5.0, 10.0):
        plain = bounded = 0
        for i in range(100):
            inst, _ = generate_instance(GenSpec(40, 40, "binary01", 5, snr, trial_seed(40, i)))
            prep = prepare(inst)
            plain += decode_sparse(inst, prep=prep).stats.total_nodes
            bounded += decode_sparse_lb(inst, prep=prep).stats.total_nodes
        fewer.append((snr, plain / 100, bounded / 100))
    mismatched = 0
    for snr in (0.0, 5.0, 10.0):
        for i in range(100):
            inst, _ = generate_instance(GenSpec(20, 20, "binary01", 5, snr, trial_seed(20, i)))
            prep = prepare(inst)
            a = decode_sparse(inst, prep=prep)
            b = decode_sparse_lb(inst, prep=prep)
            mismatched += a.residual2 != b.residual2
    elapsed = time.perf_counter() - t0
    ok = all(b < p for _, p, b in fewer) and mismatched == 0 and elapsed < 900
    detail = ", ".join(f"{snr:g} dB {p:.0f}->{b:.0f}" for snr, p, b in fewer)
    report(capsys, 8, ok, f"mean nodes {detail}; {mismatched} residual mismatches at m=20, "
                          f"{elapsed:.1f}s")
    assert ok


def test_criterion_09_variance_machinery(capsys):
    t0 = time.perf_counter()
    mismatches = cases = 0
    for k in range(0, 7):
        for l in range(0, 7):
            s, b = min(k, l), max(k, l)
            for l_prime in range(0, 4):
                cases += 1
                mismatches += pair_counts_by_stats(k, l, l_prime) != dict(
                    sign_consistent_pairs(s, b, l_prime))
    spec = GenSpec(10, 10, "binary01", 3, 10.0, 99)
    a = variance_mc(spec, 2000)
    b = variance_mc(spec, 2000, offset=2000)
    z_var = (a.variance - b.variance) / combined_se(a.stderr, b.stderr)
    pooled = np.mean([a.mean, b.mean])
    pooled_se = combined_se(a.mean_stderr, b.mean_stderr) / 2
    z_mean = (pooled - a.analytic_mean) / pooled_se
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and abs(z_var) <= 3 and abs(z_mean) <= 4 and elapsed < 300
    report(capsys, 9, ok, f"{mismatches}/{cases} pair-count mismatches; split-sample "
                          f"z = {z_var:.2f}; mean-cost z = {z_mean:.2f}, {elapsed:.1f}s")
    assert ok


def test_criterion_10_channel_estimation(capsys):
    t0 = time.perf_counter()
    methods = ("oracle", "sparse_sd", "classical_sd", "omp")
    snrs = (10.0, 15.0, 20.0, 25.0)
    trials = 500
    mse = {(s, m): np.empty(trials) for s in snrs for m in methods}
    flops = {m: 0.0 for m in methods}
    for i in range(trials):
        seed = trial_seed(2010, i)
        for snr in snrs:
            inst = make_channel(20, 6, 3, snr, seed)
            for method in methods:
                support, stats = detect_support(inst, method, 3)
                mse[(snr, method)][i] = _refit(inst, support)[1]
                flops[method] += stats.flops
    failures = []
    summary = []
    for snr in snrs:
        o, s, c, p = (mse[(snr, m)] for m in methods)
        summary.append(f"{snr:g}dB o/s/c/omp {o.mean():.4f}/{s.mean():.4f}/"
                       f"{c.mean():.4f}/{p.mean():.4f}")
        checks = [("oracle<=sparse", s - o), ("sparse<classical", c - s), ("sparse<=omp", p - s)]
        for name, diff in checks:
            se = diff.std(ddof=1) / math.sqrt(trials)
            if diff.mean() < 0:
                failures.append(f"{name} at {snr:g} dB ({diff.mean() / se:+.1f} SE)")
            elif snr >= 15 and name != "oracle<=sparse" and diff.mean() <= 2 * se:
                failures.append(f"{name} gap at {snr:g} dB only {diff.mean() / se:.1f} SE")
    if not flops["sparse_sd"] < flops["classical_sd"]:
        failures.append("sparse flops not below classical")
    elapsed = time.perf_counter() - t0
    if elapsed >= 600:
        failures.append(f"runtime {elapsed:.0f}s")
    ok = not failures
    detail = "; ".join(summary) + f"; flops sparse {flops['sparse_sd'] / trials / 4:.0f} vs " \
        f"classical {flops['classical_sd'] / trials / 4:.0f}"
    if failures:
        detail += "; failed: " + ", ".join(failures)
    report(capsys, 10, ok, detail + f", {elapsed:.1f}s")
    assert ok, failures


def test_criterion_11_numerics(capsys):
    grid = np.logspace(-6, math.log10(50), 50)
    gamma_err = max(abs(regularized_gamma(1.0, x) - (-math.expm1(-x))) for x in grid)
    radius_err = 0.0
    for n in (1, 2, 5, 10, 20, 40, 64):
        for p in (0.5, 0.9, 0.99, 0.999, 0.99999):
            d2 = choose_radius(n, 0.7, p)
            radius_err = max(radius_err, abs(regularized_gamma(n / 2, d2 / 1.4) - p))
    rng = np.random.default_rng(11)
    qr_err = 0.0
    positive = True
    for _ in range(500):
        n = int(rng.integers(2, 65))
        m = int(rng.integers(1, n + 1))
        h = rng.standard_normal((n, m))
        f = qr_decompose(h)
        q = np.hstack([f.q1, f.q2])
        qr_err = max(qr_err, np.abs(q.T @ q - np.eye(n)).max(),
                     np.abs(f.q1 @ f.r - h).max(), np.abs(np.tril(f.r, -1)).max())
        positive &= bool(np.all(np.diag(f.r) > 0))
    ok = gamma_err <= 1e-10 and radius_err <= 1e-8 and qr_err <= 1e-10 and positive
    report(capsys, 11, ok, f"gamma err {gamma_err:.1e}, radius err {radius_err:.1e}, "
                           f"QR err {qr_err:.1e}")
    assert ok
