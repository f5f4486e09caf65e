import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from sparsesd.exceptions import ExactOverflowError, RankDeficientError
from sparsesd.numerics import MAX_EXACT_INT, binomial, choose_radius, qr_decompose, regularized_gamma


def check_qr(h, tol=1e-10):
    f = qr_decompose(h)
    n, m = h.shape
    assert f.q1.shape == (n, m) and f.q2.shape == (n, n - m) and f.r.shape == (m, m)
    assert np.allclose(f.q1.T @ f.q1, np.eye(m), atol=tol, rtol=0)
    assert np.allclose(f.q2.T @ f.q2, np.eye(n - m), atol=tol, rtol=0)
    assert np.allclose(f.q1.T @ f.q2, 0, atol=tol)
    assert np.allclose(np.triu(f.r), f.r)
    assert np.all(np.diag(f.r) > 0)
    recon = np.hstack([f.q1, f.q2]) @ np.vstack([f.r, np.zeros((n - m, m))])
    assert np.allclose(recon, h, atol=tol * max(1.0, np.abs(h).max()), rtol=0)
    return f


def test_qr_identity():
    f = check_qr(np.eye(3))
    assert np.allclose(f.q1, np.eye(3))
    assert np.allclose(f.r, np.eye(3))
    assert f.q2.shape == (3, 0)


def test_qr_permuted_columns():
    f = check_qr(np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]))
    assert np.allclose(f.r, np.eye(2))


def test_qr_orthogonal_columns():
    f = check_qr(np.array([[2.0, 0.0], [0.0, 0.0], [0.0, 3.0]]))
    assert np.allclose(f.r, np.diag([2.0, 3.0]))


def test_qr_negative_diagonal_is_flipped():
    f = check_qr(np.array([[-1.0, 2.0], [0.0, -3.0]]))
    assert np.allclose(f.r, [[1.0, -2.0], [0.0, 3.0]])


def test_qr_random_matrices():
    rng = np.random.default_rng(7)
    for _ in range(500):
        n = int(rng.integers(2, 65))
        m = int(rng.integers(1, n + 1))
        check_qr(rng.standard_normal((n, m)))


def test_qr_is_deterministic():
    h = np.random.default_rng(1).standard_normal((6, 4))
    a, b = qr_decompose(h), qr_decompose(h.copy())
    assert np.array_equal(a.r, b.r) and np.array_equal(a.q1, b.q1)


def test_qr_rank_deficient():
    h = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(RankDeficientError):
        qr_decompose(h)


def test_qr_rank_verdict_is_scale_free():
    h = np.array([[1.0, 1.0], [0.0, 1e-11], [0.0, 0.0]])
    for scale in (1e-6, 1.0, 1e6):
        with pytest.raises(RankDeficientError):
            qr_decompose(scale * h)
        check_qr(scale * np.array([[1.0, 1.0], [0.0, 1e-3], [0.0, 0.0]]))


def test_qr_needs_tall_matrix():
    with pytest.raises(ValueError):
        qr_decompose(np.ones((2, 3)))


@given(st.integers(1, 8), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_qr_property(m, extra, seed):
    h = np.random.default_rng(seed).standard_normal((m + extra, m))
    check_qr(h)


def test_gamma_examples():
    assert regularized_gamma(2.5, 0.0) == 0.0
    assert regularized_gamma(1.0, 1.0) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert abs(regularized_gamma(1.0, 50.0) - 1.0) <= 1e-12


def test_gamma_shape_one_closed_form():
    for x in np.logspace(-6, math.log10(50), 50):
        assert abs(regularized_gamma(1.0, x) - (-math.expm1(-x))) <= 1e-10


def test_gamma_against_scipy():
    rng = np.random.default_rng(3)
    for _ in range(400):
        a = float(rng.uniform(0.05, 40))
        x = float(rng.uniform(0, 3 * a + 5))
        assert regularized_gamma(a, x) == pytest.approx(special.gammainc(a, x), abs=1e-12)


def test_gamma_bad_arguments():
    with pytest.raises(ValueError):
        regularized_gamma(0.0, 1.0)
    with pytest.raises(ValueError):
        regularized_gamma(1.0, -1.0)


@given(
    st.floats(0.05, 50),
    st.floats(0, 200, allow_nan=False),
    st.floats(0, 200, allow_nan=False),
)
def test_gamma_monotone(a, x1, x2):
    lo, hi = sorted((x1, x2))
    p_lo, p_hi = regularized_gamma(a, lo), regularized_gamma(a, hi)
    assert 0.0 <= p_lo <= p_hi + 1e-15 <= 1.0 + 1e-15


def test_binomial_examples():
    assert binomial(5, 2) == 10
    assert binomial(7, -1) == 0
    assert binomial(3, 4) == 0
    assert binomial(40, 20) == 137846528820


def test_pascal_rule():
    for n in range(1, 41):
        for k in range(-1, n + 2):
            assert binomial(n, k) == binomial(n - 1, k - 1) + binomial(n - 1, k)


def test_binomial_overflow():
    assert binomial(130, 65) <= MAX_EXACT_INT
    with pytest.raises(ExactOverflowError):
        binomial(140, 70)


def test_radius_two_dimensions():
    assert choose_radius(2, 1.0, 0.99) == pytest.approx(-2 * math.log(0.01), rel=1e-9)
    assert choose_radius(2, 4.0, 0.99) == pytest.approx(-8 * math.log(0.01), rel=1e-9)


@given(st.integers(1, 80), st.floats(1e-3, 1e3), st.floats(0.01, 0.999999))
def test_radius_round_trip(n, sigma2, p):
    d2 = choose_radius(n, sigma2, p)
    assert abs(regularized_gamma(n / 2, d2 / (2 * sigma2)) - p) <= 1e-8


def test_radius_bad_arguments():
    for args in ((0, 1.0, 0.9), (2, 0.0, 0.9), (2, 1.0, 1.0), (2, 1.0, 0.0)):
        with pytest.raises(ValueError):
            choose_radius(*args)
