"""Compiled Householder QR for the small dense systems the decoders see."""

import numpy as np
from numba import njit


@njit(cache=True)
def householder_qr(h):
    """Complete QR ``h = Q [R; 0]`` with ``diag(R) >= 0``.

    Returns ``(q, r)`` with ``q`` of shape (n, n) and ``r`` of shape (m, m).
    """
    n, m = h.shape
    a = h.copy()
    vs = np.zeros((m, n))
    betas = np.zeros(m)
    for k in range(m):
        norm2 = 0.0
        for i in range(k, n):
            norm2 += a[i, k] * a[i, k]
        alpha = np.sqrt(norm2)
        if alpha == 0.0:
            continue
        # reflect a[k:, k] onto -sign(a_kk) * alpha e_k to avoid cancellation
        if a[k, k] > 0:
            alpha = -alpha
        for i in range(k, n):
            vs[k, i] = a[i, k]
        vs[k, k] -= alpha
        vnorm2 = norm2 - a[k, k] * a[k, k] + vs[k, k] * vs[k, k]
        if vnorm2 == 0.0:
            continue
        betas[k] = 2.0 / vnorm2
        for j in range(k, m):
            dot = 0.0
            for i in range(k, n):
                dot += vs[k, i] * a[i, j]
            dot *= betas[k]
            for i in range(k, n):
                a[i, j] -= dot * vs[k, i]
    # accumulate Q = H_0 H_1 ... H_{m-1} applied to the identity
    q = np.eye(n)
    for k in range(m - 1, -1, -1):
        if betas[k] == 0.0:
            continue
        for j in range(n):
            dot = 0.0
            for i in range(k, n):
                dot += vs[k, i] * q[i, j]
            dot *= betas[k]
            for i in range(k, n):
                q[i, j] -= dot * vs[k, i]
    r = np.zeros((m, m))
    for i in range(m):
        sign = -1.0 if a[i, i] < 0 else 1.0
        for j in range(i, m):
            r[i, j] = sign * a[i, j]
        if sign < 0:
            for p in range(n):
                q[p, i] = -q[p, i]
    return q, r
