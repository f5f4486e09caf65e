"""Compiled depth-first tree search shared by every sphere decoder.

Tree level ``t`` (1-based, root ``t = 1``) fixes ``x[m - t]``; all per-level
arrays are indexed by ``t``.  The search works on the reduced problem
``||z - R x||^2 <= budget`` where ``budget = d^2 - ||Q2^T y||^2``.
"""

import numpy as np
from numba import njit

FLOP_BASE = 11
FLOP_SLOPE = 2


@njit(cache=True)
def node_flops(t):
    return FLOP_SLOPE * t + FLOP_BASE


@njit(cache=True)
def _lex_less(a, b):
    for j in range(a.shape[0]):
        if a[j] < b[j]:
            return True
        if a[j] > b[j]:
            return False
    return False


@njit(cache=True)
def omp_kernel(r, p, w, budget, colnorm, basis, res, selected, support, improve_tol):
    """Greedy OMP on the leading ``p x p`` block of upper-triangular ``r``.

    Returns ``(residual2, n_selected, flops)``; the chosen columns are written
    to ``support[:n_selected]`` in selection order.
    """
    r2 = 0.0
    for i in range(p):
        res[i] = w[i]
        r2 += w[i] * w[i]
        selected[i] = False
    flops = 2 * p
    nsel = 0
    steps = budget if budget < p else p
    for _ in range(steps):
        best = -1
        bestval = -1.0
        for j in range(p):
            if selected[j] or colnorm[j] <= 0.0:
                continue
            c = 0.0
            for i in range(j + 1):
                c += r[i, j] * res[i]
            c = abs(c) / colnorm[j]
            if c > bestval:
                bestval = c
                best = j
        flops += p * (p + 1) + p
        if best < 0:
            break
        selected[best] = True
        # orthogonalize the new column against the current basis (two passes)
        for i in range(p):
            basis[i, nsel] = r[i, best] if i <= best else 0.0
        for _pass in range(2):
            for q in range(nsel):
                dot = 0.0
                for i in range(p):
                    dot += basis[i, q] * basis[i, nsel]
                for i in range(p):
                    basis[i, nsel] -= dot * basis[i, q]
        flops += 8 * p * nsel
        nv = 0.0
        for i in range(p):
            nv += basis[i, nsel] * basis[i, nsel]
        nv = np.sqrt(nv)
        if nv <= 1e-12 * colnorm[best]:
            continue
        coef = 0.0
        for i in range(p):
            basis[i, nsel] /= nv
            coef += basis[i, nsel] * res[i]
        new_r2 = 0.0
        for i in range(p):
            res[i] -= coef * basis[i, nsel]
            new_r2 += res[i] * res[i]
        flops += 6 * p
        support[nsel] = best
        nsel += 1
        improvement = r2 - new_r2
        if new_r2 < r2:
            r2 = new_r2
        if improvement < improve_tol:
            break
    return r2, nsel, flops


@njit(cache=True)
def tree_search(
    r,
    z,
    budget,
    symbols,
    l,
    zigzag,
    radius_update,
    use_bound,
    bound_threshold,
    early_cut,
    tie_abs,
    colnorm,
):
    """Sparsity-constrained sphere search.

    Returns ``(found, best_x, best_metric, nodes, flops, leaves, bound_calls,
    bound_prunes)`` where ``best_metric`` is ``||z - R x||^2`` of the winner.
    """
    m = r.shape[0]
    nsym = symbols.shape[0]
    nodes = np.zeros(m, dtype=np.int64)
    best_x = np.zeros(m, dtype=np.int64)
    x = np.zeros(m, dtype=np.int64)
    w = np.zeros((m + 1, m))
    psum = np.zeros(m + 2)
    nnz = np.zeros(m + 2, dtype=np.int64)
    cand = np.zeros((m + 1, nsym), dtype=np.int64)
    ncand = np.zeros(m + 1, dtype=np.int64)
    pos = np.zeros(m + 1, dtype=np.int64)
    zero_only = np.zeros(m + 1, dtype=np.bool_)
    dist = np.zeros(nsym)

    # OMP workspace
    basis = np.zeros((m, m))
    res = np.zeros(m)
    selected = np.zeros(m, dtype=np.bool_)
    support = np.zeros(m, dtype=np.int64)
    wvec = np.zeros(m)

    found = False
    best = np.inf
    flops = 0
    leaves = 0
    bound_calls = 0
    bound_prunes = 0
    total_nodes = 0

    if budget < 0.0:
        return found, best_x, best, nodes, flops, leaves, bound_calls, bound_prunes

    for j in range(m):
        w[0, j] = z[j]

    t = 1
    # set up the root level
    i = m - 1
    rii = r[i, i]
    c = w[0, i]
    room = budget - psum[1]
    nc = 0
    for s_idx in range(nsym):
        e = c - rii * symbols[s_idx]
        if e * e <= room:
            cand[1, nc] = symbols[s_idx]
            dist[nc] = abs(c / rii - symbols[s_idx])
            nc += 1
    if zigzag:
        for a in range(1, nc):
            sv = cand[1, a]
            dv = dist[a]
            b = a - 1
            while b >= 0 and dist[b] > dv:
                cand[1, b + 1] = cand[1, b]
                dist[b + 1] = dist[b]
                b -= 1
            cand[1, b + 1] = sv
            dist[b + 1] = dv
    ncand[1] = nc
    pos[1] = 0
    zero_only[1] = False

    while t >= 1:
        if pos[t] >= ncand[t]:
            t -= 1
            continue
        s = cand[t, pos[t]]
        pos[t] += 1
        i = m - t
        if zero_only[t] and s != 0:
            continue
        nz = nnz[t] + (1 if s != 0 else 0)
        if nz > l:
            if early_cut:
                zero_only[t] = True
            continue
        e = w[t - 1, i] - r[i, i] * s
        ps = psum[t] + e * e
        if ps > budget:
            if zigzag:
                # candidates are sorted by distance; the rest are farther
                pos[t] = ncand[t]
            continue
        if use_bound and i > 0 and total_nodes >= bound_threshold:
            for j in range(i):
                wvec[j] = w[t - 1, j] - r[j, i] * s
            lb, _nsel, of = omp_kernel(
                r, i, wvec, l - nz, colnorm, basis, res, selected, support, 1e-12
            )
            bound_calls += 1
            flops += of
            if lb + ps > budget:
                bound_prunes += 1
                continue
        nodes[t - 1] += 1
        total_nodes += 1
        flops += node_flops(t)
        x[i] = s
        if t == m:
            leaves += 1
            if not found:
                accept = True
            else:
                tol = 1e-10 * best + tie_abs
                if ps < best - tol:
                    accept = True
                elif ps <= best + tol and _lex_less(x, best_x):
                    accept = True
                else:
                    accept = False
            if accept:
                if (not found) or ps < best:
                    best = ps
                found = True
                for j in range(m):
                    best_x[j] = x[j]
                if radius_update:
                    nb = best + 1e-10 * best + tie_abs
                    if nb < budget:
                        budget = nb
            continue
        # descend
        t += 1
        psum[t] = ps
        nnz[t] = nz
        for j in range(i):
            w[t - 1, j] = w[t - 2, j] - r[j, i] * s
        ni = i - 1
        rii = r[ni, ni]
        c = w[t - 1, ni]
        room = budget - ps
        nc = 0
        for s_idx in range(nsym):
            e2 = c - rii * symbols[s_idx]
            if e2 * e2 <= room:
                cand[t, nc] = symbols[s_idx]
                dist[nc] = abs(c / rii - symbols[s_idx])
                nc += 1
        if zigzag:
            for a in range(1, nc):
                sv = cand[t, a]
                dv = dist[a]
                b = a - 1
                while b >= 0 and dist[b] > dv:
                    cand[t, b + 1] = cand[t, b]
                    dist[b + 1] = dist[b]
                    b -= 1
                cand[t, b + 1] = sv
                dist[b + 1] = dv
        ncand[t] = nc
        pos[t] = 0
        zero_only[t] = False

    return found, best_x, best, nodes, flops, leaves, bound_calls, bound_prunes
