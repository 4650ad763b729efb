"""Hot numeric kernels: numba-jitted loops with pure-numpy fallbacks.

The jitted path is used when numba is importable and the environment
variable VMAP_NUMBA is unset or truthy; setting VMAP_NUMBA=0 selects the
numpy implementations instead.  Both variants of every kernel are kept
importable (``*_numba`` / ``*_numpy``) so they can be cross-checked and
benchmarked against each other; see benchmarks/bench_kernels.py.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def _numba_enabled() -> bool:
    flag = os.environ.get("VMAP_NUMBA", "1").strip().lower()
    return HAVE_NUMBA and flag not in ("0", "false", "off", "no")


USE_NUMBA = _numba_enabled()


# ---------------------------------------------------------------------------
# linear Shepard interpolation
# ---------------------------------------------------------------------------

def lsp_predict_numpy(nodes, values, betas, u, dmax, queries):
    """Blend node-centered local linear fits with hinge inverse-distance weights.

    Returns (predictions, fallback) where fallback marks queries outside
    every node's weight ball (answered by the nearest node's local fit).
    """
    diff = queries[:, None, :] - nodes[None, :, :]
    dist = np.sqrt(np.einsum("qnk,qnk->qn", diff, diff))
    local = values[None, :] + np.einsum("qnk,nk->qn", diff, betas)

    # distances below the exact-hit threshold are overridden afterwards, so
    # clamping them keeps the weights finite without changing any result
    hit_eps = 1e-12 * dmax
    w = np.square(np.maximum(1.0 / np.maximum(dist, hit_eps) - 1.0 / u[None, :], 0.0))
    nearest = np.argmin(dist, axis=1)
    rows = np.arange(queries.shape[0])

    den = w.sum(axis=1)
    fallback = den == 0.0
    safe_den = np.where(fallback, 1.0, den)
    preds = np.where(fallback, local[rows, nearest], (w * local).sum(axis=1) / safe_den)

    # a query sitting on a node short-circuits to that node's own fit
    hit = dist[rows, nearest] <= hit_eps
    preds[hit] = local[rows[hit], nearest[hit]]
    fallback[hit] = False
    return preds, fallback


@njit(cache=True, nogil=True)
def lsp_predict_numba(nodes, values, betas, u, dmax, queries):
    n, p = nodes.shape
    q = queries.shape[0]
    preds = np.empty(q)
    fallback = np.zeros(q, dtype=np.bool_)
    dist = np.empty(n)
    hit_eps = 1e-12 * dmax

    for a in range(q):
        nearest = 0
        dmin = 1e300
        for i in range(n):
            s = 0.0
            for k in range(p):
                d = queries[a, k] - nodes[i, k]
                s += d * d
            di = math.sqrt(s)
            dist[i] = di
            if di < dmin:
                dmin = di
                nearest = i

        if dmin <= hit_eps:
            acc = values[nearest]
            for k in range(p):
                acc += betas[nearest, k] * (queries[a, k] - nodes[nearest, k])
            preds[a] = acc
            continue

        num = 0.0
        den = 0.0
        for i in range(n):
            wi = 1.0 / dist[i] - 1.0 / u[i]
            if wi <= 0.0:
                continue
            wi = wi * wi
            pi = values[i]
            for k in range(p):
                pi += betas[i, k] * (queries[a, k] - nodes[i, k])
            num += wi * pi
            den += wi
        if den > 0.0:
            preds[a] = num / den
        else:
            acc = values[nearest]
            for k in range(p):
                acc += betas[nearest, k] * (queries[a, k] - nodes[nearest, k])
            preds[a] = acc
            fallback[a] = True
    return preds, fallback


def lsp_local_betas_numpy(nodes, values, v):
    """Per-node local linear coefficients from hinge-weighted least squares."""
    n, p = nodes.shape
    betas = np.zeros((n, p))
    diff_all = nodes[:, None, :] - nodes[None, :, :]
    dist_all = np.sqrt(np.einsum("ijk,ijk->ij", diff_all, diff_all))
    for i in range(n):
        d = dist_all[i]
        mask = (d > 0.0) & (d < v[i])
        if not mask.any():
            continue
        w = np.square(1.0 / d[mask] - 1.0 / v[i])
        sw = np.sqrt(w)
        a = (nodes[mask] - nodes[i]) * sw[:, None]
        b = (values[mask] - values[i]) * sw
        betas[i] = np.linalg.lstsq(a, b, rcond=None)[0]
    return betas


@njit(cache=True, nogil=True)
def lsp_local_betas_numba(nodes, values, v):
    n, p = nodes.shape
    betas = np.zeros((n, p))
    d = np.empty(n)
    for i in range(n):
        cnt = 0
        for j in range(n):
            s = 0.0
            for k in range(p):
                t = nodes[j, k] - nodes[i, k]
                s += t * t
            d[j] = math.sqrt(s)
            if 0.0 < d[j] < v[i]:
                cnt += 1
        if cnt == 0:
            continue
        a = np.empty((cnt, p))
        b = np.empty(cnt)
        r = 0
        for j in range(n):
            if 0.0 < d[j] < v[i]:
                sw = math.sqrt((1.0 / d[j] - 1.0 / v[i]) ** 2)
                for k in range(p):
                    a[r, k] = sw * (nodes[j, k] - nodes[i, k])
                b[r] = sw * (values[j] - values[i])
                r += 1
        sol = np.linalg.lstsq(a, b, rcond=-1.0)
        betas[i, :] = sol[0]
    return betas


# ---------------------------------------------------------------------------
# categorical Gaussian process correlation
# ---------------------------------------------------------------------------

def cgp_corr_numpy(x1, za1, zb1, x2, za2, zb2, theta, tau_a, tau_b):
    """Squared-exponential correlation times per-category cross factors."""
    diff = x1[:, None, :] - x2[None, :, :]
    expo = np.einsum("ijk,k->ij", diff * diff, theta)
    return np.exp(-expo) * tau_a[za1[:, None], za2[None, :]] * tau_b[zb1[:, None], zb2[None, :]]


@njit(cache=True, nogil=True)
def cgp_corr_numba(x1, za1, zb1, x2, za2, zb2, theta, tau_a, tau_b):
    n1, p = x1.shape
    n2 = x2.shape[0]
    out = np.empty((n1, n2))
    for i in range(n1):
        for j in range(n2):
            s = 0.0
            for k in range(p):
                d = x1[i, k] - x2[j, k]
                s += theta[k] * d * d
            out[i, j] = math.exp(-s) * tau_a[za1[i], za2[j]] * tau_b[zb1[i], zb2[j]]
    return out


# ---------------------------------------------------------------------------
# adaptive-spline forward scan
# ---------------------------------------------------------------------------
#
# Given a current basis matrix B with Cholesky factor L of B'B (+ridge) and
# the current residual, score every candidate hinge pair
# parent * (x_j - t)_+ / parent * (t - x_j)_+ by the exact least-squares
# improvement obtained from the 2x2 Schur complement, and return the best
# (pair index, knot, improvement).

_RANK_EPS = 1e-9


def _schur_improvement(s11, s12, s22, r1, r2, cap):
    s11 = max(s11, 0.0)
    s22 = max(s22, 0.0)
    tol = _RANK_EPS * (s11 + s22)
    det = s11 * s22 - s12 * s12
    if det > tol * max(s11, s22) and tol > 0.0:
        b1 = (s22 * r1 - s12 * r2) / det
        b2 = (s11 * r2 - s12 * r1) / det
        dec = b1 * r1 + b2 * r2
    else:
        dec = 0.0
        if s11 > tol:
            dec = r1 * r1 / s11
        if s22 > tol:
            dec = max(dec, r2 * r2 / s22)
    return min(dec, cap)


def mars_scan_numpy(basis, chol, resid, x, pair_parent, pair_var, knots, knot_off, rss):
    best_dec = 0.0
    best_pair = -1
    best_knot = 0.0
    for k in range(pair_parent.shape[0]):
        lo, hi = knot_off[k], knot_off[k + 1]
        if lo == hi:
            continue
        t = knots[lo:hi]
        pc = basis[:, pair_parent[k]]
        d = x[:, pair_var[k]][:, None] - t[None, :]
        c1 = pc[:, None] * np.maximum(d, 0.0)
        c2 = pc[:, None] * np.maximum(-d, 0.0)
        w1 = np.linalg.solve(chol, basis.T @ c1)
        w2 = np.linalg.solve(chol, basis.T @ c2)
        s11 = np.einsum("ij,ij->j", c1, c1) - np.einsum("ij,ij->j", w1, w1)
        s22 = np.einsum("ij,ij->j", c2, c2) - np.einsum("ij,ij->j", w2, w2)
        s12 = np.einsum("ij,ij->j", c1, c2) - np.einsum("ij,ij->j", w1, w2)
        r1 = c1.T @ resid
        r2 = c2.T @ resid
        for q in range(t.shape[0]):
            dec = _schur_improvement(s11[q], s12[q], s22[q], r1[q], r2[q], rss)
            if dec > best_dec:
                best_dec = dec
                best_pair = k
                best_knot = t[q]
    return best_pair, best_knot, best_dec


@njit(cache=True, nogil=True)
def mars_scan_numba(basis, chol, resid, x, pair_parent, pair_var, knots, knot_off, rss):
    n, m = basis.shape
    best_dec = 0.0
    best_pair = -1
    best_knot = 0.0
    c1 = np.empty(n)
    c2 = np.empty(n)
    a1 = np.empty(m)
    a2 = np.empty(m)
    w1 = np.empty(m)
    w2 = np.empty(m)
    for k in range(pair_parent.shape[0]):
        pc = pair_parent[k]
        j = pair_var[k]
        for q in range(knot_off[k], knot_off[k + 1]):
            t = knots[q]
            c11 = 0.0
            c22 = 0.0
            c12 = 0.0
            r1 = 0.0
            r2 = 0.0
            for col in range(m):
                a1[col] = 0.0
                a2[col] = 0.0
            for i in range(n):
                b = basis[i, pc]
                d = x[i, j] - t
                if d > 0.0:
                    h1 = b * d
                    h2 = 0.0
                else:
                    h1 = 0.0
                    h2 = -b * d
                c1[i] = h1
                c2[i] = h2
                c11 += h1 * h1
                c22 += h2 * h2
                c12 += h1 * h2
                r1 += h1 * resid[i]
                r2 += h2 * resid[i]
                for col in range(m):
                    a1[col] += basis[i, col] * h1
                    a2[col] += basis[i, col] * h2
            # forward substitution against the cached Cholesky factor
            for row in range(m):
                acc1 = a1[row]
                acc2 = a2[row]
                for col in range(row):
                    acc1 -= chol[row, col] * w1[col]
                    acc2 -= chol[row, col] * w2[col]
                w1[row] = acc1 / chol[row, row]
                w2[row] = acc2 / chol[row, row]
            s11 = c11
            s22 = c22
            s12 = c12
            for row in range(m):
                s11 -= w1[row] * w1[row]
                s22 -= w2[row] * w2[row]
                s12 -= w1[row] * w2[row]

            if s11 < 0.0:
                s11 = 0.0
            if s22 < 0.0:
                s22 = 0.0
            tol = _RANK_EPS * (s11 + s22)
            det = s11 * s22 - s12 * s12
            smax = s11 if s11 > s22 else s22
            if det > tol * smax and tol > 0.0:
                b1 = (s22 * r1 - s12 * r2) / det
                b2 = (s11 * r2 - s12 * r1) / det
                dec = b1 * r1 + b2 * r2
            else:
                dec = 0.0
                if s11 > tol:
                    dec = r1 * r1 / s11
                if s22 > tol:
                    alt = r2 * r2 / s22
                    if alt > dec:
                        dec = alt
            if dec > rss:
                dec = rss
            if dec > best_dec:
                best_dec = dec
                best_pair = k
                best_knot = t
    return best_pair, best_knot, best_dec


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if USE_NUMBA:
    lsp_predict = lsp_predict_numba
    lsp_local_betas = lsp_local_betas_numba
    cgp_corr = cgp_corr_numba
    mars_scan = mars_scan_numba
else:
    lsp_predict = lsp_predict_numpy
    lsp_local_betas = lsp_local_betas_numpy
    cgp_corr = cgp_corr_numpy
    mars_scan = mars_scan_numpy
