"""Slow but transparent reference implementations used only by the tests.

None of these call into the package, so agreement with them is evidence
the fast paths are right, not just self-consistent.
"""

import itertools
import math

import numpy as np


# -- eigenvalues -----------------------------------------------------------


def jacobi_eigh(A, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi rotations. Returns eigenvalues (descending) and vectors."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(max_sweeps):
        off = math.sqrt(max(float((A ** 2).sum() - (np.diag(A) ** 2).sum()), 0.0))
        if off <= tol * max(1.0, float(np.abs(A).max())):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                V = V @ J
    lam = np.diag(A).copy()
    order = np.argsort(-lam)
    return lam[order], V[:, order]


def tridiagonalize(A):
    """Householder reduction to tridiagonal form; returns (diag, offdiag)."""
    T = np.array(A, dtype=float)
    n = T.shape[0]
    for k in range(n - 2):
        x = T[k + 1:, k].copy()
        alpha = -math.copysign(np.linalg.norm(x), x[0] if x[0] != 0 else 1.0)
        v = x.copy()
        v[0] -= alpha
        nv = np.linalg.norm(v)
        if nv < 1e-300:
            continue
        v /= nv
        H = np.eye(n)
        H[k + 1:, k + 1:] -= 2.0 * np.outer(v, v)
        T = H @ T @ H
    return np.diag(T).copy(), np.diag(T, 1).copy()


def _sturm_count(d, e, x):
    """Number of eigenvalues of the tridiagonal matrix strictly less than x."""
    count = 0
    q = d[0] - x
    if q < 0:
        count += 1
    for i in range(1, d.shape[0]):
        if q == 0:
            q = 1e-300
        q = d[i] - x - e[i - 1] ** 2 / q
        if q < 0:
            count += 1
    return count


def bisection_eigvals(A, tol=1e-13):
    """All eigenvalues (descending) by Sturm-sequence bisection."""
    d, e = tridiagonalize(A)
    n = d.shape[0]
    radius = np.abs(d) + np.concatenate([[0.0], np.abs(e)]) + np.concatenate([np.abs(e), [0.0]])
    lo0, hi0 = float((d - radius).min()) - 1.0, float((d + radius).max()) + 1.0
    out = []
    for k in range(n):
        lo, hi = lo0, hi0
        while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
            mid = 0.5 * (lo + hi)
            if _sturm_count(d, e, mid) > k:
                hi = mid
            else:
                lo = mid
        out.append(0.5 * (lo + hi))
    return np.sort(np.array(out))[::-1]


def principal_angle(U, V):
    """Largest principal angle between the column spans of U and V."""
    Qu, _ = np.linalg.qr(U)
    Qv, _ = np.linalg.qr(V)
    s = np.linalg.svd(Qu.T @ Qv, compute_uv=False)
    return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


# -- clustering ------------------------------------------------------------


def kmeans_global_optimum(X, K):
    """Smallest within-cluster sum of squares over every assignment of points."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    best = math.inf
    assignments = np.array(list(itertools.product(range(K), repeat=n)), dtype=np.int64)
    for chunk in np.array_split(assignments, max(1, assignments.shape[0] // 20000)):
        total = np.zeros(chunk.shape[0])
        for k in range(K):
            mask = chunk == k
            cnt = mask.sum(1)
            s = mask @ X
            sq = mask @ (X ** 2).sum(1)
            with np.errstate(invalid="ignore", divide="ignore"):
                total += np.where(cnt > 0, sq - (s ** 2).sum(1) / np.maximum(cnt, 1), 0.0)
        best = min(best, float(total.min()))
    return best


# -- metrics ---------------------------------------------------------------


def one_hot(labels, K):
    labels = np.asarray(labels)
    M = np.zeros((labels.shape[0], K))
    M[np.arange(labels.shape[0]), labels] = 1.0
    return M


def l1_by_permutation_matrices(est, true, K):
    """Minimum over permutation matrices J of sum_k ||(Theta_est J)_Gk - Theta_Gk||_0 / (2 n_k)."""
    Te, Tt = one_hot(est, K), one_hot(true, K)
    true = np.asarray(true)
    best = math.inf
    for perm in itertools.permutations(range(K)):
        J = np.eye(K)[list(perm)]
        D = Te @ J - Tt
        val = 0.0
        for k in range(K):
            rows = true == k
            val += np.count_nonzero(D[rows]) / (2.0 * rows.sum())
        best = min(best, val)
    return best


def pair_counts(a, b):
    """(same-same, same-diff, diff-same, diff-diff) counts over all pairs i<j."""
    ss = sd = ds = dd = 0
    n = len(a)
    for i in range(n):
        for j in range(i + 1, n):
            sa, sb = a[i] == a[j], b[i] == b[j]
            if sa and sb:
                ss += 1
            elif sa:
                sd += 1
            elif sb:
                ds += 1
            else:
                dd += 1
    return ss, sd, ds, dd


def pair_f1(a, b):
    ss, sd, ds, _ = pair_counts(a, b)
    if ss == 0:
        return 0.0
    precision, recall = ss / (ss + sd), ss / (ss + ds)
    return 2 * precision * recall / (precision + recall)


def pair_ari(a, b):
    ss, sd, ds, dd = pair_counts(a, b)
    num = 2.0 * (ss * dd - sd * ds)
    den = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd)
    return num / den


def nmi_arithmetic(a, b):
    a, b = list(a), list(b)
    n = len(a)
    pa = {x: a.count(x) / n for x in set(a)}
    pb = {y: b.count(y) / n for y in set(b)}
    joint = {}
    for x, y in zip(a, b):
        joint[(x, y)] = joint.get((x, y), 0) + 1 / n
    mi = sum(p * math.log(p / (pa[x] * pb[y])) for (x, y), p in joint.items())
    ha = -sum(p * math.log(p) for p in pa.values())
    hb = -sum(p * math.log(p) for p in pb.values())
    return mi / ((ha + hb) / 2)
