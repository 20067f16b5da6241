"""
Evaluation: misclassification rate, plug-in link-matrix estimates, spectral
deviation, pair-counting agreement scores and the per-replication report.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import LinearOperator

from ._base import EigenBasis, as_generator
from .graph import DenseSymMatrix, SparseSymGraph, as_operator, operator_norm, residual_operator
from .linalg import RandomizedEig

__all__ = [
    "L1Result",
    "misclassification_l1",
    "mismatch_costs",
    "estimate_B",
    "b_error",
    "pair_metrics",
    "deviation_norm",
    "ExperimentReport",
    "ROW_COLUMNS",
    "TIME_COLUMNS",
]

BRUTE_FORCE_MAX_K = 8


def _labels(x, K, name):
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.issubdtype(x.dtype, np.integer):
        if not np.all(np.equal(np.mod(x, 1), 0)):
            raise ValueError(f"{name} must hold integer labels")
        x = x.astype(np.int64)
    if x.size and (x.min() < 0 or x.max() >= K):
        raise ValueError(f"{name} has a label outside [0, {K})")
    return x


def mismatch_costs(est_labels, true_labels, K):
    """Integer counts ``miss[k, l] = #{i in true community k : est_i != l}`` and sizes."""
    est = _labels(est_labels, K, "est_labels")
    true = _labels(true_labels, K, "true_labels")
    if est.shape != true.shape:
        raise ValueError(f"label vectors differ in length: {est.shape[0]} vs {true.shape[0]}")
    sizes = np.bincount(true, minlength=K)
    if np.any(sizes == 0):
        raise ValueError(f"true community {int(np.argmin(sizes))} is empty")
    hits = np.zeros((K, K), dtype=np.int64)
    np.add.at(hits, (true, est), 1)
    return sizes[:, None] - hits, sizes


class L1Result(float):
    """Float subclass so the value compares like a number; ``perm[k]`` is
    the estimated label matched to true community ``k``."""

    perm: tuple

    def __new__(cls, value, perm):
        obj = super().__new__(cls, value)
        obj.perm = tuple(int(p) for p in perm)
        return obj


def _exact_value(miss, sizes, perm):
    return sum((Fraction(int(miss[k, l]), int(sizes[k])) for k, l in enumerate(perm)), Fraction(0))


def misclassification_l1(est_labels, true_labels, K: int, method: str = "auto") -> L1Result:
    """Sum over true communities of the fraction of members that land outside
    the estimated cluster matched to them, minimised over matchings.

    The result lies in ``[0, K]``. ``method`` is ``"brute"`` (all K!
    matchings), ``"assignment"`` (linear assignment on the per-community
    mismatch costs) or ``"auto"`` (brute force up to K=8). Both paths
    evaluate the winning matching in exact rational arithmetic, so they
    return the same float whenever they find the same optimum.
    """
    miss, sizes = mismatch_costs(est_labels, true_labels, K)
    cost = miss / sizes[:, None]
    if method == "auto":
        method = "brute" if K <= BRUTE_FORCE_MAX_K else "assignment"
    if method == "brute":
        perms = np.array(list(itertools.permutations(range(K))), dtype=np.int64)
        common = math.lcm(*(int(s) for s in sizes))
        if common * int(sizes.sum()) < 2**62:
            # integer costs over a common denominator: exact and vectorised
            scaled = miss * (common // sizes)[:, None]
            best = int(np.argmin(scaled[np.arange(K), perms].sum(axis=1)))
        else:
            totals = cost[np.arange(K), perms].sum(axis=1)
            near = np.flatnonzero(totals <= totals.min() + 1e-9)
            exact = [_exact_value(miss, sizes, perms[i]) for i in near]
            best = near[int(np.argmin(exact))]
        perm = perms[best]
    elif method == "assignment":
        _, perm = linear_sum_assignment(cost)
    else:
        raise ValueError(f"unknown method {method!r}")
    return L1Result(float(_exact_value(miss, sizes, perm)), perm)


def _indicator(labels, K):
    n = labels.shape[0]
    return sp.csr_matrix((np.ones(n), (np.arange(n), labels)), shape=(n, K))


def estimate_B(A_tilde, est_labels, K: int, propensity=None) -> np.ndarray:
    """Block averages of ``A_tilde`` over the estimated communities.

    Entry ``(q, l)`` is the sum of ``A_tilde`` over rows in cluster q and
    columns in cluster l, divided by ``n_q * n_l``. With ``propensity`` the
    divisor becomes ``sum_q(theta) * sum_l(theta)``, which inverts the
    degree-corrected population matrix.

    Factored inputs (``EigenBasis``, ``RandomizedEig``) are reduced through
    their n x K' factors; nothing n x n is formed.
    """
    if not hasattr(A_tilde, "shape"):
        raise TypeError(f"cannot estimate B from {type(A_tilde).__name__}")
    labels = _labels(est_labels, K, "est_labels")
    n = labels.shape[0]
    if A_tilde.shape[0] != n:
        raise ValueError(f"matrix has {A_tilde.shape[0]} rows but {n} labels were given")
    counts = np.bincount(labels, minlength=K)
    if np.any(counts == 0):
        raise ValueError(f"estimated cluster {int(np.argmin(counts))} is empty")
    w = np.ones(n) if propensity is None else np.asarray(propensity, dtype=float)
    Theta = _indicator(labels, K)
    if isinstance(A_tilde, EigenBasis):
        F = Theta.T @ A_tilde.U
        S = (F * A_tilde.lambdas) @ F.T
    elif isinstance(A_tilde, RandomizedEig):
        F = Theta.T @ A_tilde.Q
        S = F @ A_tilde.C @ F.T
    elif isinstance(A_tilde, SparseSymGraph):
        S = (Theta.T @ (A_tilde.csr @ Theta)).toarray()
    elif isinstance(A_tilde, DenseSymMatrix):
        T = Theta.toarray()
        S = T.T @ A_tilde.values @ T
    elif isinstance(A_tilde, (LinearOperator, np.ndarray)) or sp.issparse(A_tilde):
        T = Theta.toarray()
        S = T.T @ np.asarray(as_operator(A_tilde) @ T)
    else:
        raise TypeError(f"cannot estimate B from {type(A_tilde).__name__}")
    mass = np.bincount(labels, weights=w, minlength=K)
    S = 0.5 * (S + S.T)
    return S / np.outer(mass, mass)


def b_error(B_tilde, B, perm=None) -> float:
    """``max |B_tilde - B|`` after relabelling ``B_tilde`` by ``perm``.

    ``perm[k]`` names the estimated cluster matched to true community k,
    as returned by :func:`misclassification_l1`.
    """
    Bt = np.asarray(B_tilde, dtype=float)
    B = np.asarray(B, dtype=float)
    if Bt.shape != B.shape:
        raise ValueError(f"shape mismatch: {Bt.shape} vs {B.shape}")
    if perm is not None:
        p = np.asarray(perm)
        Bt = Bt[np.ix_(p, p)]
    return float(np.abs(Bt - B).max(initial=0.0))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2.0


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def pair_metrics(est_labels, ref_labels) -> dict:
    """Pairwise F1, NMI (arithmetic-mean normalisation) and ARI.

    F1 treats "same cluster" as the positive class over all node pairs.
    When the estimate puts no pair together (or the reference has none) F1
    is 0, unless neither does, in which case the partitions agree and F1 is 1.
    NMI and ARI fall back to 1 for two identical single-cluster or
    all-singleton partitions, where the usual ratios are 0/0.
    """
    a = np.asarray(est_labels).reshape(-1)
    b = np.asarray(ref_labels).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"label vectors differ in length: {a.shape[0]} vs {b.shape[0]}")
    n = a.shape[0]
    if n == 0:
        raise ValueError("empty labelings")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    rows, cols = table.sum(1), table.sum(0)

    together = _comb2(table).sum()
    est_pairs, ref_pairs = _comb2(rows).sum(), _comb2(cols).sum()
    if est_pairs == 0 and ref_pairs == 0:
        f1 = 1.0
    elif together == 0:
        f1 = 0.0
    else:
        f1 = 2.0 * together / (est_pairs + ref_pairs)

    ha, hb = _entropy(rows, n), _entropy(cols, n)
    nz = table > 0
    pij = table[nz] / n
    outer = np.outer(rows, cols)[nz] / (n * n)
    mi = max(float((pij * np.log(pij / outer)).sum()), 0.0)
    if ha == 0.0 and hb == 0.0:
        nmi = 1.0
    else:
        nmi = min(mi / (0.5 * (ha + hb)), 1.0)

    total = n * (n - 1) / 2.0
    expected = est_pairs * ref_pairs / total if total else 0.0
    top = 0.5 * (est_pairs + ref_pairs)
    if top == expected:
        ari = 1.0
    else:
        ari = float((together - expected) / (top - expected))
    return {"f1": float(f1), "nmi": float(nmi), "ari": ari}


def deviation_norm(approx, P, rng=None, tol: float = 1e-6, block_size: int = 8,
                   max_iter: int = 2000) -> float:
    """Spectral norm of ``approx - P`` without forming either densely.

    Differences below ``1e-10`` times the size of the operands (judged from
    one random probe) count as converged, so an exact ``approx`` gives a
    rounding-level answer instead of a convergence failure.
    """
    if isinstance(approx, RandomizedEig):
        approx = approx.factors
    rng = as_generator(rng)
    probe_rng, norm_rng = rng.spawn(2)
    op = residual_operator(approx, P)
    x = probe_rng.standard_normal(op.shape[0])
    xn = float(np.linalg.norm(x)) or 1.0
    scale = max(float(np.linalg.norm(as_operator(approx) @ x)), float(np.linalg.norm(as_operator(P) @ x))) / xn
    return operator_norm(op, tol=tol, max_iter=max_iter, rng=norm_rng, block_size=block_size,
                         atol=1e-10 * scale)


# ---------------------------------------------------------------------------
# reports

ROW_COLUMNS = ("grid", "rep", "method", "seed", "n", "K", "K_prime",
               "deviation", "l1", "b_err", "f1", "nmi", "ari", "status", "error")
TIME_COLUMNS = ("grid", "rep", "method", "sample_ms", "eig_ms", "kmeans_ms", "total_ms")
METRICS = ("deviation", "l1", "b_err", "f1", "nmi", "ari")


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return "" if v is None else str(v)


class ExperimentReport:
    """Rows of per-replication results plus per-(grid point, method) summaries.

    ``rows`` carry only seeded, reproducible quantities; wall-clock times
    live in ``times`` so that reruns produce byte-identical result files.
    ``axes`` name the sweep columns that precede the fixed columns.
    """

    def __init__(self, axes=(), rows=None, times=None, meta=None):
        self.axes = tuple(axes)
        self.rows = list(rows or [])
        self.times = list(times or [])
        self.meta = dict(meta or {})

    @property
    def columns(self):
        return self.axes + tuple(c for c in ROW_COLUMNS if c not in self.axes)

    def add(self, row: dict, timing: dict | None = None):
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise ValueError(f"row is missing columns {missing}")
        self.rows.append(row)
        if timing is not None:
            self.times.append(timing)

    def sort(self):
        self.rows.sort(key=lambda r: (r["grid"], r["rep"], r["method"]))
        self.times.sort(key=lambda r: (r["grid"], r["rep"], r["method"]))

    def aggregate(self) -> list[dict]:
        """Mean and sample sd of each metric over successful replications."""
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r["grid"], r["method"]), []).append(r)
        out = []
        for (grid, method), rs in sorted(groups.items()):
            ok = [r for r in rs if r["status"] == "ok"]
            entry = {a: rs[0][a] for a in self.axes}
            entry.update(grid=grid, method=method, replications=len(rs), failures=len(rs) - len(ok))
            for m in METRICS:
                vals = np.array([r[m] for r in ok], dtype=float)
                vals = vals[~np.isnan(vals)]
                entry[f"{m}_mean"] = float(vals.mean()) if vals.size else None
                entry[f"{m}_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else None
            out.append(entry)
        return out

    def time_medians(self) -> list[dict]:
        groups: dict = {}
        for t in self.times:
            groups.setdefault((t["grid"], t["method"]), []).append(t)
        out = []
        for (grid, method), ts in sorted(groups.items()):
            entry = {"grid": grid, "method": method, "runs": len(ts)}
            for c in TIME_COLUMNS[3:]:
                entry[c] = float(np.median([t[c] for t in ts]))
            out.append(entry)
        return out

    def rows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.columns])
        return buf.getvalue()

    def times_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TIME_COLUMNS)
        for t in self.times:
            w.writerow([_fmt(t[c]) for c in TIME_COLUMNS])
        return buf.getvalue()

    def aggregate_json(self) -> str:
        return json.dumps({"meta": self.meta, "aggregate": self.aggregate()}, indent=2, sort_keys=True)

    def write(self, out_dir):
        """Write ``rows.csv``, ``aggregate.json`` and ``times.csv`` into ``out_dir``."""
        os.makedirs(out_dir, exist_ok=True)
        paths = {}
        for name, text in (("rows.csv", self.rows_csv()),
                           ("aggregate.json", self.aggregate_json()),
                           ("times.csv", self.times_csv())):
            path = os.path.join(out_dir, name)
            with open(path, "w", newline="") as fh:
                fh.write(text)
            paths[name] = path
        return paths
