"""
k-means and the spectral clustering pipelines built on it.

Three ways to get the leading eigenvectors are wired up here: the
full matrix (``spectral_cluster``), a random-projection sketch
(``rp_spectral_cluster``) and a sparsified copy (``rs_spectral_cluster``).
Each can row-normalize the eigenvectors before k-means (``variant="spherical"``),
which is what degree-corrected models need.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._base import EigenBasis, as_generator, spawn
from .graph import DenseSymMatrix, SparseSymGraph, as_operator
from .linalg import SketchConfig, dense_sym_eig, randomized_eig, select_top
from .sampling import SamplingConfig, _low_rank, subspace_iteration

__all__ = [
    "Clustering",
    "KMeansOptions",
    "kmeans_lloyd",
    "kmeans_plusplus",
    "normalize_rows",
    "spectral_cluster",
    "rp_spectral_cluster",
    "rs_spectral_cluster",
    "SpectralResult",
    "RandomizedResult",
]

VARIANTS = ("plain", "spherical")
ZERO_ROW = 1e-12


@dataclass(frozen=True)
class Clustering:
    """Hard partition of n points into K clusters.

    ``trace`` records the k-means objective after each assignment step of
    the winning restart; it never increases.
    """

    labels: np.ndarray
    centroids: np.ndarray
    objective: float
    n_iter: int = 0
    converged: bool = True
    trace: tuple = field(default=(), repr=False)

    @property
    def K(self) -> int:
        return self.centroids.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)

    def to_dict(self, node_ids=None) -> dict:
        ids = np.arange(self.labels.shape[0]) if node_ids is None else np.asarray(node_ids)
        return {
            "nodes": ids.tolist(),
            "labels": self.labels.tolist(),
            "centroids": self.centroids.tolist(),
            "objective": self.objective,
            "n_iter": self.n_iter,
            "converged": self.converged,
        }

    def to_json(self, node_ids=None) -> str:
        return json.dumps(self.to_dict(node_ids))

    def write_csv(self, path, node_ids=None):
        """One ``node,label`` row per node, using ``node_ids`` if given."""
        ids = np.arange(self.labels.shape[0]) if node_ids is None else np.asarray(node_ids)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "label"])
            w.writerows(zip(ids.tolist(), self.labels.tolist()))


@dataclass(frozen=True)
class KMeansOptions:
    restarts: int = 50
    max_iter: int = 300
    tol: float = 0.0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.tol < 0:
            raise ValueError("tol must be non-negative")


def _sqdist(X, C):
    d2 = (X * X).sum(1)[:, None] - 2.0 * (X @ C.T) + (C * C).sum(1)[None, :]
    return np.maximum(d2, 0.0)


def kmeans_plusplus(X, K, rng=None):
    """k-means++ seeding: first centre uniform, then D^2 sampling."""
    rng = as_generator(rng)
    n = X.shape[0]
    C = np.empty((K, X.shape[1]))
    C[0] = X[rng.integers(n)]
    d2 = ((X - C[0]) ** 2).sum(1)
    for k in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        C[k] = X[idx]
        d2 = np.minimum(d2, ((X - C[k]) ** 2).sum(1))
    return C


def _update_centroids(X, labels, d2_own, K):
    counts = np.bincount(labels, minlength=K)
    C = np.zeros((K, X.shape[1]))
    np.add.at(C, labels, X)
    nonempty = counts > 0
    C[nonempty] /= counts[nonempty, None]
    if not nonempty.all():
        # move each empty centre onto the point worst served by its current one
        d = d2_own.copy()
        for k in np.flatnonzero(~nonempty):
            far = int(np.argmax(d))
            C[k] = X[far]
            d[far] = -1.0
    return C


def _lloyd(X, C, max_iter, tol):
    K = C.shape[0]
    rows = np.arange(X.shape[0])
    labels = None
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sqdist(X, C)
        new = np.argmin(d2, axis=1)
        own = d2[rows, new]
        trace.append(float(own.sum()))
        if labels is not None and np.array_equal(new, labels):
            converged = True
            break
        if tol > 0 and len(trace) > 1 and trace[-2] - trace[-1] <= tol * trace[-1]:
            labels = new
            converged = True
            break
        labels = new
        C = _update_centroids(X, labels, own, K)
    if not converged:
        obj = float(((X - C[labels]) ** 2).sum())
        trace.append(min(obj, trace[-1]))
    return labels, C, trace, it, converged


def kmeans_lloyd(points, K: int, restarts: int = 50, max_iter: int = 300, tol: float = 0.0,
                 rng=None) -> Clustering:
    """Best of ``restarts`` k-means++ initialised Lloyd runs.

    Each restart draws from its own child generator, so the result does not
    depend on how restarts are scheduled. Assignment ties go to the lowest
    cluster index; among restarts with equal objective the earliest wins.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if K < 1:
        raise ValueError("K must be at least 1")
    if n < K:
        raise ValueError(f"need at least K={K} points, got {n}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points contain non-finite values")
    best = None
    for child in spawn(as_generator(rng), restarts):
        C0 = kmeans_plusplus(X, K, child)
        labels, C, trace, it, conv = _lloyd(X, C0, max_iter, tol)
        if best is None or trace[-1] < best.objective:
            best = Clustering(labels, C, trace[-1], it, conv, tuple(trace))
    return best


def normalize_rows(U):
    """Scale every row to unit length; rows with norm below 1e-12 stay as they are."""
    U = np.asarray(U, dtype=float)
    norms = np.linalg.norm(U, axis=1)
    out = U.copy()
    nz = norms >= ZERO_ROW
    out[nz] /= norms[nz, None]
    return out


class SpectralResult(NamedTuple):
    clustering: Clustering
    basis: EigenBasis


class RandomizedResult(NamedTuple):
    """``approx`` is the sketch (``RandomizedEig``) or the sparsified graph."""

    clustering: Clustering
    basis: EigenBasis
    approx: object


def _check_sizes(n, K, K_prime):
    if not (1 <= K_prime <= K <= n):
        raise ValueError(f"need 1 <= K'={K_prime} <= K={K} <= n={n}")


def _embed_and_cluster(basis, K, variant, kmeans, rng, timings):
    t0 = time.perf_counter()
    kmeans = kmeans or KMeansOptions()
    X = basis.U if variant == "plain" else normalize_rows(basis.U)
    cl = kmeans_lloyd(X, K, kmeans.restarts, kmeans.max_iter, kmeans.tol, rng)
    if timings is not None:
        timings["kmeans"] = time.perf_counter() - t0
    return cl


def _check_variant(variant):
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def _dense_values(A):
    if isinstance(A, DenseSymMatrix):
        return A.values
    if isinstance(A, SparseSymGraph):
        return A.to_dense()
    if isinstance(A, EigenBasis):
        return A.to_dense()
    return as_operator(A) @ np.eye(A.shape[0])


def spectral_cluster(A, K: int, K_prime: int | None = None, variant: str = "plain",
                     kmeans: KMeansOptions | None = None, backend: str = "exact",
                     rng=None, tol: float = 1e-8, timings: dict | None = None) -> SpectralResult:
    """k-means on the ``K_prime`` leading eigenvectors of ``A``.

    ``backend="exact"`` runs subspace iteration on ``A`` as an operator;
    ``"dense"`` densifies and calls the full symmetric eigensolver, which is
    fine for a few thousand nodes. Pass a dict as ``timings`` to get the
    seconds spent in the ``"eig"`` and ``"kmeans"`` stages.
    """
    K_prime = K if K_prime is None else K_prime
    _check_sizes(A.shape[0], K, K_prime)
    _check_variant(variant)
    if backend not in ("exact", "dense"):
        raise ValueError(f"unknown backend {backend!r}")
    eig_rng, km_rng = spawn(as_generator(rng), 2)
    t0 = time.perf_counter()
    if backend == "exact":
        basis = subspace_iteration(A, K_prime, tol=tol, rng=eig_rng)
    else:
        full = dense_sym_eig(_dense_values(A))
        idx = select_top(full.lambdas, K_prime)
        basis = EigenBasis(full.U[:, idx], full.lambdas[idx])
    if timings is not None:
        timings["eig"] = time.perf_counter() - t0
    return SpectralResult(_embed_and_cluster(basis, K, variant, kmeans, km_rng, timings), basis)


def rp_spectral_cluster(A, K: int, K_prime: int | None = None,
                        sketch: SketchConfig | None = None, variant: str = "plain",
                        kmeans: KMeansOptions | None = None, rng=None,
                        timings: dict | None = None) -> RandomizedResult:
    """Random-projection pipeline. ``approx`` holds ``Q`` and ``C`` of the sketch."""
    if K_prime is None:
        K_prime = sketch.target_rank if sketch is not None else K
    if sketch is None:
        sketch = SketchConfig(target_rank=K_prime)
    elif sketch.target_rank != K_prime:
        sketch = dataclasses.replace(sketch, target_rank=K_prime)
    _check_sizes(A.shape[0], K, K_prime)
    _check_variant(variant)
    eig_rng, km_rng = spawn(as_generator(sketch.seed if rng is None else rng), 2)
    t0 = time.perf_counter()
    sk = randomized_eig(A, sketch, eig_rng)
    if timings is not None:
        timings["eig"] = time.perf_counter() - t0
    cl = _embed_and_cluster(sk.basis, K, variant, kmeans, km_rng, timings)
    return RandomizedResult(cl, sk.basis, sk)


def rs_spectral_cluster(A, K: int, K_prime: int | None = None,
                        sampling: SamplingConfig | None = None, variant: str = "plain",
                        kmeans: KMeansOptions | None = None, rng=None,
                        tol: float = 1e-8, timings: dict | None = None) -> RandomizedResult:
    """Random-sampling pipeline. ``approx`` is the sparsified graph.

    The low-rank factors ``basis`` double as the implicit approximation
    ``U diag(lambdas) U^T`` used for evaluation.
    """
    K_prime = K if K_prime is None else K_prime
    sampling = sampling or SamplingConfig()
    _check_sizes(A.shape[0], K, K_prime)
    _check_variant(variant)
    # the first two streams match spectral_cluster's, so p=1 reproduces it exactly
    eig_rng, km_rng, sample_rng = spawn(as_generator(sampling.seed if rng is None else rng), 3)
    low = _low_rank(A, sampling, K_prime, sample_rng, eig_rng, tol, 1000, "algebraic", timings)
    cl = _embed_and_cluster(low.basis, K, variant, kmeans, km_rng, timings)
    return RandomizedResult(cl, low.basis, low.sparsified)
