"""
Element-wise sparsification and an iterative partial eigensolver.

``sparsify`` keeps each stored pair independently with probability
``p_ij`` and rescales survivors by ``1 / p_ij`` so the sparsified matrix is
unbiased. ``subspace_iteration`` then extracts the leading eigenpairs by
block orthogonal iteration with Rayleigh-Ritz.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from ._base import (
    ConvergenceError,
    EigenBasis,
    EigensolverError,
    RankDeficiencyWarning,
    as_generator,
)
from .graph import DenseSymMatrix, SparseSymGraph, as_operator
from .linalg import qr_orthonormalize, select_top

__all__ = [
    "SamplingConfig",
    "EdgeProbabilities",
    "sparsify",
    "row_norm_probs",
    "subspace_iteration",
    "rs_low_rank",
    "RsLowRank",
]

SAMPLING_MODES = ("uniform", "row_norm", "explicit")


@dataclass(frozen=True)
class SamplingConfig:
    """How pair-keeping probabilities are chosen.

    mode
        ``uniform``: every pair kept with probability ``p``.
        ``row_norm``: probabilities grow with the larger row norm of the two
        endpoints, scaled to average ``target_mean`` and floored at ``p_min``.
        ``explicit``: ``accessor(i, j)`` returns the probabilities; use it to
        force particular edges or nodes to survive.
    """

    mode: str = "uniform"
    p: float = 0.7
    p_min: float = 0.1
    target_mean: float = 0.7
    accessor: Callable | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode {self.mode!r}; expected one of {SAMPLING_MODES}")
        if self.mode == "uniform" and not (0 < self.p <= 1):
            raise ValueError("p must lie in (0, 1]")
        if self.mode == "row_norm":
            if not (0 < self.p_min <= 1):
                raise ValueError("p_min must lie in (0, 1]")
            if not (self.p_min <= self.target_mean <= 1):
                raise ValueError("target_mean must lie in [p_min, 1]")
        if self.mode == "explicit" and self.accessor is None:
            raise ValueError("explicit mode needs an accessor")

    def probabilities(self, A):
        """Accessor ``(i, j) -> p_ij`` for graph ``A``."""
        if self.mode == "uniform":
            p = float(self.p)
            return lambda i, j: np.full(np.shape(i), p)
        if self.mode == "row_norm":
            return row_norm_probs(A, self.p_min, self.target_mean)
        return self.accessor


class EdgeProbabilities:
    """``p_ij = clip(c * max(r_i, r_j) / max_k r_k, p_min, 1)`` for row norms ``r``."""

    def __init__(self, scores, c, p_min):
        self.scores = scores
        self.c = float(c)
        self.p_min = float(p_min)

    def __call__(self, i, j):
        s = np.maximum(self.scores[np.asarray(i)], self.scores[np.asarray(j)])
        return np.clip(self.c * s, self.p_min, 1.0)


def row_norm_probs(A: SparseSymGraph, p_min: float = 0.1, target_mean: float = 0.7):
    """Probabilities favouring edges at nodes with large row norm.

    The scale ``c`` starts at ``target_mean / mean(score)`` over the existing
    edges (exact when no clipping happens) and is refined by bisection on the
    clipped mean, so the average probability over edges equals
    ``target_mean`` up to 1e-10.
    """
    if A.nnz == 0:
        raise ValueError("row_norm_probs needs a graph with at least one edge")
    r = A.row_norms()
    scores = r / r.max()
    s_edge = np.maximum(scores[A.rows], scores[A.cols])

    def mean_p(c):
        return float(np.clip(c * s_edge, p_min, 1.0).mean())

    c = target_mean / float(s_edge.mean())
    if abs(mean_p(c) - target_mean) > 1e-12:
        lo, hi = 0.0, 1.0 / float(s_edge.min())
        if mean_p(hi) < target_mean:
            c = hi
        else:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mean_p(mid) < target_mean:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-14 * hi:
                    break
            c = hi
    return EdgeProbabilities(scores, c, p_min)


def sparsify(A, cfg: SamplingConfig, rng=None):
    """Keep each pair i<j w.p. ``p_ij``; survivors get weight ``A_ij / p_ij``.

    Only stored (nonzero) pairs are visited: a zero entry stays zero whether
    or not it is selected, so the output has the same distribution as
    sampling every pair. Dense inputs keep their diagonal untouched.
    """
    rng = as_generator(cfg.seed if rng is None else rng)
    if isinstance(A, DenseSymMatrix):
        return _sparsify_dense(A, cfg, rng)
    if not isinstance(A, SparseSymGraph):
        raise TypeError("sparsify expects a SparseSymGraph or DenseSymMatrix")
    prob = cfg.probabilities(A)
    p = np.asarray(prob(A.rows, A.cols), dtype=float)
    if np.any(p <= 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise ValueError("sampling probabilities must lie in (0, 1]")
    if np.all(p == 1.0):
        return A
    keep = rng.random(A.nnz) < p
    return SparseSymGraph(
        A.n, A.rows[keep], A.cols[keep], A.weights[keep] / p[keep], _trusted=True
    )


def _sparsify_dense(A, cfg, rng):
    if cfg.mode == "row_norm":
        raise ValueError("row_norm sampling is only defined for graphs")
    V = A.values
    iu, ju = np.triu_indices(A.n, k=1)
    nz = V[iu, ju] != 0
    iu, ju = iu[nz], ju[nz]
    p = np.asarray(cfg.probabilities(None)(iu, ju), dtype=float)
    if np.any(p <= 0) or np.any(p > 1):
        raise ValueError("sampling probabilities must lie in (0, 1]")
    if np.all(p == 1.0):
        return A
    keep = rng.random(iu.shape[0]) < p
    out = np.diag(np.diag(V)).astype(float)
    out[iu[keep], ju[keep]] = V[iu[keep], ju[keep]] / p[keep]
    out[ju[keep], iu[keep]] = out[iu[keep], ju[keep]]
    return DenseSymMatrix(out)


def subspace_iteration(
    A,
    k: int,
    tol: float = 1e-8,
    max_iter: int = 1000,
    rng=None,
    block_size: int | None = None,
    select: str = "algebraic",
) -> EigenBasis:
    """Leading ``k`` eigenpairs of a symmetric operator by orthogonal iteration.

    The block carries ``block_size`` columns (default ``2k + 8``,
    capped at n) to speed up convergence; the Rayleigh-Ritz step on each
    iterate picks the ``k`` leading Ritz pairs. Iteration stops when the
    selected Ritz values move by less than ``tol`` relative to the largest
    one and every selected Ritz residual ``||A v - theta v||`` is below
    ``1e-4`` times the distance from its Ritz value to the nearest other
    Ritz value in the block (floored at ``tol`` times the largest). That
    keeps each returned vector within about 1e-4 radians of the true one
    whenever the eigenvalue is separated.

    Raises
    ------
    EigensolverError
        The operator annihilates the whole block (e.g. an empty graph).
    ConvergenceError
        No convergence within ``max_iter``; ``err.value`` holds the last
        Ritz values.
    """
    op = as_operator(A)
    n = op.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the dimension n={n}")
    rng = as_generator(rng)
    b = block_size if block_size is not None else 2 * k + 8
    b = max(k, min(int(b), n))
    X = np.linalg.qr(rng.standard_normal((n, b)))[0]
    prev = None
    theta = None
    for it in range(1, max_iter + 1):
        Y = op @ X
        H = X.T @ Y
        H = 0.5 * (H + H.T)
        lam, W = np.linalg.eigh(H)
        order = np.argsort(-lam, kind="stable")
        lam, W = lam[order], W[:, order]
        idx = select_top(lam, min(k, lam.shape[0]), select)
        idx = idx[np.argsort(-lam[idx], kind="stable")]
        theta = lam[idx]
        scale = float(np.abs(lam).max(initial=0.0))
        if scale == 0.0 and it > 1:
            raise EigensolverError("operator vanishes on the iteration subspace")
        if prev is not None and prev.shape == theta.shape and scale > 0:
            change = float(np.abs(theta - prev).max()) / scale
            if change < tol:
                V = X @ W[:, idx]
                R = Y @ W[:, idx] - V * theta
                # residual over gap bounds each vector's angle; ask for 1e-4
                others = np.abs(theta[:, None] - lam[None, :])
                others[np.arange(idx.shape[0]), idx] = np.inf
                gap = np.maximum(others.min(axis=1, initial=np.inf), tol * scale)
                if np.all(np.linalg.norm(R, axis=0) <= 1e-4 * gap):
                    if V.shape[1] < k:
                        warnings.warn(
                            f"operator has rank {V.shape[1]} < k={k}",
                            RankDeficiencyWarning,
                            stacklevel=2,
                        )
                    return EigenBasis(V, theta)
        prev = theta
        YW = Y @ W
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RankDeficiencyWarning)
                X = qr_orthonormalize(YW)
        except EigensolverError:
            raise EigensolverError("operator vanishes on the iteration subspace") from None
    raise ConvergenceError(
        f"subspace_iteration did not converge in {max_iter} iterations",
        value=theta,
        n_iter=max_iter,
    )


class RsLowRank(NamedTuple):
    """Rank-``K'`` approximation of the sparsified matrix and the matrix itself."""

    basis: EigenBasis
    sparsified: object


def rs_low_rank(A, cfg: SamplingConfig, k: int, rng=None, *, tol=1e-8, max_iter=1000,
                select="algebraic", timings: dict | None = None) -> RsLowRank:
    """Sparsify ``A`` then take its leading ``k`` eigenpairs.

    If ``timings`` is a dict, seconds spent in each stage are stored under
    ``"sample"`` and ``"eig"``.
    """
    rng = as_generator(cfg.seed if rng is None else rng)
    sample_rng, eig_rng = rng.spawn(2)
    return _low_rank(A, cfg, k, sample_rng, eig_rng, tol, max_iter, select, timings)


def _low_rank(A, cfg, k, sample_rng, eig_rng, tol, max_iter, select, timings):
    t0 = time.perf_counter()
    S = sparsify(A, cfg, sample_rng)
    t1 = time.perf_counter()
    basis = subspace_iteration(S, k, tol=tol, max_iter=max_iter, rng=eig_rng, select=select)
    if timings is not None:
        timings["sample"] = t1 - t0
        timings["eig"] = time.perf_counter() - t1
    return RsLowRank(basis, S)
