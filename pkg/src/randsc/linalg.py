"""
Random-projection eigendecomposition of a symmetric matrix.

The sketch follows the usual range-finder recipe: multiply a random test
block through the matrix ``2q + 1`` times, orthonormalize, project the
matrix onto the captured range and solve the small eigenproblem there.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._base import EigenBasis, EigensolverError, RankDeficiencyWarning, as_generator
from .graph import DenseSymMatrix, as_operator

__all__ = [
    "EigenBasis",
    "SketchConfig",
    "RandomizedEig",
    "draw_test_matrix",
    "householder_qr",
    "qr_orthonormalize",
    "randomized_range",
    "dense_sym_eig",
    "randomized_eig",
    "select_top",
]

log = logging.getLogger(__name__)

DISTRIBUTIONS = ("gaussian", "uniform", "rademacher")
RANK_TOL = 1e-12


@dataclass(frozen=True)
class SketchConfig:
    """Parameters of the random projection.

    ``target_rank`` is the number of eigenvectors kept; the sketch has
    ``target_rank + oversampling`` columns and ``power`` extra passes
    through ``A A^T``.
    """

    target_rank: int
    oversampling: int = 10
    power: int = 2
    test_distribution: str = "gaussian"
    seed: int | None = None

    def __post_init__(self):
        if self.target_rank < 1:
            raise ValueError("target_rank must be at least 1")
        if self.oversampling < 0:
            raise ValueError("oversampling must be >= 0")
        if self.power < 0:
            raise ValueError("power must be >= 0")
        if self.test_distribution not in DISTRIBUTIONS:
            raise ValueError(
                f"unknown test distribution {self.test_distribution!r}; "
                f"expected one of {DISTRIBUTIONS}"
            )

    def sketch_width(self, n: int) -> int:
        width = self.target_rank + self.oversampling
        if width > n:
            log.warning("sketch width %d exceeds n=%d; clamping to n", width, n)
            warnings.warn(f"sketch width {width} clamped to n={n}", stacklevel=3)
            width = n
        return width


def draw_test_matrix(n, l, distribution="gaussian", rng=None):
    """Random ``n x l`` test matrix with i.i.d. zero-mean, unit-variance entries.

    ``uniform`` draws from (-1, 1) and rescales by sqrt(3); ``rademacher``
    takes values +-1 with equal probability.
    """
    if l < 1:
        raise ValueError("l must be at least 1")
    rng = as_generator(rng)
    if distribution == "gaussian":
        return rng.standard_normal((n, l))
    if distribution == "uniform":
        return np.sqrt(3.0) * rng.uniform(-1.0, 1.0, size=(n, l))
    if distribution == "rademacher":
        return np.where(rng.random((n, l)) < 0.5, -1.0, 1.0)
    raise ValueError(f"unknown test distribution {distribution!r}")


def householder_qr(Y):
    """Thin QR by Householder reflections.

    Returns ``Q`` (m x l, orthonormal columns) and upper-triangular ``R``
    (l x l) with ``Y = Q R``. Requires m >= l.
    """
    R = np.array(Y, dtype=float, copy=True)
    m, l = R.shape
    if m < l:
        raise ValueError("householder_qr needs at least as many rows as columns")
    vs = []
    for k in range(l):
        x = R[k:, k]
        normx = np.linalg.norm(x)
        v = x.copy()
        if normx == 0.0:
            vs.append(None)
            continue
        alpha = -normx if x[0] >= 0 else normx
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            vs.append(None)
            continue
        v /= vnorm
        R[k:, k:] -= 2.0 * np.outer(v, v @ R[k:, k:])
        vs.append(v)
    Q = np.zeros((m, l))
    Q[np.arange(l), np.arange(l)] = 1.0
    for k in range(l - 1, -1, -1):
        v = vs[k]
        if v is None:
            continue
        Q[k:, :] -= 2.0 * np.outer(v, v @ Q[k:, :])
    return Q, np.triu(R[:l, :])


def qr_orthonormalize(Y, rank_tol=RANK_TOL):
    """Orthonormal basis for the columns of ``Y``.

    Columns whose diagonal entry in ``R`` falls below ``rank_tol`` times the
    largest column norm of ``Y`` are treated as linearly dependent on the
    earlier ones and dropped (with a :class:`RankDeficiencyWarning`).
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    scale = float(np.max(np.linalg.norm(Y, axis=0), initial=0.0))
    if not np.isfinite(scale):
        raise EigensolverError("non-finite entries in block to orthonormalize")
    if scale == 0.0:
        raise EigensolverError("cannot orthonormalize an all-zero block (empty range)")
    Q, R = householder_qr(Y)
    keep = np.abs(np.diag(R)) > rank_tol * scale
    if not keep.all():
        dropped = int((~keep).sum())
        warnings.warn(
            f"dropped {dropped} of {Y.shape[1]} columns as numerically dependent",
            RankDeficiencyWarning,
            stacklevel=2,
        )
        Q = Q[:, keep]
    return Q


def randomized_range(A, cfg: SketchConfig, rng=None):
    """Orthonormal ``Q`` whose span approximates the dominant range of ``A``.

    The test block is pushed through ``A`` a total of ``2q + 1`` times and
    re-orthonormalized after every product; this spans the same space as
    ``A^(2q+1) Omega`` but keeps the smaller eigen-directions from being
    lost to rounding.
    """
    op = as_operator(A)
    n = op.shape[0]
    rng = as_generator(cfg.seed if rng is None else rng)
    width = cfg.sketch_width(n)
    Omega = draw_test_matrix(n, width, cfg.test_distribution, rng)
    Y = op @ Omega
    for _ in range(2 * cfg.power):
        Y = op @ qr_orthonormalize(Y)
    return qr_orthonormalize(Y)


def dense_sym_eig(C):
    """All eigenpairs of a small dense symmetric matrix, descending order."""
    M = C.values if isinstance(C, DenseSymMatrix) else np.asarray(C, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(M)):
        raise EigensolverError("matrix has non-finite entries")
    M = 0.5 * (M + M.T)
    lam, V = np.linalg.eigh(M)
    return EigenBasis(V[:, ::-1], lam[::-1])


def select_top(lambdas, k, select="algebraic"):
    """Indices of the ``k`` leading eigenvalues.

    ``algebraic`` ranks by value (largest first), ``magnitude`` by absolute
    value. Ties keep the original order.
    """
    lambdas = np.asarray(lambdas)
    if select == "algebraic":
        key = -lambdas
    elif select == "magnitude":
        key = -np.abs(lambdas)
    else:
        raise ValueError(f"unknown selection rule {select!r}")
    return np.argsort(key, kind="stable")[:k]


class RandomizedEig(NamedTuple):
    """Output of :func:`randomized_eig`.

    ``basis`` holds the leading ``K'`` approximate eigenpairs; ``Q`` and
    ``C`` define the full sketch ``Q C Q^T``.
    """

    basis: EigenBasis
    Q: np.ndarray
    C: np.ndarray

    @property
    def shape(self):
        n = self.Q.shape[0]
        return (n, n)

    @property
    def factors(self) -> EigenBasis:
        """``Q C Q^T`` as an :class:`EigenBasis` (all sketch directions)."""
        full = dense_sym_eig(self.C)
        return EigenBasis(self.Q @ full.U, full.lambdas)


def randomized_eig(A, cfg: SketchConfig, rng=None, select="algebraic") -> RandomizedEig:
    """Approximate leading eigenpairs of ``A`` from a random-projection sketch.

    Forms ``C = Q^T A Q`` on the captured range, diagonalizes it and lifts
    the ``K'`` leading eigenvectors back through ``Q``.
    """
    op = as_operator(A)
    Q = randomized_range(op, cfg, rng)
    AQ = op @ Q
    C = Q.T @ AQ
    C = 0.5 * (C + C.T)
    small = dense_sym_eig(C)
    k = cfg.target_rank
    if Q.shape[1] < k:
        warnings.warn(
            f"captured range has dimension {Q.shape[1]} < target rank {k}",
            RankDeficiencyWarning,
            stacklevel=2,
        )
        k = Q.shape[1]
    idx = select_top(small.lambdas, k, select)
    idx = idx[np.argsort(-small.lambdas[idx], kind="stable")]
    basis = EigenBasis(Q @ small.U[:, idx], small.lambdas[idx])
    return RandomizedEig(basis, Q, C)
