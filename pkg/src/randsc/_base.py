"""Shared small types: eigen-bases, error classes and RNG plumbing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EigensolverError(RuntimeError):
    """An eigensolver could not produce a usable basis."""


class ConvergenceError(EigensolverError):
    """Iteration budget exhausted before the tolerance was met.

    ``value`` carries the last iterate (a float for norm estimates, an
    array of Ritz values for partial eigensolvers) so callers may decide to
    accept it anyway.
    """

    def __init__(self, message, value=None, n_iter=None):
        super().__init__(message)
        self.value = value
        self.n_iter = n_iter


class RankDeficiencyWarning(UserWarning):
    """Columns were dropped while orthonormalizing a block."""


@dataclass(frozen=True)
class EigenBasis:
    """Column-orthonormal block ``U`` (n x m) with eigenvalues ``lambdas``.

    Eigenvalues are sorted in descending algebraic order. The pair stands
    for the symmetric matrix ``U @ diag(lambdas) @ U.T``.
    """

    U: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        lam = np.asarray(self.lambdas, dtype=float).reshape(-1)
        if U.ndim != 2:
            raise ValueError("U must be two-dimensional")
        if U.shape[1] != lam.shape[0]:
            raise ValueError(
                f"U has {U.shape[1]} columns but {lam.shape[0]} eigenvalues given"
            )
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "lambdas", lam)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def shape(self):
        return (self.U.shape[0], self.U.shape[0])

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def orthonormality_error(self) -> float:
        m = self.rank
        return float(np.linalg.norm(self.U.T @ self.U - np.eye(m)))

    def apply(self, X):
        """Return ``U diag(lambdas) U^T X`` without forming the n x n product."""
        X = np.asarray(X, dtype=float)
        coeff = self.U.T @ X
        coeff = coeff * (self.lambdas[:, None] if X.ndim == 2 else self.lambdas)
        return self.U @ coeff

    def to_dense(self) -> np.ndarray:
        return (self.U * self.lambdas) @ self.U.T


def as_generator(rng) -> np.random.Generator:
    """Coerce ``None``, an int seed, a SeedSequence or a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def spawn(rng, k: int) -> list[np.random.Generator]:
    """Derive ``k`` independent child generators from ``rng``.

    The children depend only on the parent's seed material, so work done
    with them is identical whether it runs sequentially or in parallel.
    """
    if isinstance(rng, np.random.SeedSequence):
        return [np.random.default_rng(s) for s in rng.spawn(k)]
    return as_generator(rng).spawn(k)
