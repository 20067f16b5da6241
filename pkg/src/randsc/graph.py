"""
Sparse symmetric graphs, edge-list input and operator-norm estimation.

Everything downstream (sketching, sampling, clustering, evaluation) talks to
matrices through ``scipy.sparse.linalg.LinearOperator``; ``as_operator``
turns any of the matrix-like types used in this package into one.
"""

from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from ._base import ConvergenceError, EigenBasis, as_generator

__all__ = [
    "SparseSymGraph",
    "DenseSymMatrix",
    "EdgeList",
    "EdgeListParseError",
    "load_edge_list",
    "matvec",
    "as_operator",
    "operator_norm",
    "residual_operator",
]

log = logging.getLogger(__name__)


class SparseSymGraph:
    """Weighted undirected graph stored as a symmetric CSR matrix.

    Each undirected pair is kept once in ``rows``/``cols``/``weights`` with
    ``rows < cols``; the CSR matrix materializes both orientations so that
    products need no special casing. The diagonal is always empty.

    Parameters
    ----------
    n : int
        Number of nodes.
    rows, cols : array_like of int
        Endpoints of each pair. Orientation does not matter.
    weights : array_like of float, optional
        Strictly positive weights, default 1.0 (plain adjacency).
    """

    __slots__ = ("_n", "_rows", "_cols", "_weights", "_csr")

    def __init__(self, n, rows=(), cols=(), weights=None, *, _trusted=False):
        n = int(n)
        if n < 0:
            raise ValueError("n must be non-negative")
        r = np.asarray(rows, dtype=np.int64).reshape(-1)
        c = np.asarray(cols, dtype=np.int64).reshape(-1)
        if r.shape != c.shape:
            raise ValueError("rows and cols must have the same length")
        if weights is None:
            w = np.ones(r.shape[0])
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
            if w.shape != r.shape:
                raise ValueError("weights must match rows/cols in length")
        if not _trusted:
            if r.size and (min(r.min(), c.min()) < 0 or max(r.max(), c.max()) >= n):
                raise ValueError(f"node index out of range [0, {n})")
            if np.any(r == c):
                raise ValueError("diagonal entries are not allowed")
            if np.any(~(w > 0)) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite and strictly positive")
            lo, hi = np.minimum(r, c), np.maximum(r, c)
            key = lo * n + hi
            order = np.argsort(key, kind="stable")
            key = key[order]
            if key.size > 1 and np.any(key[1:] == key[:-1]):
                raise ValueError("duplicate (i, j) pair")
            r, c, w = lo[order], hi[order], w[order]
        self._n = n
        self._rows, self._cols, self._weights = r, c, w
        for a in (r, c, w):
            a.flags.writeable = False
        both_r = np.concatenate([r, c])
        both_c = np.concatenate([c, r])
        both_w = np.concatenate([w, w])
        csr = sp.csr_matrix((both_w, (both_r, both_c)), shape=(n, n))
        csr.sort_indices()
        for a in (csr.data, csr.indices, csr.indptr):
            a.flags.writeable = False
        self._csr = csr

    # -- accessors -------------------------------------------------------
    @property
    def n(self) -> int:
        return self._n

    @property
    def shape(self):
        return (self._n, self._n)

    @property
    def nnz(self) -> int:
        """Number of stored undirected pairs (each counted once)."""
        return int(self._rows.shape[0])

    @property
    def rows(self):
        return self._rows

    @property
    def cols(self):
        return self._cols

    @property
    def weights(self):
        return self._weights

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    def entries(self):
        """Iterate over ``(i, j, w)`` with ``i < j``."""
        return zip(self._rows.tolist(), self._cols.tolist(), self._weights.tolist())

    def weight(self, i: int, j: int) -> float:
        return float(self._csr[i, j])

    def degrees(self) -> np.ndarray:
        """Number of neighbours of every node."""
        return np.diff(self._csr.indptr)

    def row_norms(self) -> np.ndarray:
        """Euclidean norm of every row of the weighted adjacency matrix."""
        sq = self._csr.multiply(self._csr).sum(axis=1)
        return np.sqrt(np.asarray(sq).reshape(-1))

    def is_binary(self) -> bool:
        return bool(np.all(self._weights == 1.0))

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def __matmul__(self, x):
        return matvec(self, x)

    def __repr__(self):
        return f"SparseSymGraph(n={self._n}, pairs={self.nnz})"

    @classmethod
    def from_dense(cls, M, tol: float = 0.0) -> "SparseSymGraph":
        """Build from a dense symmetric array, ignoring the diagonal."""
        M = np.asarray(M, dtype=float)
        iu, ju = np.triu_indices(M.shape[0], k=1)
        vals = M[iu, ju]
        keep = vals > tol
        return cls(M.shape[0], iu[keep], ju[keep], vals[keep])


class DenseSymMatrix:
    """Small dense symmetric matrix.

    The upper triangle of the input is authoritative and is mirrored onto the
    lower one, so ``values[i, j] == values[j, i]`` holds bit for bit.
    """

    __slots__ = ("_values",)

    def __init__(self, values, *, atol: float = 1e-10):
        V = np.array(values, dtype=float)
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise ValueError("expected a square matrix")
        if not np.all(np.isfinite(V)):
            raise ValueError("matrix has non-finite entries")
        scale = max(1.0, float(np.abs(V).max(initial=0.0)))
        if not np.allclose(V, V.T, rtol=0.0, atol=atol * scale):
            raise ValueError("matrix is not symmetric")
        upper = np.triu(V)
        V = upper + np.triu(V, k=1).T
        V.flags.writeable = False
        self._values = V

    @property
    def n(self) -> int:
        return self._values.shape[0]

    @property
    def shape(self):
        return self._values.shape

    @property
    def values(self) -> np.ndarray:
        return self._values

    def to_dense(self) -> np.ndarray:
        return self._values.copy()

    def __matmul__(self, x):
        return matvec(self, x)

    def __repr__(self):
        return f"DenseSymMatrix(n={self.n})"


# ---------------------------------------------------------------------------
# edge lists


class EdgeListParseError(ValueError):
    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line!r}")
        self.lineno = lineno


@dataclass(frozen=True)
class EdgeList:
    """Result of :func:`load_edge_list`.

    ``node_ids[k]`` is the identifier used in the file for node ``k``.
    """

    graph: SparseSymGraph
    node_ids: np.ndarray
    n_duplicates: int
    n_self_loops: int
    n_isolated: int

    def index_of(self) -> dict:
        return {int(v): k for k, v in enumerate(self.node_ids.tolist())}


def _iter_lines(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            yield from fh
        return
    if isinstance(source, (bytes, bytearray)):
        yield from io.BytesIO(source)
        return
    yield from source


def load_edge_list(
    source,
    delimiter=None,
    one_indexed: bool = False,
    comment: str = "#",
    reindex: bool = True,
) -> EdgeList:
    """Read an undirected edge list (SNAP style) into a :class:`SparseSymGraph`.

    Every non-comment line must hold two integer node ids. Duplicate edges
    (in either orientation) are collapsed to weight 1.0 and self-loops are
    dropped, but a node seen only in a self-loop is still kept as an
    isolated node.

    Parameters
    ----------
    source : path, bytes, or iterable of lines (str or bytes)
    delimiter : str, optional
        Token separator; any whitespace by default.
    one_indexed : bool
        File ids start at 1. Only matters with ``reindex=False``, where ids
        map directly to row indices.
    comment : str
        Lines starting with this prefix (after leading whitespace) are skipped.
    reindex : bool
        Map the sorted distinct ids onto ``0..n-1``. With ``False`` the
        graph has ``max_id + 1`` nodes (ids minus one if ``one_indexed``).
    """
    src, dst = [], []
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.decode("utf-8", "replace") if isinstance(raw, (bytes, bytearray)) else raw
        s = line.strip()
        if not s or (comment and s.startswith(comment)):
            continue
        tok = s.split(delimiter)
        tok = [t for t in tok if t != ""]
        if len(tok) < 2:
            raise EdgeListParseError(lineno, s, "expected two node ids")
        try:
            a, b = int(tok[0]), int(tok[1])
        except ValueError:
            raise EdgeListParseError(lineno, s, "node ids must be integers") from None
        src.append(a)
        dst.append(b)

    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if reindex:
        ids, inv = np.unique(np.concatenate([src, dst]), return_inverse=True)
        m = src.shape[0]
        u, v = inv[:m], inv[m:]
        n = ids.shape[0]
    else:
        off = 1 if one_indexed else 0
        u, v = src - off, dst - off
        if u.size and min(u.min(), v.min()) < 0:
            raise ValueError("negative node id after index shift")
        n = int(max(u.max(), v.max()) + 1) if u.size else 0
        ids = np.arange(n, dtype=np.int64) + off

    loops = u == v
    n_loops = int(loops.sum())
    u, v = u[~loops], v[~loops]
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    key = np.unique(lo * max(n, 1) + hi)
    n_dup = int(lo.shape[0] - key.shape[0])
    rows, cols = key // max(n, 1), key % max(n, 1)
    graph = SparseSymGraph(n, rows, cols, _trusted=True)
    n_isolated = int(np.sum(graph.degrees() == 0))
    if n_dup or n_loops:
        log.info("edge list: dropped %d duplicate edges and %d self-loops", n_dup, n_loops)
    return EdgeList(graph, ids, n_dup, n_loops, n_isolated)


# ---------------------------------------------------------------------------
# products and operators


def matvec(M, x):
    """Symmetric product ``M @ x`` for a graph or dense symmetric matrix.

    ``x`` may be a vector or an n x b block. Row-wise accumulation in CSR
    order makes repeated calls bit-identical.
    """
    x = np.asarray(x, dtype=float)
    n = M.shape[0]
    if x.shape[0] != n:
        raise ValueError(f"dimension mismatch: operator is {n}x{n}, input has {x.shape[0]} rows")
    if isinstance(M, SparseSymGraph):
        return M.csr @ x
    if isinstance(M, DenseSymMatrix):
        return M.values @ x
    raise TypeError(f"unsupported matrix type {type(M).__name__}")


def as_operator(M) -> LinearOperator:
    """Wrap any supported matrix-like object as a symmetric LinearOperator."""
    if isinstance(M, LinearOperator):
        return M
    if isinstance(M, SparseSymGraph):
        return aslinearoperator(M.csr)
    if isinstance(M, DenseSymMatrix):
        return aslinearoperator(M.values)
    if isinstance(M, EigenBasis):
        n = M.n
        return LinearOperator((n, n), matvec=M.apply, rmatvec=M.apply,
                              matmat=M.apply, rmatmat=M.apply, dtype=float)
    if sp.issparse(M) or isinstance(M, np.ndarray):
        return aslinearoperator(M)
    raise TypeError(f"cannot build an operator from {type(M).__name__}")


def residual_operator(approx, P) -> LinearOperator:
    """Operator ``x -> approx @ x - P @ x`` built from the two factors.

    ``approx`` is typically an :class:`EigenBasis` (``U diag(s) U^T``), which
    is applied as ``U (s * (U^T x))``; graphs and dense matrices also work.
    """
    a = as_operator(approx)
    b = as_operator(P)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    n = a.shape[0]

    def mv(x):
        return a @ x - b @ x

    return LinearOperator((n, n), matvec=mv, rmatvec=mv, matmat=mv, rmatmat=mv, dtype=float)


def _orth(X):
    Q, _ = np.linalg.qr(X)
    return Q


def operator_norm(op, n=None, tol=1e-6, max_iter=1000, rng=None, block_size=1, atol=0.0):
    """Spectral norm ``max |lambda|`` of a symmetric operator.

    Runs power iteration from a random start, estimating the norm as
    ``||A x||`` for the unit iterate ``x``; the estimate is insensitive to
    the sign of the dominant eigenvalue. If the Rayleigh quotient keeps
    flipping sign (two dominant eigenvalues of opposite sign and nearly
    equal size) the iteration switches to a two-dimensional subspace.
    Larger ``block_size`` values start directly with a block of that width,
    which speeds up operators whose top eigenvalues are clustered, such as
    random-matrix noise.

    Convergence is declared when both the last change and an extrapolated
    remaining error (from the observed contraction of successive changes)
    fall below ``tol`` times the current estimate, or below ``atol``
    (useful when the operator may be zero up to rounding).

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations; ``err.value`` holds the last estimate.
    """
    A = as_operator(op)
    n = A.shape[0] if n is None else int(n)
    if A.shape[0] != n:
        raise ValueError("n does not match the operator dimension")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if n == 0:
        return 0.0
    rng = as_generator(rng)
    b = max(1, min(int(block_size), n))
    X = _orth(rng.standard_normal((n, b)))
    est = prev = None
    prev_delta = None
    flips = 0
    last_sign = 0
    for it in range(1, max_iter + 1):
        Y = A @ X
        if Y.ndim == 1:
            Y = Y[:, None]
        if b == 1:
            est = float(np.linalg.norm(Y))
            rq = float(X[:, 0] @ Y[:, 0])
            sign = int(np.sign(rq))
            if last_sign and sign and sign != last_sign:
                flips += 1
            last_sign = sign or last_sign
        else:
            est = float(np.linalg.svd(Y, compute_uv=False)[0])
        if est == 0.0:
            return 0.0
        if prev is not None:
            delta = abs(est - prev)
            limit = max(tol * est, atol)
            if delta <= limit:
                # changes at rounding level: nothing left to extrapolate
                if delta <= 8 * np.finfo(float).eps * est:
                    return est
                if prev_delta:
                    c = delta / prev_delta
                    if c < 1.0 and delta * c / (1.0 - c) <= limit:
                        return est
            prev_delta = delta if delta > 0 else prev_delta
        prev = est
        if b == 1 and flips >= 3 and n >= 2:
            log.debug("operator_norm: Rayleigh quotient oscillates, widening block")
            b = 2
            X = _orth(np.column_stack([Y[:, 0], rng.standard_normal(n)]))
            prev = prev_delta = None
            continue
        X = _orth(Y)
    raise ConvergenceError(
        f"operator_norm did not converge in {max_iter} iterations", value=est, n_iter=max_iter
    )
