"""
Stochastic block models and their degree-corrected extension.

Population quantities are computed through the K x K reduction: with
``phi_k`` the propensities of community k, ``Omega = diag(||phi_k||)`` and
``Bbar = Omega B Omega = H D H^T``, the population matrix has eigenvectors
``U_i = (vartheta_i / ||phi_{g_i}||) H_{g_i}`` and eigenvalues ``D``. A plain
SBM is the special case ``vartheta = 1`` where ``||phi_k|| = sqrt(n_k)``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator

from ._base import EigenBasis, EigensolverError, as_generator
from .graph import DenseSymMatrix, SparseSymGraph

__all__ = [
    "SbmParams",
    "ModelDiagnostics",
    "balanced_sizes",
    "labels_from_sizes",
    "sample_sbm",
    "sample_dcsbm",
    "sample_graph",
    "population_matrix",
    "population_operator",
    "population_eigens",
    "diagnostics",
    "make_benchmark_model",
    "planted_link_matrix",
    "MODEL3_C",
    "BENCHMARK_MODELS",
]

RANK_TOL = 1e-9
DENSE_CAP = 5000


@dataclass(frozen=True)
class SbmParams:
    """Membership labels ``g``, link matrix ``B`` and optional propensities.

    ``vartheta`` turns the model into a DC-SBM; it must lie in (0, 1] with
    maximum exactly 1 inside every community.
    """

    g: np.ndarray
    B: np.ndarray
    vartheta: np.ndarray | None = None
    rank_tol: float = RANK_TOL

    def __post_init__(self):
        g = np.asarray(self.g, dtype=np.int64).reshape(-1)
        B = np.array(self.B, dtype=float, ndmin=2)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ValueError("B must be a square matrix")
        K = B.shape[0]
        if not np.allclose(B, B.T, rtol=0, atol=1e-12):
            raise ValueError("B must be symmetric")
        B = np.triu(B) + np.triu(B, k=1).T
        if np.any(B < 0) or np.any(B > 1) or not np.all(np.isfinite(B)):
            raise ValueError("entries of B must lie in [0, 1]")
        if g.size and (g.min() < 0 or g.max() >= K):
            raise ValueError(f"labels must lie in [0, {K})")
        sizes = np.bincount(g, minlength=K)
        if np.any(sizes == 0):
            empty = np.flatnonzero(sizes == 0).tolist()
            raise ValueError(f"communities {empty} are empty")
        g.flags.writeable = False
        B.flags.writeable = False
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "B", B)
        if self.vartheta is not None:
            th = np.asarray(self.vartheta, dtype=float).reshape(-1)
            if th.shape != g.shape:
                raise ValueError("vartheta must have one entry per node")
            if np.any(th <= 0) or np.any(th > 1):
                raise ValueError("vartheta entries must lie in (0, 1]")
            cmax = np.zeros(K)
            np.maximum.at(cmax, g, th)
            if not np.allclose(cmax, 1.0, rtol=0, atol=1e-12):
                raise ValueError("vartheta must reach 1 inside every community")
            th.flags.writeable = False
            object.__setattr__(self, "vartheta", th)

    @property
    def n(self) -> int:
        return int(self.g.shape[0])

    @property
    def K(self) -> int:
        return int(self.B.shape[0])

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.g, minlength=self.K)

    @property
    def K_prime(self) -> int:
        """Numerical rank of ``B``."""
        s = np.linalg.svd(self.B, compute_uv=False)
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.sum(s > self.rank_tol * s[0]))

    @property
    def is_degree_corrected(self) -> bool:
        return self.vartheta is not None

    def theta(self) -> np.ndarray:
        """Propensities, all ones for a plain SBM."""
        return np.ones(self.n) if self.vartheta is None else np.asarray(self.vartheta)

    def membership_matrix(self) -> np.ndarray:
        Th = np.zeros((self.n, self.K))
        Th[np.arange(self.n), self.g] = 1.0
        return Th

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        sizes = self.sizes
        contiguous = np.array_equal(self.g, labels_from_sizes(sizes))
        d = {"n": self.n, "K": self.K, "B": self.B.tolist()}
        if contiguous:
            d["sizes"] = sizes.tolist()
        else:
            d["g"] = self.g.tolist()
        if self.vartheta is not None:
            d["vartheta"] = self.vartheta.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SbmParams":
        if "g" in d:
            g = np.asarray(d["g"], dtype=np.int64)
        elif "sizes" in d:
            g = labels_from_sizes(d["sizes"])
        else:
            raise ValueError("SbmParams document needs 'g' or 'sizes'")
        if "n" in d and int(d["n"]) != g.shape[0]:
            raise ValueError(f"n={d['n']} disagrees with {g.shape[0]} labels")
        B = np.asarray(d["B"], dtype=float)
        if "K" in d and int(d["K"]) != B.shape[0]:
            raise ValueError(f"K={d['K']} disagrees with B of size {B.shape[0]}")
        return cls(g=g, B=B, vartheta=d.get("vartheta"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SbmParams":
        return cls.from_dict(json.loads(text))


def balanced_sizes(n: int, K: int) -> np.ndarray:
    """Community sizes differing by at most one, larger ones first."""
    if K < 1 or n < K:
        raise ValueError(f"cannot split n={n} nodes into K={K} nonempty communities")
    base, extra = divmod(n, K)
    return np.array([base + (k < extra) for k in range(K)], dtype=np.int64)


def labels_from_sizes(sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.int64)
    return np.repeat(np.arange(sizes.shape[0]), sizes)


# ---------------------------------------------------------------------------
# sampling


def _upper_pairs(t, m):
    """Map row-major indices of the strict upper triangle of an m x m matrix to (a, b)."""
    t = np.asarray(t, dtype=np.int64)
    tf = t.astype(float)
    a = (m - 2 - np.floor(np.sqrt(-8.0 * tf + 4.0 * m * (m - 1) - 7.0) / 2.0 - 0.5)).astype(np.int64)
    a = np.clip(a, 0, max(m - 2, 0))

    def start(x):
        return x * (2 * m - x - 1) // 2

    # correct rare off-by-one from floating point
    for _ in range(2):
        a = np.where(start(a) > t, a - 1, a)
        a = np.where(start(a + 1) <= t, a + 1, a)
    b = t - start(a) + a + 1
    return a, b


def _sample_pairs(g, B, theta, rng):
    K = B.shape[0]
    members = [np.flatnonzero(g == k) for k in range(K)]
    cmax = [float(theta[m].max()) if theta is not None else 1.0 for m in members]
    rows, cols = [], []
    for k in range(K):
        for l in range(k, K):
            mk, ml = members[k], members[l]
            pmax = B[k, l] * cmax[k] * cmax[l]
            if pmax <= 0:
                continue
            if k == l:
                N = mk.size * (mk.size - 1) // 2
            else:
                N = mk.size * ml.size
            if N == 0:
                continue
            count = int(rng.binomial(N, pmax))
            if count == 0:
                continue
            idx = np.sort(rng.choice(N, size=count, replace=False))
            if k == l:
                a, b = _upper_pairs(idx, mk.size)
                i, j = mk[a], mk[b]
            else:
                i, j = mk[idx // ml.size], ml[idx % ml.size]
            if theta is not None and not (
                np.all(theta[mk] == 1.0) and np.all(theta[ml] == 1.0)
            ):
                accept = rng.random(count) < theta[i] * theta[j] / (cmax[k] * cmax[l])
                i, j = i[accept], j[accept]
            rows.append(i)
            cols.append(j)
    if rows:
        rows, cols = np.concatenate(rows), np.concatenate(cols)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
    return SparseSymGraph(g.shape[0], rows, cols)


def sample_sbm(params: SbmParams, rng=None) -> SparseSymGraph:
    """Draw an adjacency matrix: pair i<j is an edge w.p. ``B[g_i, g_j]``.

    Within each block pair the number of edges is drawn from the binomial
    distribution and their positions uniformly without replacement, which
    is the same law as independent Bernoulli draws but costs O(edges).
    """
    if params.vartheta is not None:
        raise ValueError("params carry vartheta; use sample_dcsbm")
    return _sample_pairs(params.g, params.B, None, as_generator(rng))


def sample_dcsbm(params: SbmParams, rng=None) -> SparseSymGraph:
    """Draw a DC-SBM adjacency: pair i<j is an edge w.p. ``th_i th_j B[g_i, g_j]``.

    Candidates are drawn at the block's largest probability and thinned by
    ``th_i th_j / max``. With all-ones propensities no thinning draws are
    made, so the result equals :func:`sample_sbm` for the same seed.
    """
    if params.vartheta is None:
        raise ValueError("sample_dcsbm needs vartheta")
    th = np.asarray(params.vartheta)
    K = params.K
    cmax = np.zeros(K)
    np.maximum.at(cmax, params.g, th)
    top = params.B * np.outer(cmax, cmax)
    if np.any(top > 1.0 + 1e-12):
        k, l = np.argwhere(top > 1.0 + 1e-12)[0]
        raise ValueError(
            f"edge probability {top[k, l]:.4g} > 1 between communities {k} and {l}"
        )
    return _sample_pairs(params.g, params.B, th, as_generator(rng))


def sample_graph(params: SbmParams, rng=None) -> SparseSymGraph:
    """Dispatch to :func:`sample_sbm` or :func:`sample_dcsbm`."""
    if params.vartheta is None:
        return sample_sbm(params, rng)
    return sample_dcsbm(params, rng)


# ---------------------------------------------------------------------------
# population structure


def population_matrix(params: SbmParams, dense_cap: int = DENSE_CAP) -> DenseSymMatrix:
    """Dense ``P = diag(th) Theta B Theta^T diag(th)``, diagonal included."""
    if params.n > dense_cap:
        raise ValueError(f"n={params.n} exceeds the dense cap of {dense_cap}")
    th = params.theta()
    P = params.B[np.ix_(params.g, params.g)] * np.outer(th, th)
    return DenseSymMatrix(P)


def population_operator(params: SbmParams) -> LinearOperator:
    """``P`` as an O(nK) operator, without forming the n x n matrix."""
    g, B, n, K = params.g, params.B, params.n, params.K
    th = params.theta()

    def mv(x):
        x = np.asarray(x, dtype=float)
        flat = x.ndim == 1
        X = x[:, None] if flat else x
        Z = X * th[:, None]
        S = np.zeros((K, X.shape[1]))
        np.add.at(S, g, Z)
        Y = (B @ S)[g] * th[:, None]
        return Y[:, 0] if flat else Y

    return LinearOperator((n, n), matvec=mv, rmatvec=mv, matmat=mv, rmatmat=mv, dtype=float)


def _reduced(params: SbmParams):
    """Eigen-decomposition of ``Bbar = Omega B Omega`` restricted to nonzero eigenvalues."""
    th = params.theta()
    phi_norm = np.sqrt(np.bincount(params.g, weights=th**2, minlength=params.K))
    Bbar = params.B * np.outer(phi_norm, phi_norm)
    lam, H = np.linalg.eigh(Bbar)
    scale = float(np.abs(lam).max(initial=0.0))
    if scale == 0.0:
        raise EigensolverError("link matrix is numerically zero; population basis is empty")
    keep = np.abs(lam) > params.rank_tol * scale
    lam, H = lam[keep], H[:, keep]
    order = np.argsort(-lam, kind="stable")
    return lam[order], H[:, order], phi_norm, Bbar


def population_eigens(params: SbmParams) -> EigenBasis:
    """Exact nonzero eigenpairs of the population matrix, via the K x K reduction."""
    lam, H, phi_norm, _ = _reduced(params)
    if np.any(lam < 0):
        warnings.warn(
            "population matrix has negative eigenvalues; the leading-eigenvalue "
            "pipelines assume an assortative link matrix",
            stacklevel=2,
        )
    tilde = params.theta() / phi_norm[params.g]
    U = tilde[:, None] * H[params.g]
    return EigenBasis(U, lam)


@dataclass(frozen=True)
class ModelDiagnostics:
    """Spectral quantities controlling how separable the communities are.

    ``delta_n`` is the row separation the misclassification bounds use:
    ``min sqrt(1/n_k + 1/n_l)`` for full-rank ``B`` and the distance bound
    ``xi_n = sqrt(eta_n / iota_n)`` (with ``iota_n = sigma_n``) otherwise.
    ``xi_prime_n`` bounds the largest cosine between eigenvector rows of
    different communities in the degree-corrected model; ``max_cross_cosine``
    is the exact value it bounds.
    """

    K: int
    K_prime: int
    alpha_n: float
    sigma_n: float
    gamma_n: float
    delta_n: float
    delta1_n: float
    eta_n: float
    xi_n: float | None
    separation: float | None
    eta_prime_n: float
    beta_n: float
    xi_prime_n: float | None
    max_cross_cosine: float | None
    separation_hypothesis: bool
    cosine_hypothesis: bool
    flags: tuple = field(default_factory=tuple)

    @property
    def separation_bound_holds(self) -> bool | None:
        if self.xi_n is None or self.separation is None:
            return None
        return self.separation >= self.xi_n * (1 - 1e-12)

    @property
    def cosine_bound_holds(self) -> bool | None:
        if self.xi_prime_n is None or self.max_cross_cosine is None:
            return None
        return self.max_cross_cosine <= self.xi_prime_n + 1e-12


def _pairwise_rows(M, fn):
    K = M.shape[0]
    vals = [fn(M[k], M[l]) for k in range(K) for l in range(K) if k != l]
    return vals


def diagnostics(params: SbmParams) -> ModelDiagnostics:
    """Compute the separation quantities and check the rank-deficient hypotheses.

    Violated hypotheses are reported through the boolean fields and
    ``flags``; nothing is raised.
    """
    lam, H, phi_norm, Bbar = _reduced(params)
    K, Kp = params.K, lam.shape[0]
    B = params.B
    sizes = params.sizes.astype(float)
    flags = []

    sigma = float(lam.max())
    gamma = float(lam.min())
    if gamma <= 0:
        flags.append("nonpositive-eigenvalue")

    if K > 1:
        kk, ll = np.triu_indices(K, k=1)
        delta1 = float(np.sqrt(1 / sizes[kk] + 1 / sizes[ll]).min())
        eta = float((B[kk, kk] + B[ll, ll] - 2 * B[kk, ll]).min())
        eta_p = float((Bbar[kk, kk] * Bbar[ll, ll] - Bbar[kk, ll] ** 2).min())
    else:
        delta1 = eta = eta_p = math.inf

    sep_ok = bool(eta > 0 and gamma > 0)
    xi = math.sqrt(eta / sigma) if sep_ok and K > 1 else None
    if Kp < K and not sep_ok:
        flags.append("separation-hypothesis-violated")

    separation = None
    if params.vartheta is None and K > 1:
        rows = H / phi_norm[:, None]
        separation = float(min(_pairwise_rows(rows, lambda a, b: np.linalg.norm(a - b))))

    beta = float(np.diag(Bbar).max())
    cos_ok = bool(eta_p > 0 and gamma > 0 and np.diag(Bbar).min() > 0)
    xi_p = None
    if cos_ok and K > 1:
        xi_p = math.sqrt(max(0.0, 1.0 - eta_p * gamma / (sigma * beta**2)))
    if Kp < K and not cos_ok:
        flags.append("cosine-hypothesis-violated")

    max_cos = None
    if K > 1:
        norms = np.linalg.norm(H, axis=1)
        if np.all(norms > 0):
            Hn = H / norms[:, None]
            max_cos = float(max(_pairwise_rows(Hn, lambda a, b: float(a @ b))))

    delta = delta1 if Kp == K else (xi if xi is not None else 0.0)
    return ModelDiagnostics(
        K=K,
        K_prime=Kp,
        alpha_n=float(B.max()),
        sigma_n=sigma,
        gamma_n=gamma,
        delta_n=delta,
        delta1_n=delta1,
        eta_n=eta,
        xi_n=xi,
        separation=separation,
        eta_prime_n=eta_p,
        beta_n=beta,
        xi_prime_n=xi_p,
        max_cross_cosine=max_cos,
        separation_hypothesis=sep_ok,
        cosine_hypothesis=cos_ok,
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# benchmark models

MODEL3_C = np.array(
    [
        [2 * math.sin(0.0) / 3, 2 * math.cos(0.0) / 3],
        [math.sin(math.pi / 5) / 2, math.cos(math.pi / 5) / 2],
        [5 * math.sin(2 * math.pi / 5) / 6, 5 * math.cos(2 * math.pi / 5) / 6],
    ]
)

BENCHMARK_MODELS = ("model1", "model2", "model3", "model4", "model5", "model6", "planted")


def planted_link_matrix(K: int, alpha: float, lam: float) -> np.ndarray:
    """``alpha * lam * I + alpha * (1 - lam) * 11^T``."""
    return alpha * lam * np.eye(K) + alpha * (1.0 - lam) * np.ones((K, K))


def _random_B(K, diag_range, off_range, rng):
    B = np.zeros((K, K))
    B[np.diag_indices(K)] = rng.uniform(*diag_range, size=K)
    iu, ju = np.triu_indices(K, k=1)
    off = rng.uniform(*off_range, size=iu.shape[0])
    B[iu, ju] = off
    B[ju, iu] = off
    return B


def _mixture_vartheta(g, values, probs, rng):
    u = rng.random(g.shape[0])
    th = np.asarray(values, dtype=float)[np.searchsorted(np.cumsum(probs), u, side="right")]
    cmax = np.zeros(g.max() + 1)
    np.maximum.at(cmax, g, th)
    return th / cmax[g]


def _strict_balanced(n, K, name):
    if n % K:
        raise ValueError(f"{name} needs n divisible by {K} for balanced communities, got n={n}")
    return labels_from_sizes([n // K] * K)


def make_benchmark_model(name: str, n: int, rng=None, *, K=3, alpha=0.2, lam=0.5) -> SbmParams:
    """Parameters of one of the benchmark models.

    ``model1``..``model6`` are the fixed simulation designs (K = 3);
    ``planted`` is the homogeneous model with diagonal ``alpha`` and
    off-diagonal ``alpha (1 - lam)``, with sizes as balanced as ``n``
    allows. Random draws are taken from ``rng`` in this order: diagonal of
    ``B``, strict upper triangle of ``B`` row by row, then one uniform per
    node for the propensities.
    """
    name = name.lower()
    rng = as_generator(rng)
    if name == "planted":
        g = labels_from_sizes(balanced_sizes(n, K))
        return SbmParams(g, planted_link_matrix(K, alpha, lam))
    if name == "model1":
        g = _strict_balanced(n, 3, name)
        return SbmParams(g, _random_B(3, (0.2, 0.3), (0.01, 0.1), rng))
    if name == "model2":
        if n % 6:
            raise ValueError(f"model2 needs n divisible by 6 for proportions 1/6, 1/2, 1/3, got n={n}")
        g = labels_from_sizes([n // 6, n // 2, n // 3])
        return SbmParams(g, _random_B(3, (0.2, 0.3), (0.01, 0.1), rng))
    if name == "model3":
        g = _strict_balanced(n, 3, name)
        return SbmParams(g, MODEL3_C @ MODEL3_C.T)
    if name in ("model4", "model5", "model6"):
        g = _strict_balanced(n, 3, name)
        if name == "model6":
            B = MODEL3_C @ MODEL3_C.T
        else:
            B = _random_B(3, (0.4, 0.6), (0.01, 0.2), rng)
        if name == "model5":
            th = _mixture_vartheta(g, [0.1, 0.2, 1.0], [0.4, 0.4, 0.2], rng)
        else:
            th = _mixture_vartheta(g, [0.2, 1.0], [0.8, 0.2], rng)
        return SbmParams(g, B, th)
    raise ValueError(f"unknown model {name!r}; expected one of {BENCHMARK_MODELS}")
