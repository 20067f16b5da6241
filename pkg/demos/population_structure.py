"""Why spectral clustering works on block models.

The expected adjacency matrix of a block model has only as many nonzero
eigenvalues as the link matrix has rank, and its eigenvectors are constant
on each community. This script prints those rows for a small planted model
and for a degree-corrected one, where the rows keep their direction but
not their length.
"""

import numpy as np

from randsc import make_benchmark_model, normalize_rows, population_eigens

np.set_printoptions(precision=4, suppress=True)

planted = make_benchmark_model("planted", 12, K=3, alpha=0.3, lam=0.6)
basis = population_eigens(planted)
print("planted model, n=12, K=3")
print("nonzero eigenvalues:", basis.lambdas)
print("eigenvector rows, one block per community:")
for k in range(planted.K):
    print(f"  community {k}:", basis.U[planted.g == k][0], f"x{int(np.sum(planted.g == k))}")

dc = make_benchmark_model("model4", 30, rng=3)
dc_basis = population_eigens(dc)
print("\ndegree-corrected model4, n=30")
members = np.flatnonzero(dc.g == 0)
_, first = np.unique(dc.vartheta[members], return_index=True)
rows = dc_basis.U[members[first]]
print("propensities in community 0:", dc.vartheta[members[first]])
print("raw rows differ in length inside a community:")
print(rows)
print("after scaling each row to unit length they coincide:")
print(normalize_rows(rows))
