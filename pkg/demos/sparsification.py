"""Edge sparsification keeps the matrix unbiased while dropping edges.

Uniform sampling keeps every edge with the same probability; row-norm
sampling keeps edges between low-degree nodes more often. Both rescale a
kept edge by one over its keeping probability, so the average of many
sparsified copies approaches the original matrix.
"""

import numpy as np

from randsc import SamplingConfig, make_benchmark_model, sample_graph, sparsify

params = make_benchmark_model("model5", 600, rng=0)
A = sample_graph(params, 1)
print(f"original graph: {A.nnz} edges")

for cfg in (SamplingConfig(p=0.5), SamplingConfig(mode="row_norm", target_mean=0.5)):
    S = sparsify(A, cfg, np.random.default_rng(0))
    print(f"{cfg.mode:>8}: kept {S.nnz} edges ({S.nnz / A.nnz:.1%})")

small = sample_graph(make_benchmark_model("planted", 30, alpha=0.4), 2)
dense = small.to_dense()
cfg = SamplingConfig(p=0.3)
for draws in (10, 100, 1000, 10000):
    mean = sum(sparsify(small, cfg, np.random.default_rng(s)).to_dense() for s in range(draws)) / draws
    print(f"mean of {draws:>5} copies: max entry error {np.abs(mean - dense).max():.3f}")
