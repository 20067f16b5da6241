"""A small reproducible sweep through the experiment harness.

Varies the keeping probability of the sparsified pipeline on a planted
model and prints the per-setting means. Graphs are shared across the
``p`` axis, so the settings are compared on identical inputs. The same
run from the shell:

    randsc synthetic --n 600 --methods plain,rs --sweep p=0.3,0.5,0.7,0.9 \
        --replications 5 --no-deviation
"""

from randsc.experiments import RunConfig, run_synthetic

cfg = RunConfig(model="planted", n=600, K=3, alpha=0.2, lam=0.5, methods=("plain", "rs"),
                sweep=[{"axis": "p", "values": [0.3, 0.5, 0.7, 0.9]}],
                replications=5, deviation=False)
report = run_synthetic(cfg)
print(f"{'p':>4} {'method':<6} {'mean L1':>8} {'mean ARI':>9}")
for row in report.aggregate():
    print(f"{row['p']:>4} {row['method']:<6} {row['l1_mean']:8.4f} {row['ari_mean']:9.4f}")
