"""
Seeded experiment runner: synthetic sweeps, labelled or unlabelled real
graphs, and stage timings.

A run is described by a :class:`RunConfig`. Sweeps expand into grid
points; each (grid point, replication) draws one model and one graph, and
every requested method clusters that same graph so comparisons are paired.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import math
import os
import platform
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy

from ._base import EigensolverError, RankDeficiencyWarning
from .clustering import KMeansOptions, rp_spectral_cluster, rs_spectral_cluster, spectral_cluster
from .graph import load_edge_list
from .linalg import DISTRIBUTIONS, SketchConfig
from .metrics import (
    ExperimentReport,
    b_error,
    deviation_norm,
    estimate_B,
    misclassification_l1,
    pair_metrics,
)
from .sampling import SamplingConfig
from .sbm import BENCHMARK_MODELS, make_benchmark_model, population_operator, sample_graph

__all__ = [
    "RunConfig",
    "PRESETS",
    "preset",
    "ExperimentAborted",
    "run_synthetic",
    "run_real",
    "run_timing",
    "parse_method",
    "load_labels",
]

log = logging.getLogger(__name__)

SWEEP_AXES = ("n", "alpha", "K", "p", "r", "q", "distribution", "between")
MODEL_AXES = ("n", "alpha", "K", "between")
METHOD_NAMES = ("plain", "rp", "rs")
KINDS = ("synthetic", "real", "timing")
DC_MODELS = ("model4", "model5", "model6")

# sweep axis -> RunConfig field
_AXIS_FIELD = {"n": "n", "alpha": "alpha", "K": "K", "p": "p", "r": "oversampling",
               "q": "power", "distribution": "test_distribution", "between": "between"}


class ExperimentAborted(RuntimeError):
    """Too many replications failed at one grid point."""

    def __init__(self, message, summary):
        super().__init__(message)
        self.summary = summary


def parse_method(method: str):
    """``"rs@0.8"`` -> ``("rs", 0.8)``; plain names carry no override."""
    name, _, arg = method.partition("@")
    if name not in METHOD_NAMES:
        raise ValueError(f"unknown method {method!r}; expected one of {METHOD_NAMES} (rs may take @p)")
    if not arg:
        return name, None
    if name != "rs":
        raise ValueError(f"only rs accepts a sampling-rate override, got {method!r}")
    p = float(arg)
    if not (0 < p <= 1):
        raise ValueError(f"sampling rate in {method!r} must lie in (0, 1]")
    return name, p


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run.

    Model: ``model`` is one of the benchmark names; ``planted`` uses ``alpha``
    (largest link probability) and ``lam`` (diagonal share). ``between``
    overrides ``lam`` through ``lam = 1 - between / alpha``, and
    ``alpha_rate`` makes ``alpha = alpha_rate / sqrt(n)``.

    ``sweep`` is a list of ``{"axis": name, "values": [...]}`` (at most two;
    several axes form a cartesian grid).
    """

    kind: str = "synthetic"
    model: str = "planted"
    n: int = 1152
    K: int = 3
    K_prime: int | None = None
    alpha: float = 0.2
    lam: float = 0.5
    between: float | None = None
    alpha_rate: float | None = None
    methods: tuple = ("plain", "rp", "rs")
    variant: str = "auto"
    oversampling: int = 10
    power: int = 2
    test_distribution: str = "gaussian"
    sampling_mode: str = "uniform"
    p: float = 0.7
    p_min: float = 0.1
    target_mean: float = 0.7
    restarts: int = 50
    kmeans_max_iter: int = 300
    eig_tol: float = 1e-8
    sweep: tuple = ()
    replications: int = 20
    seed: int = 0
    deviation: bool = True
    workers: int = 1
    fail_threshold: float = 0.5
    out_dir: str | None = None
    edges: str | None = None
    labels: str | None = None
    one_indexed: bool = False
    delimiter: str | None = None
    description: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "sweep", tuple(
            {"axis": s["axis"], "values": list(s["values"])} for s in self.sweep))
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        for m in self.methods:
            parse_method(m)
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.model not in BENCHMARK_MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {BENCHMARK_MODELS}")
        if self.variant not in ("auto", "plain", "spherical"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.test_distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown test distribution {self.test_distribution!r}")
        if len(self.sweep) > 2:
            raise ValueError("at most two sweep axes are supported")
        for s in self.sweep:
            if s["axis"] not in SWEEP_AXES:
                raise ValueError(f"unknown sweep axis {s['axis']!r}; expected one of {SWEEP_AXES}")
            if not s["values"]:
                raise ValueError(f"sweep over {s['axis']!r} has no values")
        if not (0 < self.fail_threshold <= 1):
            raise ValueError("fail_threshold must lie in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["methods"] = list(self.methods)
        d["sweep"] = [dict(s) for s in self.sweep]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    # -- derived ---------------------------------------------------------
    def grid(self) -> list[dict]:
        axes = [s["axis"] for s in self.sweep]
        values = [s["values"] for s in self.sweep]
        return [dict(zip(axes, combo)) for combo in itertools.product(*values)]

    def at(self, point: dict) -> "RunConfig":
        return dataclasses.replace(self, sweep=(), **{_AXIS_FIELD[a]: v for a, v in point.items()})

    def effective_alpha(self) -> float:
        return self.alpha_rate / math.sqrt(self.n) if self.alpha_rate is not None else self.alpha

    def effective_lam(self) -> float:
        if self.between is None:
            return self.lam
        return 1.0 - self.between / self.effective_alpha()

    def effective_variant(self) -> str:
        if self.variant != "auto":
            return self.variant
        return "spherical" if self.model in DC_MODELS else "plain"

    def sampling_config(self, p_override=None) -> SamplingConfig:
        return SamplingConfig(mode=self.sampling_mode,
                              p=self.p if p_override is None else p_override,
                              p_min=self.p_min, target_mean=self.target_mean)

    def kmeans_options(self) -> KMeansOptions:
        return KMeansOptions(restarts=self.restarts, max_iter=self.kmeans_max_iter)


# ---------------------------------------------------------------------------
# presets

_NGRID = [200, 400, 600, 800, 1000, 1200]
_MODEL_NGRID = [240, 480, 720, 960, 1200]
_BETWEEN = [0.06, 0.08, 0.10, 0.12, 0.14]


def _sw(axis, values):
    return {"axis": axis, "values": list(values)}


PRESETS = {
    "experiment1": dict(model="planted", K=3, alpha=0.2, lam=0.5, sweep=[_sw("n", _NGRID)],
                        description="effect of n; K=3, alpha=0.2, between 0.1, r=10, q=2, p=0.7"),
    "experiment2": dict(model="planted", n=1152, K=3, lam=0.5,
                        sweep=[_sw("alpha", [0.05, 0.1, 0.15, 0.2, 0.25, 0.3])],
                        description="effect of alpha at n=1152; between = alpha/2"),
    "experiment3": dict(model="planted", n=1152, alpha=0.2, lam=0.5, sweep=[_sw("K", range(2, 9))],
                        description="effect of K at n=1152; alpha=0.2, between 0.1"),
    "experiment4": dict(model="planted", K=2, alpha_rate=2.0, lam=0.5, sweep=[_sw("n", _NGRID)],
                        description="alpha = 2/sqrt(n), between = 1/sqrt(n), K=2"),
    "fig7": dict(model="planted", n=1152, K=3, alpha=0.2, methods=["rp"],
                 sweep=[_sw("r", [0, 4, 8, 12]), _sw("between", _BETWEEN)],
                 description="oversampling r against the between-cluster probability"),
    "fig7_q": dict(model="planted", n=1152, K=3, alpha=0.2, methods=["rp"],
                   sweep=[_sw("q", [2, 4, 6]), _sw("between", _BETWEEN)],
                   description="power q against the between-cluster probability"),
    "fig7_dist": dict(model="planted", n=1152, K=3, alpha=0.2, methods=["rp"],
                      sweep=[_sw("distribution", list(DISTRIBUTIONS)), _sw("between", _BETWEEN)],
                      description="test-matrix distribution against the between-cluster probability"),
    "fig8": dict(model="planted", n=1152, K=3, alpha=0.2, methods=["rs"],
                 sweep=[_sw("p", [0.6, 0.7, 0.8, 0.9]), _sw("between", _BETWEEN)],
                 description="sampling rate p against the between-cluster probability"),
    "real": dict(kind="real", methods=["plain", "rp", "rs@0.7", "rs@0.8"], K=2,
                 description="real graph; pass edges (and optionally labels)"),
    "timing": dict(kind="timing", model="planted", n=4096, K=3, alpha=0.2, lam=0.5,
                   methods=["plain", "rp", "rs"], replications=10, deviation=False,
                   description="stage timings on one synthetic graph size"),
}
for _i in range(1, 7):
    PRESETS[f"model{_i}"] = dict(model=f"model{_i}", K=3, sweep=[_sw("n", _MODEL_NGRID)],
                                 description=f"benchmark model {_i} over n")


def preset(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    d = dict(PRESETS[name])
    d.update(overrides)
    return RunConfig.from_dict(d)


# ---------------------------------------------------------------------------
# seeds


def _model_ids(grid):
    ids, seen = [], {}
    for point in grid:
        key = tuple((a, point[a]) for a in point if a in MODEL_AXES)
        ids.append(seen.setdefault(key, len(seen)))
    return ids


def _graph_seed(base, model_id, rep):
    # hyper-parameter axes share graphs, so their comparisons are paired
    return np.random.SeedSequence(base, spawn_key=(0, model_id, rep))


def _method_seed(base, grid_index, rep, method):
    return np.random.SeedSequence(base, spawn_key=(1, grid_index, rep, zlib.crc32(method.encode())))


# ---------------------------------------------------------------------------
# one replication


def _run_method(method, A, cfg, K, K_prime, rng):
    name, p_override = parse_method(method)
    variant = cfg.effective_variant()
    km = cfg.kmeans_options()
    t = {}
    if name == "plain":
        res = spectral_cluster(A, K, K_prime, variant, km, rng=rng, tol=cfg.eig_tol, timings=t)
        approx = A
    elif name == "rp":
        sk = SketchConfig(target_rank=K_prime, oversampling=cfg.oversampling, power=cfg.power,
                          test_distribution=cfg.test_distribution)
        res = rp_spectral_cluster(A, K, K_prime, sk, variant, km, rng=rng, timings=t)
        approx = res.approx
    else:
        res = rs_spectral_cluster(A, K, K_prime, cfg.sampling_config(p_override), variant, km,
                                  rng=rng, tol=cfg.eig_tol, timings=t)
        approx = res.basis
    return res.clustering, approx, t


def _nan_metrics():
    return dict(deviation=math.nan, l1=math.nan, b_err=math.nan,
                f1=math.nan, nmi=math.nan, ari=math.nan)


def _timing_row(grid, rep, method, t):
    sample = t.get("sample", 0.0)
    eig = t.get("eig", 0.0)
    km = t.get("kmeans", 0.0)
    return {"grid": grid, "rep": rep, "method": method, "sample_ms": 1e3 * sample,
            "eig_ms": 1e3 * eig, "kmeans_ms": 1e3 * km, "total_ms": 1e3 * (sample + eig + km)}


def _replicate(task):
    """One (grid point, replication): returns row and timing dicts for every method."""
    cfg, point, grid_index, model_id, rep = task
    pc = cfg.at(point)
    n, K = pc.n, pc.K
    graph_rng = np.random.default_rng(_graph_seed(cfg.seed, model_id, rep))
    rows, times = [], []
    base = {a: point[a] for a in point}
    base.update(grid=grid_index, rep=rep, n=n, K=K)
    try:
        params = make_benchmark_model(pc.model, n, graph_rng, K=K,
                                      alpha=pc.effective_alpha(), lam=pc.effective_lam())
        A = sample_graph(params, graph_rng)
    except ValueError as exc:
        for m in cfg.methods:
            rows.append({**base, "method": m, "seed": "", "K_prime": "", **_nan_metrics(),
                         "status": "failed", "error": f"model: {exc}"})
        return rows, times
    K_prime = pc.K_prime or params.K_prime
    P = population_operator(params)
    for m in cfg.methods:
        ss = _method_seed(cfg.seed, grid_index, rep, m)
        row = {**base, "method": m, "seed": int(ss.generate_state(1)[0]), "K_prime": K_prime}
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RankDeficiencyWarning)
                cl, approx, t = _run_method(m, A, pc, K, K_prime, np.random.default_rng(ss))
                l1 = misclassification_l1(cl.labels, params.g, K)
                met = pair_metrics(cl.labels, params.g)
                if params.is_degree_corrected:
                    berr = math.nan
                else:
                    berr = b_error(estimate_B(approx, cl.labels, K), params.B, l1.perm)
                dev = (deviation_norm(approx, P, rng=np.random.default_rng(ss.spawn(1)[0]))
                       if pc.deviation else math.nan)
            row.update(deviation=dev, l1=float(l1), b_err=berr, **met, status="ok", error="")
            times.append(_timing_row(grid_index, rep, m, t))
        except (EigensolverError, ValueError) as exc:
            log.warning("grid %d rep %d method %s failed: %s", grid_index, rep, m, exc)
            row.update(**_nan_metrics(), status="failed", error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
    return rows, times


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _machine():
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "platform": platform.platform(),
            "cpus": os.cpu_count()}


def run_synthetic(cfg: RunConfig) -> ExperimentReport:
    """Run every grid point x replication x method and collect the report.

    Failed replications are kept as rows with ``status="failed"``. If more
    than ``cfg.fail_threshold`` of the runs at a grid point fail the whole
    experiment stops with :class:`ExperimentAborted`. The returned report
    is written to ``cfg.out_dir`` when that is set.
    """
    grid = cfg.grid() or [{}]
    axes = tuple(s["axis"] for s in cfg.sweep)
    model_ids = _model_ids(grid)
    report = ExperimentReport(axes=axes, meta={"config": cfg.to_dict(), "grid": grid})
    for gi, point in enumerate(grid):
        tasks = [(cfg, point, gi, model_ids[gi], rep) for rep in range(cfg.replications)]
        results = _map(_replicate, tasks, cfg.workers)
        point_rows = [r for rows, _ in results for r in rows]
        failed = sum(r["status"] != "ok" for r in point_rows)
        for rows, times in results:
            for r in rows:
                report.rows.append(r)
            report.times.extend(times)
        if failed > cfg.fail_threshold * len(point_rows):
            report.sort()
            reasons = sorted({r["error"] for r in point_rows if r["status"] != "ok"})
            summary = {"grid": gi, "point": point, "failed": failed,
                       "runs": len(point_rows), "reasons": reasons[:5]}
            if cfg.out_dir:
                report.write(cfg.out_dir)
            raise ExperimentAborted(
                f"{failed} of {len(point_rows)} runs failed at grid point {gi} ({point})", summary)
    report.sort()
    if cfg.out_dir:
        report.write(cfg.out_dir)
    return report


# ---------------------------------------------------------------------------
# real data


def load_labels(path, node_ids):
    """Ground-truth labels aligned with ``node_ids``.

    Two-column files map node id to label; one-column files list labels in
    the order of the sorted node ids. Labels are recoded to ``0..K-1``.
    """
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    node_ids = np.asarray(node_ids)
    if lines and len(lines[0]) >= 2:
        table = {int(tok[0]): tok[1] for tok in lines}
        missing = [int(v) for v in node_ids if int(v) not in table]
        if missing:
            raise ValueError(f"{len(missing)} of {node_ids.shape[0]} graph nodes have no label "
                             f"(first: {missing[0]})")
        raw = [table[int(v)] for v in node_ids]
    else:
        raw = [tok[0] for tok in lines]
        if len(raw) != node_ids.shape[0]:
            raise ValueError(f"labels file has {len(raw)} entries but the graph has "
                             f"{node_ids.shape[0]} nodes")
    _, codes = np.unique(np.asarray(raw), return_inverse=True)
    return codes.astype(np.int64)


def run_real(cfg: RunConfig) -> ExperimentReport:
    """Cluster a user-supplied graph with every method, ``replications`` times.

    With a labels file the metrics compare each method with the truth.
    Without one, each randomized method is compared with plain spectral
    clustering from the same replication (``plain`` is run even if not
    listed).
    """
    if not cfg.edges:
        raise ValueError("real runs need an edge-list path (edges)")
    if not os.path.exists(cfg.edges):
        raise FileNotFoundError(f"edge list not found: {cfg.edges}")
    el = load_edge_list(cfg.edges, delimiter=cfg.delimiter, one_indexed=cfg.one_indexed)
    A = el.graph
    truth = load_labels(cfg.labels, el.node_ids) if cfg.labels else None
    K = cfg.K
    K_prime = cfg.K_prime or K
    mode = "absolute" if truth is not None else "relative"
    methods = list(cfg.methods)
    if mode == "relative" and "plain" not in methods:
        methods.insert(0, "plain")
    meta = {"config": cfg.to_dict(), "mode": mode, "n": A.n, "edges": A.nnz,
            "duplicates": el.n_duplicates, "self_loops": el.n_self_loops,
            "isolated": el.n_isolated}
    report = ExperimentReport(meta=meta)
    for rep in range(cfg.replications):
        plain_labels = None
        for m in methods:
            ss = _method_seed(cfg.seed, 0, rep, m)
            row = {"grid": 0, "rep": rep, "method": m, "seed": int(ss.generate_state(1)[0]),
                   "n": A.n, "K": K, "K_prime": K_prime, **_nan_metrics(), "status": "ok", "error": ""}
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RankDeficiencyWarning)
                    cl, _, t = _run_method(m, A, cfg, K, K_prime, np.random.default_rng(ss))
            except (EigensolverError, ValueError) as exc:
                row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
                report.add(row)
                continue
            report.times.append(_timing_row(0, rep, m, t))
            if m == "plain":
                plain_labels = cl.labels
            if truth is not None:
                row.update(pair_metrics(cl.labels, truth))
                if truth.max() < K:
                    row["l1"] = float(misclassification_l1(cl.labels, truth, K))
            elif m != "plain" and plain_labels is not None:
                row.update(pair_metrics(cl.labels, plain_labels))
            report.add(row)
    report.sort()
    if mode == "relative":
        report.rows = [r for r in report.rows if r["method"] != "plain" or "plain" in cfg.methods]
    if cfg.out_dir:
        report.write(cfg.out_dir)
    return report


# ---------------------------------------------------------------------------
# timing


def run_timing(cfg: RunConfig) -> dict:
    """Median per-stage wall time of each method over ``replications`` graphs.

    ``rs`` is reported both with and without the sparsification time.
    Writes ``timing.csv`` and ``timing.json`` when ``out_dir`` is set.
    """
    times = {m: [] for m in cfg.methods}
    for rep in range(cfg.replications):
        graph_rng = np.random.default_rng(_graph_seed(cfg.seed, 0, rep))
        params = make_benchmark_model(cfg.model, cfg.n, graph_rng, K=cfg.K,
                                      alpha=cfg.effective_alpha(), lam=cfg.effective_lam())
        A = sample_graph(params, graph_rng)
        K_prime = cfg.K_prime or params.K_prime
        for m in cfg.methods:
            rng = np.random.default_rng(_method_seed(cfg.seed, 0, rep, m))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RankDeficiencyWarning)
                _, _, t = _run_method(m, A, cfg, cfg.K, K_prime, rng)
            times[m].append(_timing_row(0, rep, m, t))
    table = []
    for m, ts in times.items():
        med = {c: float(np.median([t[c] for t in ts])) for c in ("sample_ms", "eig_ms", "kmeans_ms", "total_ms")}
        entry = {"method": m, "runs": len(ts), **med,
                 "total_excl_sample_ms": float(np.median([t["total_ms"] - t["sample_ms"] for t in ts]))}
        table.append(entry)
    out = {"machine": _machine(), "n": cfg.n, "model": cfg.model, "table": table}
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        cols = ("method", "runs", "sample_ms", "eig_ms", "kmeans_ms", "total_ms", "total_excl_sample_ms")
        with open(os.path.join(cfg.out_dir, "timing.csv"), "w") as fh:
            fh.write(",".join(cols) + "\n")
            for e in table:
                fh.write(",".join(str(e[c]) for c in cols) + "\n")
        with open(os.path.join(cfg.out_dir, "timing.json"), "w") as fh:
            json.dump(out, fh, indent=2)
    return out
