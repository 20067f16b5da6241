"""Command-line entry point: ``randsc {synthetic,real,timing,preset-dump}``.

Settings are layered: preset, then ``--config`` JSON, then individual flags.
Results go to ``--out``; a JSON summary is printed on stdout. Failures exit
nonzero with a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiments import PRESETS, ExperimentAborted, RunConfig, preset, run_real, run_synthetic, run_timing

_INT_AXES = {"n", "K", "r", "q"}
_STR_AXES = {"distribution"}

EXIT_USAGE = 2
EXIT_FAILED = 1


def _sweep(text):
    axis, sep, vals = text.partition("=")
    if not sep or not vals:
        raise argparse.ArgumentTypeError(f"expected AXIS=v1,v2,..., got {text!r}")
    parts = [v for v in vals.split(",") if v]
    if axis in _STR_AXES:
        values = parts
    elif axis in _INT_AXES:
        values = [int(v) for v in parts]
    else:
        values = [float(v) for v in parts]
    return {"axis": axis, "values": values}


def _methods(text):
    return [m.strip() for m in text.split(",") if m.strip()]


# flag dest -> RunConfig field
_FLAG_FIELDS = {
    "model": "model", "n": "n", "K": "K", "K_prime": "K_prime", "alpha": "alpha", "lam": "lam",
    "between": "between", "alpha_rate": "alpha_rate", "methods": "methods", "variant": "variant",
    "r": "oversampling", "q": "power", "distribution": "test_distribution",
    "sampling_mode": "sampling_mode", "p": "p", "p_min": "p_min", "target_mean": "target_mean",
    "restarts": "restarts", "sweep": "sweep", "replications": "replications", "seed": "seed",
    "workers": "workers", "out": "out_dir", "edges": "edges", "labels": "labels",
    "delimiter": "delimiter",
}


def _add_common(sp):
    g = sp.add_argument_group("run settings")
    g.add_argument("--preset", help="start from a named preset (see preset-dump --list)")
    g.add_argument("--config", help="JSON file with RunConfig fields")
    g.add_argument("--out", help="output directory")
    g.add_argument("--methods", type=_methods, help="comma list of plain, rp, rs, rs@P")
    g.add_argument("--K", type=int, help="number of communities")
    g.add_argument("--K-prime", dest="K_prime", type=int, help="target rank (default: rank of B, or K)")
    g.add_argument("--variant", choices=["auto", "plain", "spherical"])
    g.add_argument("--r", "--oversampling", dest="r", type=int, help="sketch oversampling")
    g.add_argument("--q", "--power", dest="q", type=int, help="power iterations")
    g.add_argument("--distribution", choices=["gaussian", "uniform", "rademacher"])
    g.add_argument("--sampling-mode", dest="sampling_mode", choices=["uniform", "row_norm"])
    g.add_argument("--p", type=float, help="edge keeping probability")
    g.add_argument("--p-min", dest="p_min", type=float)
    g.add_argument("--target-mean", dest="target_mean", type=float)
    g.add_argument("--restarts", type=int, help="k-means restarts")
    g.add_argument("--replications", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("-v", "--verbose", action="store_true")


def _add_model(sp):
    g = sp.add_argument_group("model")
    g.add_argument("--model", help="planted or model1..model6")
    g.add_argument("--n", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--lam", type=float)
    g.add_argument("--between", type=float, help="between-community probability (sets lam)")
    g.add_argument("--alpha-rate", dest="alpha_rate", type=float, help="alpha = rate / sqrt(n)")
    g.add_argument("--no-deviation", dest="deviation", action="store_false", default=None,
                   help="skip the spectral deviation metric")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randsc", description="Randomized spectral clustering experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    syn = sub.add_parser("synthetic", help="sweep over block-model settings")
    _add_common(syn)
    _add_model(syn)
    syn.add_argument("--sweep", action="append", type=_sweep, metavar="AXIS=V1,V2",
                     help="sweep axis; give twice for a two-way grid")

    real = sub.add_parser("real", help="cluster a graph read from an edge list")
    _add_common(real)
    real.add_argument("--edges", help="whitespace-separated edge list")
    real.add_argument("--labels", help="ground-truth labels (node label, or one label per line)")
    real.add_argument("--delimiter")
    real.add_argument("--one-indexed", dest="one_indexed", action="store_true", default=None)

    tim = sub.add_parser("timing", help="median stage times on synthetic graphs")
    _add_common(tim)
    _add_model(tim)

    dump = sub.add_parser("preset-dump", help="print preset configurations as JSON")
    dump.add_argument("name", nargs="?", help="preset name (omit for all)")
    dump.add_argument("--list", action="store_true", help="only list preset names")
    return parser


def config_from_args(args, kind: str) -> RunConfig:
    d = {}
    if args.preset:
        d.update(preset(args.preset).to_dict())
    if args.config:
        with open(args.config) as fh:
            d.update(json.load(fh))
    for dest, fld in _FLAG_FIELDS.items():
        val = getattr(args, dest, None)
        if val is not None:
            d[fld] = val
    for extra in ("deviation", "one_indexed"):
        val = getattr(args, extra, None)
        if val is not None:
            d[extra] = val
    d["kind"] = kind
    if kind == "timing" and not args.preset:
        base = dict(PRESETS["timing"])
        base.pop("description", None)
        d = {**base, **d}
    return RunConfig.from_dict(d)


def _error(kind, message, details=None, code=EXIT_FAILED):
    payload = {"error": kind, "message": message}
    if details is not None:
        payload["details"] = details
    print(json.dumps(payload, default=str), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "preset-dump":
        if args.list:
            print(json.dumps(sorted(PRESETS)))
            return 0
        try:
            names = [args.name] if args.name else sorted(PRESETS)
            out = {name: preset(name).to_dict() for name in names}
        except ValueError as exc:
            return _error("ConfigError", str(exc), code=EXIT_USAGE)
        print(json.dumps(out[args.name] if args.name else out, indent=2, sort_keys=True))
        return 0

    try:
        cfg = config_from_args(args, args.command)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        return _error("ConfigError", str(exc), code=EXIT_USAGE)

    try:
        if args.command == "synthetic":
            report = run_synthetic(cfg)
            summary = {"rows": len(report.rows), "out_dir": cfg.out_dir, "aggregate": report.aggregate()}
        elif args.command == "real":
            report = run_real(cfg)
            summary = {"rows": len(report.rows), "out_dir": cfg.out_dir,
                       "meta": {k: v for k, v in report.meta.items() if k != "config"},
                       "aggregate": report.aggregate()}
        else:
            summary = run_timing(cfg)
    except ExperimentAborted as exc:
        return _error("ExperimentAborted", str(exc), exc.summary)
    except (OSError, ValueError) as exc:
        return _error(type(exc).__name__, str(exc))
    print(json.dumps(summary, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
