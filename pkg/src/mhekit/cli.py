"""Command-line interface: simulate -> estimate -> analyze pipelines plus
experiment presets and run comparison.

Exit codes: 0 on success, 2 on validation errors (bad arguments, malformed
inputs), 3 on solver failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import CostSpec, DataBatch, EstimateSequence, SolverFailure, ValidationError
from .models import get_model
from .simulate import InputProfile, NoiseSpec, Overlay, simulate
from .solver import SolverOptions
from .estimators import (
    AeConfig,
    approximate_estimator,
    delayed_mhe,
    fie,
    fixed_interval_smoother,
    infinite_horizon_benchmark,
    kalman_filter,
    mhe,
    mhe_prior,
)
from .analysis import performance, regret, sse
from .presets import PRESET_NAMES, compare, default_cost, preset_config, run_preset

SCHEMES = ("fie", "mhe", "dmhe", "mhe-prior", "ihe", "ae", "kf", "fis")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _cost_from_config(model, config: dict) -> CostSpec:
    if "cost" in config:
        c = config["cost"]
        return CostSpec(Q=np.asarray(c["Q"]), R=np.asarray(c["R"]), G=np.asarray(c["G"]))
    return default_cost(model.model_id)


def _solver_options(config: dict) -> SolverOptions:
    return SolverOptions(**config.get("solver", {}))


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    config = _load_config(args.config)
    model = get_model(args.model)
    profile_params = config.get("profile", {}).get("params")
    if profile_params is None:
        profile_params = _default_profile_params(args.model, args.profile)
    profile = InputProfile(args.profile, profile_params)
    noise_cfg = config.get("noise")
    if noise_cfg is None:
        noise_cfg = _default_noise_params(args.model)
    noise = NoiseSpec(
        w_bounds=np.asarray(noise_cfg["w_bounds"], dtype=float),
        v_bounds=np.asarray(noise_cfg["v_bounds"], dtype=float),
        w_overlay=Overlay.constant(noise_cfg["w_constant"]) if noise_cfg.get("w_constant") else None,
        v_overlay=Overlay.constant(noise_cfg["v_constant"]) if noise_cfg.get("v_constant") else None,
    )
    x0 = np.asarray(config.get("x0", _default_x0(args.model)), dtype=float)
    batch = simulate(model, x0, profile, noise, T=args.T, seed=args.seed, t0=args.t0)
    batch.save(args.out)
    print(f"wrote {args.out}.csv ({batch.T + 1} rows, model {model.model_id})")
    return 0


def _cmd_estimate(args) -> int:
    config = _load_config(args.config)
    if args.trace:
        config.setdefault("solver", {})["trace"] = True
    data = DataBatch.load(args.infile)
    model = get_model(config.get("model", data.meta.get("model_id")))
    cost = _cost_from_config(model, config)
    options = _solver_options(config)

    if args.scheme == "fie":
        est = fie(data, cost, model=model, options=options)
    elif args.scheme == "mhe":
        _require(args.N is not None, "--N is required for mhe")
        est = mhe(data, cost, args.N, model=model, options=options)
    elif args.scheme == "dmhe":
        _require(args.N is not None, "--N is required for dmhe")
        est = delayed_mhe(data, cost, args.N, args.delta or 0, model=model, options=options)
    elif args.scheme == "mhe-prior":
        _require(args.N is not None, "--N is required for mhe-prior")
        xbar0 = np.asarray(config.get("xbar0", _default_x0(model.model_id)), dtype=float)
        W0 = np.asarray(config["W0"], dtype=float) if "W0" in config else np.eye(model.n)
        est = mhe_prior(
            data, cost, args.N, prior_kind=args.prior, delta=args.delta or 0,
            xbar0=xbar0, W0=W0, weight_update=args.weight_update,
            model=model, options=options,
        )
    elif args.scheme == "ihe":
        est = infinite_horizon_benchmark(data, cost, model=model, options=options)
    elif args.scheme == "ae":
        _require(args.N is not None, "--N is required for ae")
        est = approximate_estimator(
            data, cost, AeConfig(N=args.N, delta=args.delta or 0),
            workers=args.workers, model=model, options=options,
        )
    elif args.scheme == "kf" or args.scheme == "fis":
        Qcov = np.asarray(config["Qcov"]) if "Qcov" in config else np.linalg.inv(cost.Q)
        Rcov = np.asarray(config["Rcov"]) if "Rcov" in config else np.linalg.inv(cost.R)
        x0 = np.asarray(config.get("kf_x0", np.zeros(model.n)), dtype=float)
        P0 = np.asarray(config.get("kf_P0", np.eye(model.n)), dtype=float)
        fn = kalman_filter if args.scheme == "kf" else fixed_interval_smoother
        est = fn(data, model=model, Qcov=Qcov, Rcov=Rcov, x0=x0, P0=P0)
    else:  # pragma: no cover - argparse restricts choices
        raise ValidationError(f"unknown scheme {args.scheme}")

    est.save(args.out)
    print(f"wrote {args.out}.csv (kind {est.kind}, delay {est.delay}, digest {est.digest})")
    if "diagnostics" in est.extras:
        print(f"diagnostics: {est.extras['diagnostics']}")
    if args.trace and "trace" in est.extras:
        trace_path = Path(str(args.out) + ".trace.json")
        trace_path.write_text(json.dumps(est.extras["trace"], indent=1))
        print(f"wrote {trace_path}")
    return 0


def _cmd_analyze(args) -> int:
    truth = DataBatch.load(args.truth)
    model = get_model(truth.meta.get("model_id"))
    cost = _cost_from_config(model, _load_config(args.config))
    benchmark = EstimateSequence.load(args.benchmark) if args.benchmark else None
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows_sse, rows_perf, rows_regret, rows_dev = [], [], [], []
    for path in args.estimates:
        est = EstimateSequence.load(path)
        name = Path(path).stem
        t1, t2 = est.t_start, est.t_end
        if "sse" in metrics:
            rows_sse.append({"estimate": name, "kind": est.kind, "delay": est.delay,
                             "sse": sse(est, truth, t1, t2)})
        if "perf" in metrics:
            rows_perf.append({"estimate": name, "kind": est.kind, "t1": t1, "t2": t2,
                              "J": performance(est, truth, cost, t1, t2, model=model)})
        if "regret" in metrics:
            _require(benchmark is not None, "--benchmark is required for regret")
            a, b = max(t1, benchmark.t_start), min(t2, benchmark.t_end)
            rows_regret.append({"estimate": name, "kind": est.kind, "t1": a, "t2": b,
                                "regret": regret(est, benchmark, truth, cost, a, b, model=model)})
        if "turnpike" in metrics:
            _require(benchmark is not None, "--benchmark is required for turnpike deviations")
            for t in range(max(t1, benchmark.t_start), min(t2, benchmark.t_end) + 1):
                rows_dev.append({"estimate": name, "t": t,
                                 "deviation": float(np.linalg.norm(est.at(t) - benchmark.at(t)))})
    import csv as _csv

    def dump(name, rows):
        if not rows:
            return
        with open(out_dir / name, "w", newline="") as fh:
            writer = _csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {out_dir / name} ({len(rows)} rows)")

    dump("sse.csv", rows_sse)
    dump("perf.csv", rows_perf)
    dump("regret.csv", rows_regret)
    dump("deviation.csv", rows_dev)
    return 0


def _cmd_preset(args) -> int:
    if args.action == "list":
        for name in PRESET_NAMES:
            print(name)
        return 0
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    overrides = _load_config(args.config)
    manifest = run_preset(args.name, overrides=overrides, seeds=seeds,
                          workers=args.workers, out_dir=args.out)
    print(f"preset {args.name}: {len(manifest['metrics'])} metric rows "
          f"-> {Path(args.out) / 'manifest.json'}")
    for scheme, summary in manifest["summary"].items():
        if "sse" in summary:
            s = summary["sse"]
            print(f"  {scheme:24s} sse median {s['median']:.4f} (q25 {s['q25']:.4f}, q75 {s['q75']:.4f})")
    return 0


def _cmd_compare(args) -> int:
    table = compare(args.manifests)
    for row in table["rows"]:
        meds = ", ".join("-" if v is None else f"{v:.6g}" for v in row["medians"])
        print(f"{row['scheme']:28s} {row['metric']:12s} [{meds}] max_delta {row['max_delta']:.3g}")
    return 0


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def _default_x0(model_id: str):
    return {
        "scalar": [1.0],
        "reactor": [3.0, 0.0],
        "cstr": [0.8, 295.0, 0.7],
        "quadrotor": [0.0] * 12,
    }.get(model_id, [0.0])


def _default_profile_params(model_id: str, kind: str) -> dict:
    for preset in PRESET_NAMES:
        cfg = preset_config(preset)
        if cfg.get("model") == model_id and cfg.get("profile", {}).get("kind") == kind:
            return cfg["profile"]["params"]
    return {}


def _default_noise_params(model_id: str) -> dict:
    for preset in PRESET_NAMES:
        cfg = preset_config(preset)
        if cfg.get("model") == model_id and "noise" in cfg and "w_bounds" in cfg["noise"]:
            return cfg["noise"]
    raise ValidationError(f"no default noise for model {model_id!r}; pass --config")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhekit",
                                     description="Finite-horizon state estimation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a ground-truth data batch")
    p.add_argument("--model", required=True)
    p.add_argument("--profile", required=True,
                   choices=("zero", "constant", "sinusoid", "trapezoid",
                            "periodic_refill", "spiral_openloop"))
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--t0", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="run an estimation scheme on a batch")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--scheme", required=True, choices=SCHEMES)
    p.add_argument("--N", type=int)
    p.add_argument("--delta", type=int)
    p.add_argument("--prior", default="filtering",
                   choices=("filtering", "smoothing", "turnpike"))
    p.add_argument("--weight-update", dest="weight_update", default="ekf",
                   choices=("constant", "ekf"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--trace", action="store_true",
                   help="record per-iteration solver diagnostics where applicable")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("analyze", help="compute metrics for estimate files")
    p.add_argument("--estimates", nargs="+", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--benchmark")
    p.add_argument("--metrics", default="sse")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("preset", help="run or list experiment presets")
    p.add_argument("action", choices=("run", "list"))
    p.add_argument("name", nargs="?", default="")
    p.add_argument("--seeds")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="runs")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("compare", help="align metric tables of preset manifests")
    p.add_argument("manifests", nargs="+")
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
