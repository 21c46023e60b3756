"""Experiment presets: parameter bundles and pipeline orchestration for the
five benchmark studies, with per-seed artifacts and a JSON manifest.

Each preset reproduces one study at desk scale (the largest runs are shrunk:
quadrotor horizon 1000 -> 200 steps, random-LTI batch 4803 -> 1200 steps,
state dimension 120 -> 30) while keeping all other parameters at their
published values; paper scale is reachable through overrides.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import CostSpec, DataBatch, EstimateSequence, ValidationError, config_digest
from .models import QUADROTOR_HOVER_SPEED, get_model
from .simulate import InputProfile, NoiseSpec, Overlay, simulate, split_seed, stream
from .solver import HorizonProblem, SolverOptions, solve_linear_horizon
from .estimators import (
    AeConfig,
    approximate_estimator,
    fixed_interval_smoother,
    infinite_horizon_benchmark,
    kalman_filter,
    mhe_horizon_sweep,
    mhe_prior_multi,
)
from .analysis import performance, sse, turnpike_profile

__all__ = ["PRESET_NAMES", "preset_config", "default_cost", "run_preset", "compare"]

PRESET_NAMES = (
    "motivating-scalar",
    "batch-reactor",
    "lti-offline",
    "cstr-online",
    "quadrotor-online",
)


def default_cost(model_id: str, n: Optional[int] = None, p: Optional[int] = None) -> CostSpec:
    """Published weighting matrices for each benchmark system."""
    if model_id == "scalar":
        return CostSpec(Q=[[1.0]], R=[[1.0]], G=[[1.0]])
    if model_id == "reactor":
        return CostSpec(Q=np.eye(2), R=[[1.0]], G=[[1.0]])
    if model_id == "cstr":
        return CostSpec(Q=np.diag([1e3, 1.0, 1e5]), R=[[1.0]], G=[[1.0]])
    if model_id == "quadrotor":
        RG = np.diag([10.0] * 3 + [100.0] * 3)
        return CostSpec(Q=np.diag([1e2] * 3 + [1e4] * 3 + [1e3] * 3 + [1e5] * 3), R=RG, G=RG)
    if model_id.startswith("lti:") or model_id == "lti":
        if n is None or p is None:
            model = get_model(model_id)
            n, p = model.n, model.p
        return CostSpec(Q=np.eye(n), R=np.eye(p), G=np.eye(p))
    raise ValidationError(f"no default cost for model {model_id!r}")


def preset_config(name: str) -> dict:
    """Desk-scale default parameter bundle for a preset (deep copy)."""
    if name == "motivating-scalar":
        return {
            "model": "scalar",
            "T": 30,
            "x0": [1.0],
            "profile": {"kind": "zero", "params": {}},
            "noise": {
                "w_bounds": [0.0], "v_bounds": [0.0],
                "w_constant": [1.0], "v_constant": [1.0],
            },
            "Ns": [10, 20, 30],
            "benchmark_tol": 1e-8,
        }
    if name == "batch-reactor":
        return {
            "model": "reactor",
            "T": 400,
            "x0": [3.0, 0.0],
            "profile": {"kind": "periodic_refill", "params": {"period": 50, "target": [3.0, 0.0]}},
            "noise": {"w_bounds": [0.05, 0.05], "v_bounds": [0.5]},
            "Ns": [40, 70, 100, 130, 160],
            "ae_delta": 0,
            "solver": {"grad_tol": 1e-4, "lm_lambda0": 1e-8},
        }
    if name == "lti-offline":
        return {
            "model": "lti",
            "n": 30, "m": 30, "p": 10,
            "T": 1200,
            "profile_period": 100,
            "noise": {
                "w_uniform": 0.05, "w_overlay_amp": 0.1, "w_overlay_period": 500,
                "v_uniform": 0.1,
            },
            "N": 150,
            "delta": 70,
        }
    if name == "cstr-online":
        return {
            "model": "cstr",
            "T": 200,
            "x0": [0.8, 295.0, 0.7],
            "profile": {"kind": "trapezoid",
                        "params": {"high": 300.0, "low": 275.0, "ramp": 10, "period": 80,
                                   "rest": [0.1]}},
            "noise": {"w_bounds": [5e-3, 1.0, 5e-3], "v_bounds": [3.0]},
            "N": 10,
            "W0_scale": 1e-2,
            "weight_update": "ekf",
            "prior_rel_dev": 0.25,
            "schemes": [["filtering", 0], ["smoothing", 0], ["turnpike", 0],
                        ["turnpike", 1], ["turnpike", 5]],
            "profile_window": [130, 180],
            "solver": {"grad_tol": 1e-5, "lm_lambda0": 1e-8},
        }
    if name == "quadrotor-online":
        return {
            "model": "quadrotor",
            "T": 200,
            "x0": [0.0] * 12,
            "profile": {"kind": "spiral_openloop",
                        "params": {"base": QUADROTOR_HOVER_SPEED * 1.005, "yaw": 0.05,
                                   "wobble": 0.1, "wobble_freq": 1.0 / 80, "ramp": 320}},
            "noise": {"w_bounds": [2e-2] * 3 + [2e-5] * 3 + [2e-3] * 3 + [2e-6] * 3,
                      "v_bounds": [2e-1] * 3 + [5e-2] * 3},
            "N": 30,
            "W0_scale": 10.0,
            "weight_update": "ekf",
            "prior_pos_dev": 1.0,
            "prior_angle_dev": math.pi / 16,
            "schemes": [["filtering", 0], ["smoothing", 0], ["turnpike", 0],
                        ["turnpike", 1], ["turnpike", 3], ["turnpike", 15]],
            "solver": {"grad_tol": 1e-5, "lm_lambda0": 1e-3},
        }
    raise ValidationError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


def _merge(base: dict, overrides: Optional[Mapping]) -> dict:
    out = json.loads(json.dumps(base))
    for k, v in (overrides or {}).items():
        out[k] = v
    return out


def _noise_from_config(cfg: Mapping) -> NoiseSpec:
    w_over = Overlay.constant(cfg["w_constant"]) if cfg.get("w_constant") else None
    v_over = Overlay.constant(cfg["v_constant"]) if cfg.get("v_constant") else None
    return NoiseSpec(w_bounds=cfg["w_bounds"], v_bounds=cfg["v_bounds"],
                     w_overlay=w_over, v_overlay=v_over)


def _solver_options(cfg: Mapping) -> SolverOptions:
    return SolverOptions(**cfg.get("solver", {}))


# ---------------------------------------------------------------------------
# Per-seed pipelines
# ---------------------------------------------------------------------------

def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def _run_scalar(cfg: dict, seed: int, out_dir: Path) -> dict:
    model = get_model(cfg["model"])
    cost = default_cost(cfg["model"])
    noise = _noise_from_config(cfg["noise"])
    profile = InputProfile(cfg["profile"]["kind"], cfg["profile"]["params"])
    T = cfg["T"]
    data = simulate(model, cfg["x0"], profile, noise, T=T, seed=seed)
    data.save(out_dir / "batch")

    def extender(Te: int) -> DataBatch:
        return simulate(model, [cfg["x0"][0] - Te], profile, noise,
                        T=T + 2 * Te, seed=seed, t0=-Te)

    bench = infinite_horizon_benchmark(data, cost, method="extended_window",
                                       tol=cfg["benchmark_tol"], extender=extender)
    bench.save(out_dir / "est-ihe")
    rows = []
    metrics = []
    for N in cfg["Ns"]:
        prob = HorizonProblem(model=model, us=data.inputs[: N + 1],
                              ys=data.outputs[: N + 1], cost=cost, tau=0)
        sol = solve_linear_horizon(prob)
        prof = turnpike_profile([sol], bench, N=N)
        for j in range(N + 1):
            rows.append({"N": N, "offset": j, "deviation": prof.state_dev[0, j]})
        metrics.append({"seed": seed, "scheme": f"window-N{N}",
                        "midpoint_dev": float(prof.state_dev[0, N // 2]),
                        "boundary_dev": float(prof.state_dev[0, 0])})
    _write_csv(out_dir / "deviations.csv", rows, ["N", "offset", "deviation"])
    metrics.append({"seed": seed, "scheme": "ihe",
                    "Te": int(bench.extras["Te"]), "delta": float(bench.extras["delta"])})
    return {"metrics": metrics, "batch_digest": _file_digest(out_dir / "batch.csv")}


def _run_reactor(cfg: dict, seed: int, out_dir: Path) -> dict:
    model = get_model(cfg["model"])
    cost = default_cost(cfg["model"])
    noise = _noise_from_config(cfg["noise"])
    profile = InputProfile(cfg["profile"]["kind"], cfg["profile"]["params"])
    T = cfg["T"]
    opts = _solver_options(cfg)
    data = simulate(model, cfg["x0"], profile, noise, T=T, seed=seed)
    data.save(out_dir / "batch")

    metrics = []
    full, t_full = _timed(infinite_horizon_benchmark, data, cost, options=opts)
    full.save(out_dir / "est-full")
    J_full = performance(full, data, cost, 0, T)
    s_full = sse(full, data)
    metrics.append({"seed": seed, "scheme": "full", "N": "", "J": J_full,
                    "sse": s_full, "runtime": t_full})
    t0 = time.perf_counter()
    mhes = mhe_horizon_sweep(data, cost, cfg["Ns"], options=opts)
    t_mhe = (time.perf_counter() - t0) / len(cfg["Ns"])
    for N in cfg["Ns"]:
        ae, t_ae = _timed(approximate_estimator, data, cost,
                          AeConfig(N=N, delta=cfg["ae_delta"]), options=opts)
        ae.save(out_dir / f"est-ae-N{N}")
        mhes[N].save(out_dir / f"est-mhe-N{N}")
        metrics.append({"seed": seed, "scheme": "ae", "N": N,
                        "J": performance(ae, data, cost, 0, T), "sse": sse(ae, data),
                        "runtime": t_ae})
        metrics.append({"seed": seed, "scheme": "mhe", "N": N,
                        "J": performance(mhes[N], data, cost, 0, T), "sse": sse(mhes[N], data),
                        "runtime": t_mhe})
    return {"metrics": metrics, "batch_digest": _file_digest(out_dir / "batch.csv")}


def _run_lti(cfg: dict, seed: int, out_dir: Path) -> dict:
    n, m, p, T = cfg["n"], cfg["m"], cfg["p"], cfg["T"]
    model = get_model(f"lti:{n}:{m}:{p}:{split_seed(seed, 'model')}")
    cost = default_cost(model.model_id)
    ncfg = cfg["noise"]
    noise = NoiseSpec(
        w_bounds=np.full(n, ncfg["w_uniform"]),
        v_bounds=np.full(p, ncfg["v_uniform"]),
        w_overlay=Overlay(np.full(n, ncfg["w_overlay_amp"]),
                          np.full(n, 1.0 / ncfg["w_overlay_period"]),
                          2.0 * math.pi * np.arange(n) / n),
    )
    profile = InputProfile("sinusoid", {
        "amplitude": np.ones(m), "frequency": np.full(m, 1.0 / cfg["profile_period"]),
        "phase": 2.0 * math.pi * np.arange(m) / m,
    })
    data = simulate(model, np.zeros(n), profile, noise, T=T, seed=seed)
    data.save(out_dir / "batch")

    metrics = []
    full, t_full = _timed(
        solve_linear_horizon,
        HorizonProblem(model=model, us=data.inputs, ys=data.outputs, cost=cost),
    )
    EstimateSequence(t_start=0, estimates=full.xs, delay=0, kind="ihe",
                     config={"model": model.model_id}).save(out_dir / "est-full")
    metrics.append({"seed": seed, "scheme": "full",
                    "J": performance(full.xs, data, cost, 0, T),
                    "sse": sse(full.xs, data), "runtime": t_full})
    ae, t_ae = _timed(approximate_estimator, data, cost,
                      AeConfig(N=cfg["N"], delta=cfg["delta"]), workers=cfg.get("workers", 1))
    ae.save(out_dir / "est-ae")
    metrics.append({"seed": seed, "scheme": "ae", "J": performance(ae, data, cost, 0, T),
                    "sse": sse(ae, data), "runtime": t_ae})
    x0_kf = stream(seed, "kf0").standard_normal(n)
    kf, t_kf = _timed(kalman_filter, data, model, np.eye(n), np.eye(p), x0_kf, np.eye(n))
    kf.save(out_dir / "est-kf")
    metrics.append({"seed": seed, "scheme": "kf", "J": performance(kf, data, cost, 0, T),
                    "sse": sse(kf, data), "runtime": t_kf})
    fis, t_fis = _timed(fixed_interval_smoother, data, model, np.eye(n), np.eye(p),
                        x0_kf, np.eye(n))
    fis.save(out_dir / "est-fis")
    metrics.append({"seed": seed, "scheme": "fis", "J": performance(fis, data, cost, 0, T),
                    "sse": sse(fis, data), "runtime": t_fis})
    return {"metrics": metrics, "batch_digest": _file_digest(out_dir / "batch.csv")}


def _run_cstr(cfg: dict, seed: int, out_dir: Path) -> dict:
    model = get_model(cfg["model"])
    cost = default_cost(cfg["model"])
    noise = _noise_from_config(cfg["noise"])
    profile = InputProfile(cfg["profile"]["kind"], cfg["profile"]["params"])
    T, N = cfg["T"], cfg["N"]
    opts = _solver_options(cfg)
    data = simulate(model, cfg["x0"], profile, noise, T=T, seed=seed)
    data.save(out_dir / "batch")
    x0 = np.asarray(cfg["x0"], dtype=float)
    xbar0 = x0 * (1.0 + cfg["prior_rel_dev"] * stream(seed, "prior").uniform(-1, 1, model.n))
    W0 = cfg["W0_scale"] * np.eye(model.n)

    ihe, t_ihe = _timed(infinite_horizon_benchmark, data, cost, options=opts)
    ihe.save(out_dir / "est-ihe")
    metrics = [{"seed": seed, "scheme": "ihe", "sse": sse(ihe, data), "runtime": t_ihe}]

    by_kind: dict[str, list[int]] = {}
    for kind, delta in cfg["schemes"]:
        by_kind.setdefault(kind, []).append(delta)
    prior_rows = []
    for kind, deltas in by_kind.items():
        collect = tuple(cfg["profile_window"]) if (kind == "turnpike" and cfg.get("profile_window")) else None
        t0 = time.perf_counter()
        runs = mhe_prior_multi(data, cost, N, kind, deltas, xbar0=xbar0, W0=W0,
                               weight_update=cfg["weight_update"], options=opts,
                               collect_windows=collect)
        t_run = (time.perf_counter() - t0) / len(deltas)
        for d, seq in runs.items():
            label = f"{kind}-d{d}"
            seq.save(out_dir / f"est-{label}")
            metrics.append({"seed": seed, "scheme": label,
                            "sse": sse(seq, data, 0, T - d), "runtime": t_run})
        if kind == "turnpike":
            seq = runs[deltas[0]]
            anchors = seq.extras["prior_anchor"]
            means = seq.extras["prior_mean"]
            for t in range(N, T + 1):
                s = int(anchors[t])
                prior_rows.append({
                    "t": t, "anchor": s,
                    "dist_to_ihe": float(np.linalg.norm(means[t] - ihe.at(s))),
                })
            if collect is not None:
                sols = [w for w in seq.extras["window_solutions"]
                        if w.window[1] - w.window[0] == N]
                prof = turnpike_profile(sols, ihe, N=N)
                rows = [{"window_end": int(tau + N), "offset": j,
                         "deviation": float(prof.state_dev[k, j])}
                        for k, tau in enumerate(prof.taus) for j in range(N + 1)]
                _write_csv(out_dir / "window-profile.csv", rows,
                           ["window_end", "offset", "deviation"])
    _write_csv(out_dir / "prior-trace.csv", prior_rows, ["t", "anchor", "dist_to_ihe"])
    if prior_rows:
        dists = np.array([r["dist_to_ihe"] for r in prior_rows])
        quarter = max(len(dists) // 4, 1)
        metrics.append({"seed": seed, "scheme": "turnpike-prior-trace",
                        "first_quarter_dist": float(np.mean(dists[:quarter])),
                        "final_quarter_dist": float(np.mean(dists[-quarter:]))})
    return {"metrics": metrics, "batch_digest": _file_digest(out_dir / "batch.csv")}


def _run_quadrotor(cfg: dict, seed: int, out_dir: Path) -> dict:
    model = get_model(cfg["model"])
    cost = default_cost(cfg["model"])
    noise = _noise_from_config(cfg["noise"])
    profile = InputProfile(cfg["profile"]["kind"], cfg["profile"]["params"])
    T, N = cfg["T"], cfg["N"]
    opts = _solver_options(cfg)
    data = simulate(model, cfg["x0"], profile, noise, T=T, seed=seed)
    data.save(out_dir / "batch")
    rng = stream(seed, "prior")
    xbar0 = np.concatenate([
        rng.uniform(-cfg["prior_pos_dev"], cfg["prior_pos_dev"], 3),
        rng.uniform(-cfg["prior_angle_dev"], cfg["prior_angle_dev"], 3),
        np.zeros(6),
    ])
    W0 = cfg["W0_scale"] * np.eye(model.n)

    metrics = []
    by_kind: dict[str, list[int]] = {}
    for kind, delta in cfg["schemes"]:
        by_kind.setdefault(kind, []).append(delta)
    longest = None
    for kind, deltas in by_kind.items():
        t0 = time.perf_counter()
        runs = mhe_prior_multi(data, cost, N, kind, deltas, xbar0=xbar0, W0=W0,
                               weight_update=cfg["weight_update"], options=opts)
        t_run = (time.perf_counter() - t0) / len(deltas)
        for d, seq in runs.items():
            label = f"{kind}-d{d}"
            seq.save(out_dir / f"est-{label}")
            metrics.append({"seed": seed, "scheme": label,
                            "sse": sse(seq, data, 0, T - d), "runtime": t_run})
            if kind == "turnpike" and (longest is None or d > longest.delay):
                longest = seq
    ihe, t_ihe = _timed(infinite_horizon_benchmark, data, cost, options=opts,
                        warm_from=longest)
    ihe.save(out_dir / "est-ihe")
    metrics.append({"seed": seed, "scheme": "ihe", "sse": sse(ihe, data), "runtime": t_ihe})
    return {"metrics": metrics, "batch_digest": _file_digest(out_dir / "batch.csv")}


_RUNNERS = {
    "motivating-scalar": _run_scalar,
    "batch-reactor": _run_reactor,
    "lti-offline": _run_lti,
    "cstr-online": _run_cstr,
    "quadrotor-online": _run_quadrotor,
}

_DEFAULT_SEEDS = {
    "motivating-scalar": [0],
    "batch-reactor": list(range(10)),
    "lti-offline": [0],
    "cstr-online": list(range(5)),
    "quadrotor-online": list(range(3)),
}


def _seed_worker(args) -> dict:
    name, cfg, seed, seed_dir = args
    out = Path(seed_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[name](cfg, seed, out)


def run_preset(
    name: str,
    overrides: Optional[Mapping] = None,
    seeds: Optional[Sequence[int]] = None,
    workers: int = 1,
    out_dir: str | Path = "runs",
) -> dict:
    """Execute a preset pipeline for the given seeds and write all artifacts.

    Returns the manifest (also written to ``<out_dir>/manifest.json``): the
    full configuration echo, per-seed metric rows, per-scheme summaries
    (median and quartiles), and artifact digests.  Identical inputs
    reproduce identical metric values; a failure leaves a
    ``manifest.partial`` marker naming the failing stage and seed.
    """
    if name not in _RUNNERS:
        raise ValidationError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    cfg = _merge(preset_config(name), overrides)
    seeds = list(seeds) if seeds is not None else list(_DEFAULT_SEEDS[name])
    if len(seeds) == 1 and workers > 1:
        # one replication: spend the workers inside the window solves instead
        cfg.setdefault("workers", workers)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    marker = out_dir / "manifest.partial"

    tasks = [(name, cfg, s, str(out_dir / f"seed-{s}")) for s in seeds]
    t_start = time.perf_counter()
    try:
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_seed_worker, tasks))
        else:
            results = [_seed_worker(t) for t in tasks]
    except Exception as exc:
        marker.write_text(json.dumps({
            "preset": name, "seeds": seeds, "error": str(exc),
        }, indent=2))
        raise

    metrics = [row for res in results for row in res["metrics"]]
    manifest = {
        "preset": name,
        "config": cfg,
        "config_digest": config_digest({"preset": name, "config": cfg, "seeds": seeds}),
        "seeds": seeds,
        "workers": workers,
        "runtime_total": time.perf_counter() - t_start,
        "metrics": metrics,
        "summary": _summarize(metrics),
        "truth_digest": config_digest({str(s): r["batch_digest"]
                                       for s, r in zip(seeds, results)}),
    }
    _write_csv(out_dir / "metrics.csv", metrics, _metric_fields(metrics))
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_jdef))
    if marker.exists():
        marker.unlink()
    return manifest


_NON_DETERMINISTIC = ("runtime",)


def _summarize(metrics: list[dict]) -> dict:
    groups: dict[str, dict[str, list[float]]] = {}
    for row in metrics:
        key = str(row.get("scheme", "")) + (f"-N{row['N']}" if row.get("N", "") != "" else "")
        g = groups.setdefault(key, {})
        for k, v in row.items():
            if k in ("seed", "scheme", "N") or not isinstance(v, (int, float)):
                continue
            g.setdefault(k, []).append(float(v))
    out = {}
    for key, vals in groups.items():
        out[key] = {}
        for metric, xs in vals.items():
            arr = np.asarray(xs)
            out[key][metric] = {
                "median": float(np.median(arr)),
                "q25": float(np.percentile(arr, 25)),
                "q75": float(np.percentile(arr, 75)),
                "count": len(arr),
            }
    return out


def compare(manifests: Sequence[str | Path | Mapping]) -> dict:
    """Aligned per-scheme metric table across runs sharing the same truth.

    Raises when the manifests' truth digests differ (results would not be
    comparable).  Returns rows keyed by (scheme, metric) with per-manifest
    medians and the largest pairwise difference; timing columns are excluded
    from the difference since they are not deterministic.
    """
    loaded = []
    for m in manifests:
        if isinstance(m, Mapping):
            loaded.append(dict(m))
        else:
            loaded.append(json.loads(Path(m).read_text()))
    if not loaded:
        raise ValidationError("nothing to compare")
    digests = {m["truth_digest"] for m in loaded}
    if len(digests) > 1:
        raise ValidationError("manifests do not share truth provenance (digest mismatch)")
    keys = sorted({k for m in loaded for k in m["summary"]})
    rows = []
    for key in keys:
        metrics = sorted({mk for m in loaded for mk in m["summary"].get(key, {})})
        for metric in metrics:
            medians = [m["summary"].get(key, {}).get(metric, {}).get("median") for m in loaded]
            present = [v for v in medians if v is not None]
            row = {
                "scheme": key,
                "metric": metric,
                "medians": medians,
                "max_delta": (max(present) - min(present)) if len(present) > 1 else 0.0,
                "deterministic": metric not in _NON_DETERMINISTIC,
            }
            rows.append(row)
    return {"rows": rows, "n_manifests": len(loaded)}


# ---------------------------------------------------------------------------
# Small file helpers
# ---------------------------------------------------------------------------

def _jdef(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _metric_fields(metrics: list[dict]) -> list[str]:
    fields: list[str] = []
    for row in metrics:
        for k in row:
            if k not in fields:
                fields.append(k)
    return fields


def _write_csv(path: Path, rows: list[dict], fields: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _file_digest(path: Path) -> str:
    import hashlib

    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
