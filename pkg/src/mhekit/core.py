"""Shared data model: measurement batches, solutions, estimate sequences, cost
and certificate records, plus file I/O and validation.

All arrays are float64 and frozen after construction, so every record in this
module can be shared freely across worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

__all__ = [
    "ValidationError",
    "SolverFailure",
    "SingularModelError",
    "DataBatch",
    "CostSpec",
    "SolverStats",
    "HorizonSolution",
    "EstimateSequence",
    "IossCertificate",
    "ValidationReport",
    "validate_batch",
    "config_digest",
]

ESTIMATOR_KINDS = ("fie", "mhe", "delayed_mhe", "mhe_prior", "ihe", "ae", "kf", "fis")


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition or invariant."""


class SolverFailure(RuntimeError):
    """Raised when a horizon solve diverges or stalls.

    ``best`` carries the best iterate found (if any) as ``(x0, ws, cost)``.
    """

    def __init__(self, message: str, best: Optional[tuple] = None):
        super().__init__(message)
        self.best = best


class SingularModelError(ValueError):
    """Raised when a model's dynamics are evaluated at a singular configuration."""


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def config_digest(config: Mapping[str, Any]) -> str:
    """Short stable hash of a JSON-serializable configuration mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


# ---------------------------------------------------------------------------
# DataBatch
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DataBatch:
    """Time-indexed record of inputs, outputs, and (when simulated) the truth.

    A batch spans the absolute time indices ``t0 .. t0+T`` where
    ``T = len(outputs) - 1``.  Inputs and outputs have one row per index;
    ``disturbances`` (when present) has ``T`` rows since w_t drives the step
    from t to t+1.  Missing truth is represented as ``None``, never as zeros.
    """

    t0: int
    inputs: np.ndarray          # (T+1, m)
    outputs: np.ndarray         # (T+1, p)
    states: Optional[np.ndarray] = None        # (T+1, n)
    disturbances: Optional[np.ndarray] = None  # (T, q)
    noises: Optional[np.ndarray] = None        # (T+1, p)
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "inputs", _freeze(np.atleast_2d(self.inputs)))
        object.__setattr__(self, "outputs", _freeze(np.atleast_2d(self.outputs)))
        for name in ("states", "disturbances", "noises"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _freeze(np.atleast_2d(v)))
        if len(self.inputs) != len(self.outputs):
            raise ValidationError(
                f"len(inputs)={len(self.inputs)} != len(outputs)={len(self.outputs)}"
            )
        if self.states is not None and len(self.states) != len(self.outputs):
            raise ValidationError("truth states must have one row per time index")
        if self.disturbances is not None and len(self.disturbances) != self.T:
            raise ValidationError("truth disturbances must have T rows")
        if self.noises is not None and len(self.noises) != len(self.outputs):
            raise ValidationError("truth noises must have one row per time index")

    @property
    def T(self) -> int:
        return len(self.outputs) - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.t0, self.t0 + self.T + 1)

    @property
    def has_truth(self) -> bool:
        return self.states is not None

    def index(self, t: int) -> int:
        k = t - self.t0
        if not 0 <= k <= self.T:
            raise ValidationError(f"time {t} outside batch range [{self.t0}, {self.t0 + self.T}]")
        return k

    def u(self, t: int) -> np.ndarray:
        return self.inputs[self.index(t)]

    def y(self, t: int) -> np.ndarray:
        return self.outputs[self.index(t)]

    def x(self, t: int) -> np.ndarray:
        if self.states is None:
            raise ValidationError("batch carries no ground-truth states")
        return self.states[self.index(t)]

    def window(self, tau: int, length: int) -> "DataBatch":
        """Sub-batch covering ``tau .. tau+length`` (truth dropped)."""
        a, b = self.index(tau), self.index(tau + length)
        return DataBatch(
            t0=tau,
            inputs=self.inputs[a : b + 1],
            outputs=self.outputs[a : b + 1],
            meta=dict(self.meta),
        )

    # -- file format: CSV of rows + JSON manifest sidecar -------------------

    def save(self, path: str | Path) -> None:
        """Write ``<path>.csv`` and ``<path>.json``; round-trips bit-exactly."""
        path = Path(path)
        m = self.inputs.shape[1]
        p = self.outputs.shape[1]
        header = ["t"] + [f"u{i+1}" for i in range(m)] + [f"y{i+1}" for i in range(p)]
        n = q = 0
        if self.has_truth:
            n = self.states.shape[1]
            q = self.disturbances.shape[1] if self.disturbances is not None else 0
            header += [f"x{i+1}" for i in range(n)]
            header += [f"w{i+1}" for i in range(q)]
            header += [f"v{i+1}" for i in range(p)]
        with open(path.with_suffix(".csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(self.T + 1):
                row = [str(self.t0 + k)]
                row += [_fmt(v) for v in self.inputs[k]]
                row += [_fmt(v) for v in self.outputs[k]]
                if self.has_truth:
                    row += [_fmt(v) for v in self.states[k]]
                    if k < self.T and self.disturbances is not None:
                        row += [_fmt(v) for v in self.disturbances[k]]
                    else:
                        row += [""] * q
                    row += [_fmt(v) for v in self.noises[k]] if self.noises is not None else [""] * p
                writer.writerow(row)
        manifest = {
            "format": "mhekit-batch-v1",
            "t0": self.t0,
            "T": self.T,
            "dims": {"m": m, "p": p, "n": n, "q": q},
            "has_truth": self.has_truth,
            "meta": dict(self.meta),
        }
        path.with_suffix(".json").write_text(json.dumps(manifest, indent=2, default=_json_default))

    @staticmethod
    def load(path: str | Path) -> "DataBatch":
        path = Path(path)
        manifest = json.loads(path.with_suffix(".json").read_text())
        dims = manifest["dims"]
        m, p, n, q = dims["m"], dims["p"], dims["n"], dims["q"]
        rows = []
        with open(path.with_suffix(".csv"), newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            rows = list(reader)
        T = len(rows) - 1
        us = np.zeros((T + 1, m))
        ys = np.zeros((T + 1, p))
        xs = np.zeros((T + 1, n)) if manifest["has_truth"] else None
        ws = np.zeros((T, q)) if manifest["has_truth"] and q else None
        vs = np.zeros((T + 1, p)) if manifest["has_truth"] else None
        for k, row in enumerate(rows):
            c = 1
            us[k] = [float(v) for v in row[c : c + m]]
            c += m
            ys[k] = [float(v) for v in row[c : c + p]]
            c += p
            if manifest["has_truth"]:
                xs[k] = [float(v) for v in row[c : c + n]]
                c += n
                if k < T and ws is not None:
                    ws[k] = [float(v) for v in row[c : c + q]]
                c += q
                vs[k] = [float(v) for v in row[c : c + p]]
        return DataBatch(
            t0=manifest["t0"], inputs=us, outputs=ys,
            states=xs, disturbances=ws, noises=vs, meta=manifest["meta"],
        )


def _fmt(v: float) -> str:
    return repr(float(v))


def _plain(v: Any) -> bool:
    """Scalars and shallow containers of scalars (manifest-friendly extras)."""
    if isinstance(v, (bool, int, float, str)):
        return True
    if isinstance(v, dict):
        return all(isinstance(k, str) and _plain(x) for k, x in v.items())
    if isinstance(v, (list, tuple)):
        return len(v) <= 32 and all(_plain(x) for x in v)
    return False


# ---------------------------------------------------------------------------
# Cost specification
# ---------------------------------------------------------------------------

def _check_spd(M: np.ndarray, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValidationError(f"{name} must be square, got {M.shape}")
    if not np.allclose(M, M.T, rtol=1e-12, atol=1e-12):
        raise ValidationError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ValidationError(f"{name} is not positive definite") from None
    return _freeze(0.5 * (M + M.T))


@dataclass(frozen=True)
class CostSpec:
    """Quadratic weights: Q on disturbances, R on output fit, G terminal fit.

    All three must be symmetric positive definite (checked by Cholesky).
    ``prior`` is an optional configuration echo describing prior weighting;
    it is carried into digests but not interpreted here.
    """

    Q: np.ndarray
    R: np.ndarray
    G: np.ndarray
    prior: Optional[Mapping[str, Any]] = None

    def __post_init__(self):
        object.__setattr__(self, "Q", _check_spd(self.Q, "Q"))
        object.__setattr__(self, "R", _check_spd(self.R, "R"))
        object.__setattr__(self, "G", _check_spd(self.G, "G"))

    def as_config(self) -> dict:
        cfg = {"Q": self.Q, "R": self.R, "G": self.G}
        if self.prior is not None:
            cfg["prior"] = dict(self.prior)
        return cfg


# ---------------------------------------------------------------------------
# Horizon solutions and estimate sequences
# ---------------------------------------------------------------------------

@dataclass
class SolverStats:
    iterations: int = 0
    grad_norm: float = math.nan
    status: str = ""
    penalty: float = 0.0
    max_violation: float = 0.0
    cost_trace: Optional[list] = None


@dataclass(frozen=True)
class HorizonSolution:
    """Optimal (x, w) sequences for one finite-horizon problem.

    ``window`` is the absolute index range ``(tau, tau+N)``; ``xs`` has N+1
    rows and ``ws`` has N rows.  ``xs`` always satisfies the dynamics
    recursion exactly because the solver rolls states out from (x0, ws).
    """

    window: tuple[int, int]
    xs: np.ndarray
    ws: np.ndarray
    cost: float
    stats: SolverStats = field(default_factory=SolverStats)

    def __post_init__(self):
        object.__setattr__(self, "xs", _freeze(np.atleast_2d(self.xs)))
        ws = np.asarray(self.ws, dtype=float)
        if ws.ndim != 2:
            ws = ws.reshape(len(self.xs) - 1, -1) if ws.size else ws.reshape(0, 0)
        if len(ws) != len(self.xs) - 1:
            raise ValidationError("ws must have one fewer row than xs")
        object.__setattr__(self, "ws", _freeze(ws))
        if self.cost < -1e-12:
            raise ValidationError(f"cost must be nonnegative, got {self.cost}")
        if self.window[1] - self.window[0] != len(self.xs) - 1:
            raise ValidationError("window length inconsistent with state count")

    def x_at(self, t: int) -> np.ndarray:
        k = t - self.window[0]
        if not 0 <= k < len(self.xs):
            raise ValidationError(f"index {t} outside window {self.window}")
        return self.xs[k]


@dataclass(frozen=True)
class EstimateSequence:
    """Per-time state estimates together with the scheme's delay label.

    ``estimates[k]`` is the estimate for absolute time ``t_start + k``.  An
    estimator with delay d publishes the estimate for time t-d once data
    through t has been consumed, so a run over data ``0..T`` covers ``0..T-d``.
    """

    t_start: int
    estimates: np.ndarray       # (K, n)
    delay: int
    kind: str
    config: Mapping[str, Any] = field(default_factory=dict)
    extras: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ValidationError(f"unknown estimator kind {self.kind!r}")
        if self.delay < 0:
            raise ValidationError("delay must be nonnegative")
        object.__setattr__(self, "estimates", _freeze(np.atleast_2d(self.estimates)))

    @property
    def t_end(self) -> int:
        return self.t_start + len(self.estimates) - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.t_start, self.t_end + 1)

    @property
    def digest(self) -> str:
        return config_digest({"kind": self.kind, "delay": self.delay, **dict(self.config)})

    def at(self, t: int) -> np.ndarray:
        k = t - self.t_start
        if not 0 <= k < len(self.estimates):
            raise ValidationError(f"no estimate for time {t} (range {self.t_start}..{self.t_end})")
        return self.estimates[k]

    def array(self, t1: int, t2: int) -> np.ndarray:
        """Estimates stacked over ``t1..t2`` inclusive."""
        a, b = t1 - self.t_start, t2 - self.t_start
        if a < 0 or b >= len(self.estimates):
            raise ValidationError(f"range {t1}..{t2} not covered by estimates")
        return self.estimates[a : b + 1]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        n = self.estimates.shape[1]
        with open(path.with_suffix(".csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"x{i+1}" for i in range(n)])
            for k in range(len(self.estimates)):
                writer.writerow([str(self.t_start + k)] + [_fmt(v) for v in self.estimates[k]])
        manifest = {
            "format": "mhekit-estimates-v1",
            "kind": self.kind,
            "delay": self.delay,
            "t_start": self.t_start,
            "config": dict(self.config),
            "digest": self.digest,
            "extras": {k: v for k, v in self.extras.items() if _plain(v)},
        }
        path.with_suffix(".json").write_text(json.dumps(manifest, indent=2, default=_json_default))

    @staticmethod
    def load(path: str | Path) -> "EstimateSequence":
        path = Path(path)
        manifest = json.loads(path.with_suffix(".json").read_text())
        with open(path.with_suffix(".csv"), newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            rows = [[float(v) for v in row[1:]] for row in reader]
        return EstimateSequence(
            t_start=manifest["t_start"],
            estimates=np.asarray(rows),
            delay=manifest["delay"],
            kind=manifest["kind"],
            config=manifest["config"],
            extras=manifest.get("extras", {}),
        )


# ---------------------------------------------------------------------------
# Detectability certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IossCertificate:
    """Exponential incremental IOSS certificate, supplied by the caller.

    The quadratic storage is sandwiched between ``P1`` and ``P2`` and decays
    at rate ``eta`` under the supply weighted by ``Q`` (disturbance) and
    ``R`` (output difference).  Construction enforces P1 <= P2 (Loewner
    order) and eta in [0, 1); synthesis of certificates is out of scope.
    """

    P1: np.ndarray
    P2: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "P1", _check_spd(self.P1, "P1"))
        object.__setattr__(self, "P2", _check_spd(self.P2, "P2"))
        object.__setattr__(self, "Q", _check_spd(self.Q, "Q"))
        object.__setattr__(self, "R", _check_spd(self.R, "R"))
        if not 0.0 <= self.eta < 1.0:
            raise ValidationError(f"eta must lie in [0, 1), got {self.eta}")
        gap = np.linalg.eigvalsh(self.P2 - self.P1)
        if gap.min() < -1e-10:
            raise ValidationError("P1 must precede P2 in the Loewner order")


# ---------------------------------------------------------------------------
# Batch validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.findings

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(f"[{f.code}] {f.message}" for f in self.findings)


def validate_batch(batch: DataBatch, model) -> ValidationReport:
    """Report dimension mismatches, NaN/Inf entries, and truth tuples that
    leave the model's constraint sets.  Pure function; never raises."""
    findings: list[Finding] = []

    def add(code, msg):
        findings.append(Finding(code, msg))

    if batch.inputs.shape[1] != model.m:
        add("dim", f"inputs have {batch.inputs.shape[1]} columns, model expects m={model.m}")
    if batch.outputs.shape[1] != model.p:
        add("dim", f"outputs have {batch.outputs.shape[1]} columns, model expects p={model.p}")
    if batch.states is not None and batch.states.shape[1] != model.n:
        add("dim", f"states have {batch.states.shape[1]} columns, model expects n={model.n}")
    if batch.disturbances is not None and batch.disturbances.shape[1] != model.q:
        add("dim", f"disturbances have {batch.disturbances.shape[1]} columns, model expects q={model.q}")

    for name in ("inputs", "outputs", "states", "disturbances", "noises"):
        arr = getattr(batch, name)
        if arr is not None and not np.all(np.isfinite(arr)):
            add("nonfinite", f"{name} contain NaN or Inf")

    if batch.states is not None and batch.states.shape[1] == model.n:
        bad = [int(t) for t, x in zip(batch.times, batch.states) if not model.x_set.contains(x)]
        if bad:
            add("constraint", f"truth state leaves the state set at t={bad[:5]}"
                + ("..." if len(bad) > 5 else ""))
    if batch.disturbances is not None and batch.disturbances.shape[1] == model.q:
        bad = [int(batch.t0 + k) for k, w in enumerate(batch.disturbances) if not model.w_set.contains(w)]
        if bad:
            add("constraint", f"truth disturbance leaves the disturbance set at t={bad[:5]}"
                + ("..." if len(bad) > 5 else ""))
    if batch.noises is not None:
        bad = [int(t) for t, v in zip(batch.times, batch.noises) if not model.v_set.contains(v)]
        if bad:
            add("constraint", f"truth noise leaves the noise set at t={bad[:5]}"
                + ("..." if len(bad) > 5 else ""))
    return ValidationReport(tuple(findings))
