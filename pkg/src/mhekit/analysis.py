"""Metrics and diagnostics: accumulated stage cost, estimation error,
regret against the omniscient benchmark, turnpike deviation profiles with
exponential envelope fits, and the detectability-based accuracy bound.

All operations here are pure functions over frozen records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .core import (
    CostSpec,
    DataBatch,
    EstimateSequence,
    HorizonSolution,
    IossCertificate,
    ValidationError,
)
from .models import SystemModel
from .estimators import _resolve_model

__all__ = [
    "trajectory_on",
    "performance",
    "sse",
    "regret",
    "TurnpikeProfile",
    "turnpike_profile",
    "EnvelopeFit",
    "fit_exponential_envelope",
    "accuracy_bound",
    "accuracy_bound_curve",
]

Estimate = Union[EstimateSequence, np.ndarray]


def trajectory_on(
    est: Estimate,
    data: DataBatch,
    t1: int,
    t2: int,
    model: Optional[SystemModel] = None,
    ws: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """States over t1..t2 and the driving disturbances over t1..t2-1.

    When ``ws`` is not supplied the disturbances are reconstructed from the
    state sequence, which requires the model's disturbance to enter
    additively (then the returned pair satisfies the dynamics exactly).
    """
    model = _resolve_model(data, model)
    if isinstance(est, EstimateSequence):
        xs = est.array(t1, t2)
        if ws is None and "ws" in est.extras:
            w_all = np.asarray(est.extras["ws"])
            a = t1 - est.t_start
            ws = w_all[a : a + (t2 - t1)]
    else:
        xs = np.atleast_2d(np.asarray(est, dtype=float))
        if len(xs) != t2 - t1 + 1:
            raise ValidationError("state array must cover t1..t2 inclusive")
    if ws is None:
        if not model.additive_disturbance:
            raise ValidationError(
                "disturbance reconstruction requires an additive-disturbance model; "
                "pass ws explicitly"
            )
        ws = np.stack([
            xs[k + 1] - model.drift(xs[k], data.u(t1 + k))
            for k in range(t2 - t1)
        ]) if t2 > t1 else np.zeros((0, model.q))
    return xs, np.asarray(ws, dtype=float).reshape(t2 - t1, model.q)


def performance(
    est: Estimate,
    data: DataBatch,
    cost: CostSpec,
    t1: int,
    t2: int,
    model: Optional[SystemModel] = None,
    ws: Optional[np.ndarray] = None,
) -> float:
    """Accumulated stage cost sum_{j=t1}^{t2-1} |w_j|^2_Q + |y_j - h(x_j,u_j)|^2_R.

    Additive over adjacent intervals and zero on empty ones.  The terminal
    weight G plays no role here.
    """
    if t2 < t1:
        raise ValidationError("performance interval must have t1 <= t2")
    model = _resolve_model(data, model)
    xs, wseq = trajectory_on(est, data, t1, t2, model=model, ws=ws)
    Q, R = cost.Q, cost.R
    J = 0.0
    for k in range(t2 - t1):
        e = data.y(t1 + k) - np.asarray(model.output(xs[k], data.u(t1 + k)), dtype=float)
        J += float(wseq[k] @ Q @ wseq[k]) + float(e @ R @ e)
    return J


def sse(est: Estimate, data: DataBatch, t1: Optional[int] = None, t2: Optional[int] = None) -> float:
    """Sum of squared estimation errors against the batch's ground truth."""
    if not data.has_truth:
        raise ValidationError("SSE requires ground-truth states")
    if isinstance(est, EstimateSequence):
        t1 = est.t_start if t1 is None else t1
        t2 = est.t_end if t2 is None else t2
        xs = est.array(t1, t2)
    else:
        xs = np.atleast_2d(np.asarray(est, dtype=float))
        t1 = data.t0 if t1 is None else t1
        t2 = t1 + len(xs) - 1 if t2 is None else t2
    truth = np.stack([data.x(t) for t in range(t1, t2 + 1)])
    d = xs - truth
    return float(np.sum(d * d))


def regret(
    est: Estimate,
    benchmark: Estimate,
    data: DataBatch,
    cost: CostSpec,
    t1: int,
    t2: int,
    model: Optional[SystemModel] = None,
) -> float:
    """Performance gap J(est) - J(benchmark) on t1..t2; may be negative on
    short windows since the benchmark is only globally optimal."""
    model = _resolve_model(data, model)
    return performance(est, data, cost, t1, t2, model=model) - performance(
        benchmark, data, cost, t1, t2, model=model
    )


# ---------------------------------------------------------------------------
# Turnpike deviation profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TurnpikeProfile:
    """Deviations of finite-horizon solutions from the benchmark.

    ``state_dev[k, j]`` is |x*_{tau_k+j} - x_inf_{tau_k+j}| for window k at
    offset j in 0..N; ``z_dev`` additionally folds in the disturbance
    component on offsets 0..N-1 when window disturbances are available.
    """

    taus: np.ndarray
    state_dev: np.ndarray          # (K, N+1)
    z_dev: Optional[np.ndarray]    # (K, N) or None
    N: int
    eps: float

    @property
    def midpoint_dev(self) -> np.ndarray:
        return self.state_dev[:, self.N // 2]

    def approach_lengths(self) -> np.ndarray:
        """Per window, first offset with deviation below eps (N+1 if never)."""
        out = np.full(len(self.taus), self.N + 1)
        for k, row in enumerate(self.state_dev):
            idx = np.nonzero(row < self.eps)[0]
            if len(idx):
                out[k] = idx[0]
        return out

    def leave_lengths(self) -> np.ndarray:
        """Per window, trailing offsets above eps after the last quiet index."""
        out = np.full(len(self.taus), self.N + 1)
        for k, row in enumerate(self.state_dev):
            idx = np.nonzero(row < self.eps)[0]
            if len(idx):
                out[k] = self.N - idx[-1]
        return out


def turnpike_profile(
    solutions: Sequence[HorizonSolution],
    benchmark: EstimateSequence,
    N: int,
    eps: Optional[float] = None,
) -> TurnpikeProfile:
    """Per-window deviations from the benchmark, aligned by window offset.

    ``eps`` defaults to 1e-3 times the median benchmark state norm, and
    parameterizes the approach/leave length summaries.
    """
    if not solutions:
        raise ValidationError("need at least one window solution")
    bench_w = np.asarray(benchmark.extras["ws"]) if "ws" in benchmark.extras else None
    taus = []
    sdev = []
    zdev = [] if bench_w is not None else None
    for sol in solutions:
        tau, end = sol.window
        if end - tau != N:
            raise ValidationError("all window solutions must share the profile length N")
        xs_b = benchmark.array(tau, end)
        d = np.linalg.norm(sol.xs - xs_b, axis=1)
        taus.append(tau)
        sdev.append(d)
        if zdev is not None:
            a = tau - benchmark.t_start
            wb = bench_w[a : a + N]
            dz = np.sqrt(
                np.sum((sol.xs[:-1] - xs_b[:-1]) ** 2, axis=1)
                + np.sum((sol.ws - wb) ** 2, axis=1)
            )
            zdev.append(dz)
    if eps is None:
        scale = float(np.median(np.linalg.norm(benchmark.estimates, axis=1)))
        eps = 1e-3 * max(scale, 1e-12)
    return TurnpikeProfile(
        taus=np.asarray(taus),
        state_dev=np.stack(sdev),
        z_dev=np.stack(zdev) if zdev is not None else None,
        N=N,
        eps=float(eps),
    )


@dataclass(frozen=True)
class EnvelopeFit:
    K: float
    lam: float
    residual: float
    ok: bool


def fit_exponential_envelope(profile: TurnpikeProfile, floor: float = 1e-12) -> EnvelopeFit:
    """Least-squares fit of log-deviation against distance to the nearer
    window boundary: dev ~ K * lam^min(j, N-j).

    Deviations at or below ``floor`` are dropped.  A fit with lam >= 1 (or
    no usable data) is reported as not-ok rather than raised, since flat or
    empty profiles are legitimate outcomes.
    """
    N = profile.N
    ss, ds = [], []
    for row in profile.state_dev:
        for j, d in enumerate(row):
            if d > floor:
                ss.append(min(j, N - j))
                ds.append(d)
    if len(ds) < 2 or len(set(ss)) < 2:
        return EnvelopeFit(K=math.nan, lam=math.nan, residual=math.nan, ok=False)
    s = np.asarray(ss, dtype=float)
    logd = np.log(np.asarray(ds))
    A = np.stack([np.ones_like(s), s], axis=1)
    coef, *_ = np.linalg.lstsq(A, logd, rcond=None)
    K = float(np.exp(coef[0]))
    lam = float(np.exp(coef[1]))
    residual = float(np.linalg.norm(A @ coef - logd))
    return EnvelopeFit(K=K, lam=lam, residual=residual, ok=0.0 < lam < 1.0)


# ---------------------------------------------------------------------------
# Detectability-based accuracy bound
# ---------------------------------------------------------------------------

def _bound_constants(cert: IossCertificate) -> tuple[float, float, float]:
    lmin_p1 = float(np.min(np.linalg.eigvalsh(cert.P1)))
    lmax_p2 = float(np.max(np.linalg.eigvalsh(cert.P2)))
    cmax = max(float(np.max(np.linalg.eigvalsh(cert.Q))),
               float(np.max(np.linalg.eigvalsh(cert.R))))
    C1 = lmax_p2 / lmin_p1
    C2 = 4.0 * cmax / (lmin_p1 * (1.0 - cert.eta))
    C3 = 2.0 / lmin_p1
    return C1, C2, C3


def accuracy_bound(
    cert: IossCertificate,
    est: Estimate,
    data: DataBatch,
    cost: CostSpec,
    t1: int,
    t2: int,
    tau: int,
    model: Optional[SystemModel] = None,
    ws: Optional[np.ndarray] = None,
) -> tuple[float, float]:
    """(lhs, rhs) of the squared-error bound at time tau in [t1, t2].

    lhs is |x_tau - xhat_tau|^2; rhs combines the decayed initial error, the
    largest true disturbance/noise magnitude seen so far, and the estimate's
    accumulated stage cost.  The bound is valid when the stage-cost weights
    used for the performance term match the certificate's supply weights
    (the storage function can always be rescaled to arrange this), so pass a
    cost whose Q and R equal the certificate's.
    """
    if not t1 <= tau <= t2:
        raise ValidationError("tau must lie in [t1, t2]")
    if not data.has_truth:
        raise ValidationError("accuracy bound requires ground truth")
    model = _resolve_model(data, model)
    C1, C2, C3 = _bound_constants(cert)
    xs, wseq = trajectory_on(est, data, t1, t2, model=model, ws=ws)
    err0 = float(np.sum((data.x(t1) - xs[0]) ** 2))
    err_tau = float(np.sum((data.x(tau) - xs[tau - t1]) ** 2))
    peak = 0.0
    for j in range(t1, tau):
        k = j - data.t0
        wmag = float(np.sum(data.disturbances[k] ** 2)) if data.disturbances is not None else 0.0
        vmag = float(np.sum(data.noises[k] ** 2)) if data.noises is not None else 0.0
        peak = max(peak, wmag, vmag)
    J = performance(xs, data, cost, t1, t2, model=model, ws=wseq)
    rhs = C1 * cert.eta ** (tau - t1) * err0 + C2 * peak + C3 * J
    return err_tau, rhs


def accuracy_bound_curve(
    cert: IossCertificate,
    est: Estimate,
    data: DataBatch,
    cost: CostSpec,
    t1: int,
    t2: int,
    model: Optional[SystemModel] = None,
    ws: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized accuracy_bound over every tau in t1..t2."""
    model = _resolve_model(data, model)
    xs, wseq = trajectory_on(est, data, t1, t2, model=model, ws=ws)
    C1, C2, C3 = _bound_constants(cert)
    J = performance(xs, data, cost, t1, t2, model=model, ws=wseq)
    err0 = float(np.sum((data.x(t1) - xs[0]) ** 2))
    lhs = np.empty(t2 - t1 + 1)
    rhs = np.empty(t2 - t1 + 1)
    peak = 0.0
    for i, tau in enumerate(range(t1, t2 + 1)):
        lhs[i] = float(np.sum((data.x(tau) - xs[i]) ** 2))
        rhs[i] = C1 * cert.eta ** (tau - t1) * err0 + C2 * peak + C3 * J
        k = tau - data.t0
        if tau < t2:
            wmag = float(np.sum(data.disturbances[k] ** 2)) if data.disturbances is not None else 0.0
            vmag = float(np.sum(data.noises[k] ** 2)) if data.noises is not None else 0.0
            peak = max(peak, wmag, vmag)
    return lhs, rhs
