"""Estimation schemes built on the window solver.

Online schemes (``mhe``, ``delayed_mhe``, ``mhe_prior``) are sequential
consume-publish state machines: consuming data through time t publishes the
estimate for time t-delta.  ``fie``, the infinite-horizon benchmark, and the
offline approximate estimator are batch computations; the approximate
estimator distributes its independent window solves over a worker pool with
index-ordered aggregation, so its output is bit-identical for any worker
count.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    CostSpec,
    DataBatch,
    EstimateSequence,
    HorizonSolution,
    SolverFailure,
    ValidationError,
)
from .models import SystemModel, get_model
from .solver import HorizonProblem, Prior, SolverOptions, solve_horizon, solve_linear_horizon

__all__ = [
    "AeConfig",
    "fie",
    "mhe",
    "mhe_horizon_sweep",
    "delayed_mhe",
    "delayed_mhe_multi",
    "mhe_prior",
    "mhe_prior_multi",
    "update_prior_weight_ekf",
    "infinite_horizon_benchmark",
    "approximate_estimator",
    "plan_ae_windows",
    "kalman_filter",
    "fixed_interval_smoother",
]

PRIOR_KINDS = ("filtering", "smoothing", "turnpike")


@dataclass
class PriorState:
    """Prior-mean and weight bookkeeping for one prior-weighted run.

    Holds the current anchor weight (advanced by one covariance step each
    time the window start moves), the buffer of recent solutions the
    turnpike prior draws from (depth N/2 + 1), and the published window-end
    elements the filtering prior reuses N steps later.
    """

    kind: str
    xbar0: np.ndarray
    W0: np.ndarray
    N: int
    weight_update: str
    chain_W: np.ndarray = None
    buffer: dict = None          # solve time -> (solution, weight then current)
    last_elements: dict = None   # solve time -> window-end state estimate
    prev_xbar: np.ndarray = None

    def __post_init__(self):
        self.chain_W = self.W0.copy()
        self.buffer = {}
        self.last_elements = {}

    def advance_weight(self, model, data, cost, prev_start: int) -> None:
        """One covariance propagate-and-correct step as the window start
        moves past ``prev_start`` (no-op for constant weights)."""
        if self.weight_update == "ekf":
            self.chain_W = update_prior_weight_ekf(
                model, self.prev_xbar, self.chain_W,
                data.inputs[prev_start], data.outputs[prev_start], cost,
            )

    def select(self, t: int, start: int, t0: int, prev_sol, prev_start):
        """Prior mean and weight for the window [start, t] (relative times)."""
        half = self.N // 2
        W_use = self.chain_W
        if self.kind == "filtering":
            xbar = self.last_elements[t - self.N] if t >= self.N else self.xbar0
        elif self.kind == "smoothing":
            xbar = prev_sol.xs[start - prev_start] if t >= 1 else self.xbar0
        else:  # turnpike
            if t >= half:
                ref_sol, ref_W = self.buffer[t - half]
                xbar = ref_sol.x_at(t0 + start)
                W_use = ref_W if self.weight_update == "ekf" else self.W0
            else:
                xbar = self.xbar0
                W_use = self.W0 if self.weight_update == "constant" else self.chain_W
        return xbar, W_use

    def record(self, t: int, sol: HorizonSolution, xbar: np.ndarray) -> None:
        self.last_elements[t] = sol.xs[-1]
        self.buffer[t] = (sol, self.chain_W)
        self.buffer.pop(t - self.N // 2 - 1, None)
        self.last_elements.pop(t - self.N - 1, None)
        self.prev_xbar = xbar


def _resolve_model(data: DataBatch, model: Optional[SystemModel]) -> SystemModel:
    if model is not None:
        return model
    model_id = data.meta.get("model_id")
    if not model_id:
        raise ValidationError("no model given and the batch carries no model_id")
    return get_model(model_id)


def _solve(problem: HorizonProblem, warm=None, manifold_fallback=False) -> HorizonSolution:
    if problem.model.is_linear and not (
        problem.model.x_set.bounded or problem.model.w_set.bounded or problem.model.v_set.bounded
    ):
        try:
            return solve_linear_horizon(problem)
        except SolverFailure:
            if not manifold_fallback:
                raise
            # short unobservable ramp windows have a solution manifold; the
            # damped iteration settles on a point near the documented start
            return solve_horizon(problem, warm_start=warm)
    return solve_horizon(problem, warm_start=warm)


# A warm-started window solve that grinds usually inherited a spurious local
# branch from the previous window; above this iteration count a cold restart
# is attempted and the lower-cost stationary point kept.
_RETRY_ITERS = 12


class _SolveDiagnostics:
    """Accumulates per-solve statistics into a small summary mapping."""

    def __init__(self):
        self.solves = 0
        self.iterations = 0
        self.max_grad = 0.0
        self.max_violation = 0.0
        self.statuses: dict[str, int] = {}

    def add(self, sol: HorizonSolution) -> None:
        self.solves += 1
        self.iterations += sol.stats.iterations
        if math.isfinite(sol.stats.grad_norm):
            self.max_grad = max(self.max_grad, sol.stats.grad_norm)
        self.max_violation = max(self.max_violation, sol.stats.max_violation)
        self.statuses[sol.stats.status] = self.statuses.get(sol.stats.status, 0) + 1

    def summary(self) -> dict:
        return {
            "solves": self.solves,
            "mean_iterations": self.iterations / max(self.solves, 1),
            "max_grad_norm": self.max_grad,
            "max_violation": self.max_violation,
            "statuses": dict(self.statuses),
        }


def _ekf_sweep(model: SystemModel, us, ys, cost: CostSpec, x0: np.ndarray) -> np.ndarray:
    """Filtered state sequence over one window (covariances from the cost
    weights, linearization at the running mean).  Used to seed cold solves."""
    Qcov = np.linalg.inv(cost.Q) if model.q == model.n else None
    Rcov = np.linalg.inv(cost.R)
    n = model.n
    x = np.asarray(x0, dtype=float).copy()
    P = np.eye(n)
    out = np.empty((len(ys), n))
    zq = np.zeros(model.q)
    for t in range(len(ys)):
        A, Bw, C = model.jacobians(x, us[t], zq)
        S = C @ P @ C.T + Rcov
        K = np.linalg.solve(S.T, (P @ C.T).T).T
        x = x + K @ (ys[t] - np.asarray(model.output(x, us[t]), dtype=float))
        if model.x_set.bounded:
            x = model.x_set.project(x)
        IKC = np.eye(n) - K @ C
        P = IKC @ P @ IKC.T + K @ Rcov @ K.T
        out[t] = x
        if t < len(ys) - 1:
            x = model.drift(x, us[t])
            P = A @ P @ A.T + (Qcov if Qcov is not None else Bw @ Bw.T)
    return out


def _ekf_warm_start(model: SystemModel, us, ys, cost: CostSpec):
    """Deterministic rollout-consistent warm start for a cold window solve.

    Runs one filter sweep from the documented cold-start state and
    reconstructs the additive disturbances so that the rollout reproduces the
    filtered sequence exactly.  Returns None for non-additive models."""
    if not model.additive_disturbance:
        return None
    if model.x_set.bounded:
        x0 = model.x_set.midpoint()
    else:
        C0 = np.asarray(model.jac_h(np.zeros(model.n), us[0]), dtype=float) \
            if model.jac_h is not None else None
        if C0 is None:
            return None
        x0 = np.linalg.pinv(C0) @ ys[0]
    xs = _ekf_sweep(model, us, ys, cost, x0)
    L = len(ys) - 1
    ws = np.stack([xs[k + 1] - model.drift(xs[k], us[k]) for k in range(L)]) \
        if L else np.zeros((0, model.q))
    return xs[0], ws


def _solve_chained(problem: HorizonProblem, warm) -> HorizonSolution:
    sol = _solve(problem, warm=warm, manifold_fallback=True)
    if warm is not None and not problem.model.is_linear and (
        sol.stats.status == "max_iters" or sol.stats.iterations > _RETRY_ITERS
    ):
        try:
            alt = _solve(problem)
        except SolverFailure:
            return sol
        if alt.cost + alt.stats.penalty < sol.cost + sol.stats.penalty:
            return alt
    return sol


def _grow_warm(prev: Optional[HorizonSolution], q: int):
    """Warm start for a window grown by one step: keep x0, repeat last w."""
    if prev is None:
        return None
    if len(prev.ws) == 0:
        return prev.xs[0], np.zeros((1, q))
    return prev.xs[0], np.vstack([prev.ws, prev.ws[-1][None, :]])


def _shift_warm(prev: Optional[HorizonSolution], q: int):
    """Warm start for a window shifted by one step: drop the first state,
    repeat the last disturbance."""
    if prev is None:
        return None
    if len(prev.ws) == 0:
        return prev.xs[0], np.zeros((1, q))
    tail = prev.ws[-1]
    return prev.xs[1], np.vstack([prev.ws[1:], tail[None, :]])


# ---------------------------------------------------------------------------
# Full information estimation and (delayed) moving horizon estimation
# ---------------------------------------------------------------------------

def fie(
    data: DataBatch,
    cost: CostSpec,
    model: Optional[SystemModel] = None,
    options: Optional[SolverOptions] = None,
) -> EstimateSequence:
    """Full information estimate: at each t, the last state of the solve over
    all data collected so far."""
    model = _resolve_model(data, model)
    options = options or SolverOptions()
    ests = np.empty((data.T + 1, model.n))
    diag = _SolveDiagnostics()
    prev = None
    for t in range(data.T + 1):
        prob = HorizonProblem(
            model=model,
            us=data.inputs[: t + 1],
            ys=data.outputs[: t + 1],
            cost=cost,
            tau=data.t0,
            options=options,
        )
        try:
            sol = _solve(prob, warm=_grow_warm(prev, model.q), manifold_fallback=True)
        except SolverFailure as exc:
            raise SolverFailure(f"fie failed at t={data.t0 + t}: {exc}", best=exc.best) from exc
        ests[t] = sol.xs[-1]
        diag.add(sol)
        prev = sol
    return EstimateSequence(
        t_start=data.t0,
        estimates=ests,
        delay=0,
        kind="fie",
        config={"cost": cost.as_config(), "model": model.model_id},
        extras={"diagnostics": diag.summary()},
    )


def mhe(
    data: DataBatch,
    cost: CostSpec,
    N: int,
    model: Optional[SystemModel] = None,
    options: Optional[SolverOptions] = None,
) -> EstimateSequence:
    """Moving horizon estimate over sliding windows of length N (growing
    windows before t reaches N)."""
    seq = _windowed_run(data, cost, N, [0], _resolve_model(data, model), options)[0]
    return replace(seq, kind="mhe")


def mhe_horizon_sweep(
    data: DataBatch,
    cost: CostSpec,
    Ns: Sequence[int],
    model: Optional[SystemModel] = None,
    options: Optional[SolverOptions] = None,
) -> dict[int, EstimateSequence]:
    """MHE for several horizon lengths sharing the common ramp-up solves.

    Windows with the same start index coincide across horizon lengths (this
    happens exactly while several horizons are still ramping up on the
    window 0..t), so each distinct window is solved once per time step.
    """
    model = _resolve_model(data, model)
    options = options or SolverOptions()
    Ns = sorted(set(int(N) for N in Ns))
    if Ns and Ns[0] < 0:
        raise ValidationError("horizon lengths must be nonnegative")
    T = data.T
    ests = {N: np.empty((T + 1, model.n)) for N in Ns}
    diag = _SolveDiagnostics()
    prev: dict[int, HorizonSolution] = {}
    prev_start: dict[int, int] = {}
    for t in range(T + 1):
        solved: dict[int, HorizonSolution] = {}
        for N in Ns:
            start = max(0, t - N)
            if start in solved:
                sol = solved[start]
            else:
                warm = None
                if N in prev_start:
                    warm = (_grow_warm(prev[N], model.q) if start == prev_start[N]
                            else _shift_warm(prev[N], model.q))
                prob = HorizonProblem(
                    model=model,
                    us=data.inputs[start : t + 1],
                    ys=data.outputs[start : t + 1],
                    cost=cost,
                    tau=data.t0 + start,
                    options=options,
                )
                try:
                    sol = _solve_chained(prob, warm)
                except SolverFailure as exc:
                    raise SolverFailure(
                        f"window solve failed at t={data.t0 + t} (N={N}): {exc}", best=exc.best
                    ) from exc
                solved[start] = sol
                diag.add(sol)
            ests[N][t] = sol.xs[-1]
            prev[N], prev_start[N] = sol, start
    extras = {"diagnostics": diag.summary()}
    return {
        N: EstimateSequence(
            t_start=data.t0,
            estimates=ests[N],
            delay=0,
            kind="mhe",
            config={"cost": cost.as_config(), "model": model.model_id, "N": N, "delta": 0},
            extras=extras,
        )
        for N in Ns
    }


def delayed_mhe(
    data: DataBatch,
    cost: CostSpec,
    N: int,
    delta: int,
    model: Optional[SystemModel] = None,
    options: Optional[SolverOptions] = None,
) -> EstimateSequence:
    """Delayed MHE: consuming data through t publishes the window element for
    time t-delta, cancelling the leaving-arc transient at the window's end.

    Requires even N and delta in [0, N/2]; delta = 0 recovers plain MHE
    element for element.
    """
    if N % 2 != 0:
        raise ValidationError("delayed MHE requires an even horizon length")
    return delayed_mhe_multi(data, cost, N, [delta], model=model, options=options)[delta]


def delayed_mhe_multi(
    data: DataBatch,
    cost: CostSpec,
    N: int,
    deltas: Sequence[int],
    model: Optional[SystemModel] = None,
    options: Optional[SolverOptions] = None,
) -> dict[int, EstimateSequence]:
    """One windowed run published at several delays at once.

    The window sequence does not depend on the delay, so sweeping delays
    shares every solve; each requested delay gets its own estimate sequence.
    """
    model = _resolve_model(data, model)
    for d in deltas:
        if not 0 <= d <= max(N // 2, 0):
            raise ValidationError(f"delay must lie in [0, N/2], got {d}")
    return _windowed_run(data, cost, N, list(deltas), model, options)


def _windowed_run(
    data: DataBatch,
    cost: CostSpec,
    N: int,
    deltas: list[int],
    model: SystemModel,
    options: Optional[SolverOptions],
) -> dict[int, EstimateSequence]:
    if N < 0:
        raise ValidationError("horizon length must be nonnegative")
    options = options or SolverOptions()
    T = data.T
    if T < max(deltas):
        raise ValidationError("batch too short for the requested delay")
    ests = {d: np.empty((T - d + 1, model.n)) for d in deltas}
    diag = _SolveDiagnostics()
    prev = None
    prev_start = None
    for t in range(T + 1):
        start = max(0, t - N)
        warm = None
        if prev_start is not None:
            warm = _grow_warm(prev, model.q) if start == prev_start else _shift_warm(prev, model.q)
        prob = HorizonProblem(
            model=model,
            us=data.inputs[start : t + 1],
            ys=data.outputs[start : t + 1],
            cost=cost,
            tau=data.t0 + start,
            options=options,
        )
        try:
            sol = _solve_chained(prob, warm)
        except SolverFailure as exc:
            raise SolverFailure(f"window solve failed at t={data.t0 + t}: {exc}", best=exc.best) from exc
        diag.add(sol)
        for d in deltas:
            if t >= d:
                ests[d][t - d] = sol.xs[t - d - start]
        prev, prev_start = sol, start
    extras = {"diagnostics": diag.summary()}
    return {
        d: EstimateSequence(
            t_start=data.t0,
            estimates=ests[d],
            delay=d,
            kind="delayed_mhe",
            config={"cost": cost.as_config(), "model": model.model_id, "N": N, "delta": d},
            extras=extras,
        )
        for d in deltas
    }


# ---------------------------------------------------------------------------
# Prior-weighted MHE
# ---------------------------------------------------------------------------

def update_prior_weight_ekf(
    model: SystemModel,
    xbar: np.ndarray,
    W: np.ndarray,
    u: np.ndarray,
    y: np.ndarray,
    cost: CostSpec,
) -> np.ndarray:
    """One covariance propagate-and-correct step on the prior weight.

    Interprets P = W^-1 as a covariance with process/measurement covariances
    Q^-1 and R^-1 taken from the cost weights, linearizing the dynamics and
    output map at the incoming prior mean.  The correction uses the Joseph
    form, so the returned weight is positive definite whenever W is.
    """
    xbar = np.asarray(xbar, dtype=float).ravel()
    W = np.atleast_2d(np.asarray(W, dtype=float))
    A, _, C = model.jacobians(xbar, np.asarray(u, dtype=float).ravel(), np.zeros(model.q))
    Qcov = np.linalg.inv(cost.Q)
    Rcov = np.linalg.inv(cost.R)
    P = np.linalg.inv(0.5 * (W + W.T))
    Pm = A @ P @ A.T + Qcov
    S = C @ Pm @ C.T + Rcov
    try:
        K = np.linalg.solve(S.T, (Pm @ C.T).T).T
    except np.linalg.LinAlgError:
        warnings.warn("singular innovation covariance; regularizing", RuntimeWarning)
        S = S + 1e-12 * np.eye(len(S))
        K = np.linalg.solve(S.T, (Pm @ C.T).T).T
    IKC = np.eye(model.n) - K @ C
    Pp = IKC @ Pm @ IKC.T + K @ Rcov @ K.T
    Wp = np.linalg.inv(Pp)
    return 0.5 * (Wp + Wp.T)


def mhe_prior(
    data: DataBatch,
    cost: CostSpec,
    N: int,
    prior_kind: str = "filtering",
    delta: int = 0,
    xbar0: Optional[np.ndarray] = None,
    W0: Optional[np.ndarray] = None,
    weight_update: str = "ekf",
    model: Optional[SystemModel] = None,
    options: Optional[SolverOptions] = None,
) -> EstimateSequence:
    """Prior-weighted MHE with filtering, smoothing, or turnpike prior mean.

    The window at time t spans the last min(t, N)+1 indices and its initial
    state is anchored by |x0 - xbar|^2_W.  Prior-mean update per kind:

    * filtering -- the estimate published N steps ago (window-end element);
    * smoothing -- the previous window's element for the new start index;
    * turnpike  -- the solution computed N/2 steps ago, evaluated at the new
      start index (its interior, away from both arcs); requires even N.

    With ``weight_update='ekf'`` the anchor weight advances by one covariance
    propagate-and-correct step each time the window start moves; the turnpike
    prior pairs each buffered solution with the weight that was current when
    it was produced.  Publishes the window element for time t-delta.
    """
    return mhe_prior_multi(
        data, cost, N, prior_kind, [delta], xbar0=xbar0, W0=W0,
        weight_update=weight_update, model=model, options=options,
    )[delta]


def mhe_prior_multi(
    data: DataBatch,
    cost: CostSpec,
    N: int,
    prior_kind: str,
    deltas: Sequence[int],
    xbar0: Optional[np.ndarray] = None,
    W0: Optional[np.ndarray] = None,
    weight_update: str = "ekf",
    model: Optional[SystemModel] = None,
    options: Optional[SolverOptions] = None,
    collect_windows: Optional[tuple[int, int]] = None,
) -> dict[int, EstimateSequence]:
    """Prior-weighted MHE published at several delays from one solve sequence.

    The solves, prior means, and weights do not depend on the delay, so a
    delay sweep shares all of them.  ``collect_windows=(a, b)`` additionally
    keeps the raw window solutions obtained at times a..b (for turnpike
    deviation profiles).  See :func:`mhe_prior`.
    """
    model = _resolve_model(data, model)
    options = options or SolverOptions()
    deltas = list(deltas)
    if prior_kind not in PRIOR_KINDS:
        raise ValidationError(f"unknown prior kind {prior_kind!r}")
    if weight_update not in ("constant", "ekf"):
        raise ValidationError(f"unknown weight update {weight_update!r}")
    if prior_kind == "turnpike" and N % 2 != 0:
        raise ValidationError("turnpike prior requires an even horizon length")
    for d in deltas:
        if not 0 <= d <= max(N // 2, 0):
            raise ValidationError(f"delay must lie in [0, N/2], got {d}")
    if xbar0 is None:
        raise ValidationError("mhe_prior requires an initial prior mean xbar0")
    xbar0 = np.asarray(xbar0, dtype=float).ravel()
    if not model.x_set.contains(xbar0):
        raise ValidationError("xbar0 outside the model's state set")
    W0 = np.atleast_2d(np.asarray(W0, dtype=float)) if W0 is not None else np.eye(model.n)
    np.linalg.cholesky(W0)  # reject indefinite weights up front

    T = data.T
    if T < max(deltas):
        raise ValidationError("batch too short for the requested delay")
    half = N // 2
    ests = {d: np.empty((T - d + 1, model.n)) for d in deltas}
    anchors = np.empty(T + 1, dtype=int)
    prior_means = np.empty((T + 1, model.n))
    kept_windows: list[HorizonSolution] = []
    diag = _SolveDiagnostics()

    chain_W = W0.copy()
    prev_sol: Optional[HorizonSolution] = None
    prev_start: Optional[int] = None
    prev_xbar: Optional[np.ndarray] = None
    last_elements: dict[int, np.ndarray] = {}
    buffer: dict[int, tuple[HorizonSolution, np.ndarray]] = {}

    for t in range(T + 1):
        Nt = min(t, N)
        start = t - Nt
        if weight_update == "ekf" and prev_start is not None and start == prev_start + 1:
            chain_W = update_prior_weight_ekf(
                model, prev_xbar, chain_W,
                data.inputs[prev_start], data.outputs[prev_start], cost,
            )

        W_use = chain_W
        if prior_kind == "filtering":
            xbar = last_elements[t - N] if t >= N else xbar0
        elif prior_kind == "smoothing":
            xbar = prev_sol.xs[start - prev_start] if t >= 1 else xbar0
        else:  # turnpike
            if t >= half:
                ref_sol, ref_W = buffer[t - half]
                xbar = ref_sol.x_at(data.t0 + start)
                W_use = ref_W if weight_update == "ekf" else W0
            else:
                xbar = xbar0
                W_use = W0 if weight_update == "constant" else chain_W

        warm = None
        if prev_start is not None:
            warm = _grow_warm(prev_sol, model.q) if start == prev_start else _shift_warm(prev_sol, model.q)
        prob = HorizonProblem(
            model=model,
            us=data.inputs[start : t + 1],
            ys=data.outputs[start : t + 1],
            cost=cost,
            tau=data.t0 + start,
            prior=Prior(xbar=xbar, weight=W_use),
            options=options,
        )
        try:
            sol = _solve_chained(prob, warm)
        except SolverFailure as exc:
            raise SolverFailure(f"prior-weighted solve failed at t={data.t0 + t}: {exc}",
                                best=exc.best) from exc

        diag.add(sol)
        anchors[t] = data.t0 + start
        prior_means[t] = xbar
        last_elements[t] = sol.xs[-1]
        buffer[t] = (sol, chain_W)
        buffer.pop(t - half - 1, None)
        last_elements.pop(t - N - 1, None)
        if collect_windows is not None and collect_windows[0] <= data.t0 + t <= collect_windows[1]:
            kept_windows.append(sol)
        for d in deltas:
            if t >= d:
                ests[d][t - d] = sol.xs[t - d - start]
        prev_sol, prev_start, prev_xbar = sol, start, xbar

    extras = {"prior_anchor": anchors, "prior_mean": prior_means,
              "diagnostics": diag.summary()}
    if collect_windows is not None:
        extras["window_solutions"] = kept_windows
    return {
        d: EstimateSequence(
            t_start=data.t0,
            estimates=ests[d],
            delay=d,
            kind="mhe_prior",
            config={
                "cost": cost.as_config(), "model": model.model_id, "N": N,
                "delta": d, "prior_kind": prior_kind, "weight_update": weight_update,
                "xbar0": xbar0, "W0": W0,
            },
            extras=extras,
        )
        for d in deltas
    }


# ---------------------------------------------------------------------------
# Infinite-horizon benchmark
# ---------------------------------------------------------------------------

def _warm_from_estimates(model: SystemModel, data: DataBatch, seq: EstimateSequence):
    """Condensed warm start (x0, ws) from a published estimate sequence,
    reconstructing disturbances through the additive dynamics."""
    if not model.additive_disturbance:
        return None
    t1, t2 = seq.t_start, seq.t_end
    if t1 > data.t0 or t2 < data.t0 + data.T:
        # pad missing tail by holding the last state through the drift
        xs = [seq.at(t) for t in range(t1, t2 + 1)]
        for t in range(t2, data.t0 + data.T):
            xs.append(model.drift(xs[-1], data.u(t)))
        xs = np.stack(xs)
    else:
        xs = seq.array(data.t0, data.t0 + data.T)
    ws = np.stack([
        xs[k + 1] - model.drift(xs[k], data.inputs[k]) for k in range(data.T)
    ]) if data.T else np.zeros((0, model.q))
    return xs[0], ws


def infinite_horizon_benchmark(
    data: DataBatch,
    cost: CostSpec,
    method: str = "clairvoyant_fie",
    tol: float = 1e-8,
    extender: Optional[Callable[[int], DataBatch]] = None,
    initial_extension: int = 16,
    max_doublings: int = 8,
    model: Optional[SystemModel] = None,
    options: Optional[SolverOptions] = None,
    warm_from: Optional[EstimateSequence] = None,
) -> EstimateSequence:
    """Benchmark estimate approximating the omniscient acausal solution.

    ``clairvoyant_fie`` solves one problem over the whole batch.
    ``extended_window`` calls ``extender(Te)`` for a batch covering
    ``t0-Te .. t0+T+Te``, solves it, and doubles Te until the states on the
    nominal range move by at most ``tol``; the converged interior is immune
    to both boundary arcs.  Full (x, w) sequences ride along in ``extras``.

    Long nonlinear batches are brittle under single-shooting from a cold
    start; ``warm_from`` seeds the solve from a previously computed estimate
    sequence (additive-disturbance models only).
    """
    model = _resolve_model(data, model)
    options = options or SolverOptions()
    T = data.T
    if method == "clairvoyant_fie":
        if warm_from is not None:
            warm = _warm_from_estimates(model, data, warm_from)
        elif not model.is_linear:
            warm = _ekf_warm_start(model, data.inputs, data.outputs, cost)
        else:
            warm = None
        prob = HorizonProblem(model=model, us=data.inputs, ys=data.outputs,
                              cost=cost, tau=data.t0, options=options)
        sol = _solve(prob) if warm is None else solve_horizon(prob, warm_start=warm)
        xs, ws = sol.xs, sol.ws
        info = {"method": method, "cost": sol.cost,
                "diagnostics": {"solves": 1, "iterations": sol.stats.iterations,
                                "status": sol.stats.status}}
        if options.trace and sol.stats.cost_trace is not None:
            info["trace"] = sol.stats.cost_trace
    elif method == "extended_window":
        if extender is None:
            raise ValidationError("extended_window requires an extender callable")
        prev_states = None
        Te = int(initial_extension)
        delta_hist = []
        for _ in range(max_doublings + 1):
            big = extender(Te)
            if big.t0 > data.t0 - Te or big.t0 + big.T < data.t0 + T + Te:
                raise ValidationError("extender returned a batch that does not cover the extension")
            prob = HorizonProblem(model=model, us=big.inputs, ys=big.outputs,
                                  cost=cost, tau=big.t0, options=options)
            sol = _solve(prob)
            a = data.t0 - big.t0
            states = sol.xs[a : a + T + 1]
            if prev_states is not None:
                delta = float(np.max(np.abs(states - prev_states)))
                delta_hist.append(delta)
                if delta <= tol:
                    xs = states
                    ws = sol.ws[a : a + T]
                    info = {"method": method, "Te": Te, "delta": delta}
                    break
            prev_states = states
            Te *= 2
        else:
            raise SolverFailure(
                f"extended-window benchmark did not converge (last deltas {delta_hist[-3:]})"
            )
    else:
        raise ValidationError(f"unknown benchmark method {method!r}")

    return EstimateSequence(
        t_start=data.t0,
        estimates=xs,
        delay=0,
        kind="ihe",
        config={"cost": cost.as_config(), "model": model.model_id, "method": method},
        extras={"ws": np.asarray(ws), **info},
    )


# ---------------------------------------------------------------------------
# Offline approximate estimator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AeConfig:
    """Window length N (even), kept-block half-width delta in [0, N/2]."""

    N: int
    delta: int = 0

    def __post_init__(self):
        if self.N < 0 or self.N % 2 != 0:
            raise ValidationError("AE horizon length must be even and nonnegative")
        if not 0 <= self.delta <= self.N // 2:
            raise ValidationError("AE block half-width must lie in [0, N/2]")

    def planned_count(self, T: int) -> int:
        return len(plan_ae_windows(T, self.N, self.delta))


def plan_ae_windows(T: int, N: int, delta: int) -> list[tuple[int, int, int]]:
    """Plan the truncated windows as (tau, keep_lo, keep_hi), relative indices.

    Each window spans tau..tau+N and contributes the kept index range
    exactly once; together the kept ranges tile 0..T.  The first window
    keeps its left edge through midpoint+delta, interior windows (stride
    2*delta+1) keep their middle block, and the last window keeps
    midpoint-delta through its right edge.  When 2*delta+1 does not divide
    T-N, one extra overlapping final window covers the residual tail.
    """
    AeConfig(N=N, delta=delta)
    if T < N:
        raise ValidationError("AE requires T >= N")
    if T == N:
        return [(0, 0, T)]
    half = N // 2
    stride = 2 * delta + 1
    plan = [(0, 0, half + delta)]
    i = 1
    while i * stride <= T - N - 1:
        tau = i * stride
        plan.append((tau, tau + half - delta, tau + half + delta))
        i += 1
    prev_end = plan[-1][2]
    plan.append((T - N, prev_end + 1, T))
    return plan


@lru_cache(maxsize=8)
def _cached_model(model_id: str) -> SystemModel:
    return get_model(model_id)


def _ae_solve_window(payload) -> tuple[int, np.ndarray, np.ndarray, float]:
    idx, model_id, us, ys, Q, R, G, tau, opts_dict = payload
    model = _cached_model(model_id)
    cost = CostSpec(Q=Q, R=R, G=G)
    prob = HorizonProblem(
        model=model, us=us, ys=ys, cost=cost,
        tau=tau, options=SolverOptions(**opts_dict),
    )
    warm = None
    if not model.is_linear:
        warm = _ekf_warm_start(model, prob.us, prob.ys, cost)
    sol = _solve(prob, warm=warm)
    return idx, sol.xs, sol.ws, sol.cost


def approximate_estimator(
    data: DataBatch,
    cost: CostSpec,
    config: AeConfig,
    workers: int = 1,
    model: Optional[SystemModel] = None,
    options: Optional[SolverOptions] = None,
) -> EstimateSequence:
    """Offline estimate from decoupled truncated solves (see plan_ae_windows).

    Window solves are independent (deterministic cold starts), so they can
    run on a process pool; results are merged in index order and the output
    is bitwise identical for any worker count.
    """
    model = _resolve_model(data, model)
    options = options or SolverOptions()
    plan = plan_ae_windows(data.T, config.N, config.delta)
    opts_dict = {k: getattr(options, k) for k in
                 ("max_iters", "grad_tol", "penalty_mu", "lm_lambda0", "lm_up", "lm_down")}
    payloads = [
        (i, model.model_id,
         data.inputs[tau : tau + config.N + 1],
         data.outputs[tau : tau + config.N + 1],
         cost.Q, cost.R, cost.G, data.t0 + tau, opts_dict)
        for i, (tau, _, _) in enumerate(plan)
    ]
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_ae_solve_window, payloads, chunksize=8))
    else:
        results = [_ae_solve_window(p) for p in payloads]
    results.sort(key=lambda r: r[0])

    ests = np.empty((data.T + 1, model.n))
    window_costs = np.empty(len(plan))
    for (idx, xs, ws, wcost), (tau, lo, hi) in zip(results, plan):
        ests[lo : hi + 1] = xs[lo - tau : hi - tau + 1]
        window_costs[idx] = wcost
    diagnostics = {"solves": len(plan), "total_window_cost": float(window_costs.sum())}
    return EstimateSequence(
        t_start=data.t0,
        estimates=ests,
        delay=0,
        kind="ae",
        config={"cost": cost.as_config(), "model": model.model_id,
                "N": config.N, "delta": config.delta},
        extras={"planned_windows": len(plan), "window_costs": window_costs,
                "plan": plan, "diagnostics": diagnostics},
    )


# ---------------------------------------------------------------------------
# Kalman filter / fixed-interval smoother baselines
# ---------------------------------------------------------------------------

def kalman_filter(
    data: DataBatch,
    model: Optional[SystemModel] = None,
    Qcov: Optional[np.ndarray] = None,
    Rcov: Optional[np.ndarray] = None,
    x0: Optional[np.ndarray] = None,
    P0: Optional[np.ndarray] = None,
) -> EstimateSequence:
    """Standard predict/update Kalman filter for linear models."""
    model = _resolve_model(data, model)
    if not model.is_linear:
        raise ValidationError("kalman_filter requires a linear model")
    A, B, C = model.lin
    n = model.n
    Qcov = np.eye(n) if Qcov is None else np.atleast_2d(Qcov)
    Rcov = np.eye(model.p) if Rcov is None else np.atleast_2d(Rcov)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel().copy()
    P = np.eye(n) if P0 is None else np.atleast_2d(P0).copy()

    ests = np.empty((data.T + 1, n))
    filt_means = np.empty((data.T + 1, n))
    filt_covs = np.empty((data.T + 1, n, n))
    pred_means = np.empty((data.T + 1, n))
    pred_covs = np.empty((data.T + 1, n, n))
    for t in range(data.T + 1):
        pred_means[t] = x
        pred_covs[t] = P
        S = C @ P @ C.T + Rcov
        try:
            K = np.linalg.solve(S.T, (P @ C.T).T).T
        except np.linalg.LinAlgError:
            warnings.warn("singular innovation covariance; regularizing", RuntimeWarning)
            K = np.linalg.solve((S + 1e-12 * np.eye(len(S))).T, (P @ C.T).T).T
        x = x + K @ (data.outputs[t] - C @ x)
        IKC = np.eye(n) - K @ C
        P = IKC @ P @ IKC.T + K @ Rcov @ K.T
        filt_means[t] = x
        filt_covs[t] = P
        ests[t] = x
        if t < data.T:
            x = A @ x + B @ data.inputs[t]
            P = A @ P @ A.T + Qcov
    return EstimateSequence(
        t_start=data.t0, estimates=ests, delay=0, kind="kf",
        config={"model": model.model_id, "Qcov": Qcov, "Rcov": Rcov},
        extras={"filt_means": filt_means, "filt_covs": filt_covs,
                "pred_means": pred_means, "pred_covs": pred_covs},
    )


def fixed_interval_smoother(
    data: DataBatch,
    model: Optional[SystemModel] = None,
    Qcov: Optional[np.ndarray] = None,
    Rcov: Optional[np.ndarray] = None,
    x0: Optional[np.ndarray] = None,
    P0: Optional[np.ndarray] = None,
) -> EstimateSequence:
    """Forward Kalman pass plus backward smoothing over the whole batch.

    At the last index the smoothed estimate equals the filtered one; earlier
    estimates fold in all later data through the standard gain recursion.
    """
    model = _resolve_model(data, model)
    kf = kalman_filter(data, model=model, Qcov=Qcov, Rcov=Rcov, x0=x0, P0=P0)
    A, _, _ = model.lin
    fm = kf.extras["filt_means"]
    fc = kf.extras["filt_covs"]
    pm = kf.extras["pred_means"]
    pc = kf.extras["pred_covs"]
    T = data.T
    xs = fm.copy()
    Ps = fc.copy()
    for t in range(T - 1, -1, -1):
        try:
            Gt = np.linalg.solve(pc[t + 1].T, (fc[t] @ A.T).T).T
        except np.linalg.LinAlgError:
            warnings.warn("singular predicted covariance; regularizing", RuntimeWarning)
            Gt = np.linalg.solve((pc[t + 1] + 1e-12 * np.eye(model.n)).T, (fc[t] @ A.T).T).T
        xs[t] = fm[t] + Gt @ (xs[t + 1] - pm[t + 1])
        Ps[t] = fc[t] + Gt @ (Ps[t + 1] - pc[t + 1]) @ Gt.T
    return EstimateSequence(
        t_start=data.t0, estimates=xs, delay=0, kind="fis",
        config=dict(kf.config),
        extras={"smoothed_covs": Ps},
    )
