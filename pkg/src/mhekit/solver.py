"""Finite-horizon estimation solves.

One window problem minimizes, over the condensed variables (x0, w_0..w_{L-1}),

    |x0 - xbar|^2_W  +  sum_j |w_j|^2_Q + |y_j - h(x_j,u_j)|^2_R  +  |y_L - h(x_L,u_L)|^2_G

with states rolled out through the dynamics, so the dynamics constraints hold
exactly by construction.  State-box violations (and bounded disturbance/noise
sets, when given) are handled by a smooth exterior quadratic penalty and
reported separately from the cost.

Two paths share one structured linear-quadratic kernel that eliminates the
stage coupling by a backward Riccati-type recursion (block-tridiagonal
elimination, O(L) in the horizon length):

* ``solve_linear_horizon`` -- exact one-shot solve for linear models;
* ``solve_horizon``        -- Levenberg-Marquardt on the condensed nonlinear
  least squares, each iteration solving the damped Gauss-Newton subproblem
  through the same kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    CostSpec,
    HorizonSolution,
    SingularModelError,
    SolverFailure,
    SolverStats,
    ValidationError,
)
from .models import SystemModel

__all__ = [
    "Prior",
    "ResidualStack",
    "SolverOptions",
    "HorizonProblem",
    "solve_horizon",
    "solve_linear_horizon",
    "rollout",
    "evaluate_cost",
    "residual_stack",
]


@dataclass(frozen=True)
class Prior:
    """Quadratic anchor |x0 - xbar|^2_W on the window's initial state."""

    xbar: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        xbar = np.asarray(self.xbar, dtype=float).ravel()
        W = np.atleast_2d(np.asarray(self.weight, dtype=float))
        if W.shape != (len(xbar), len(xbar)):
            raise ValidationError("prior weight must be n x n")
        object.__setattr__(self, "xbar", xbar)
        object.__setattr__(self, "weight", 0.5 * (W + W.T))


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 100
    grad_tol: float = 1e-8
    penalty_mu: float = 1e6
    lm_lambda0: float = 1e-3
    lm_up: float = 10.0
    lm_down: float = 0.5
    trace: bool = False


@dataclass(frozen=True)
class HorizonProblem:
    """One finite-horizon estimation problem over the window tau..tau+N.

    ``us`` and ``ys`` carry N+1 rows; ``tau`` only labels the absolute window
    placement (time-invariant models make the solve translation invariant).
    """

    model: SystemModel
    us: np.ndarray
    ys: np.ndarray
    cost: CostSpec
    tau: int = 0
    prior: Optional[Prior] = None
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        ys = np.atleast_2d(np.asarray(self.ys, dtype=float))
        us = np.asarray(self.us, dtype=float)
        if us.size == 0:
            us = np.zeros((len(ys), self.model.m))
        elif us.ndim == 1:
            us = us.reshape(-1, self.model.m)
        if len(us) != len(ys) or len(ys) < 1:
            raise ValidationError("window inputs/outputs must have equal nonzero length")
        if us.shape[1] != self.model.m or ys.shape[1] != self.model.p:
            raise ValidationError(
                f"window must have m={self.model.m} input and p={self.model.p} output columns"
            )
        object.__setattr__(self, "us", us)
        object.__setattr__(self, "ys", ys)
        if self.prior is not None and len(self.prior.xbar) != self.model.n:
            raise ValidationError("prior mean must have length n")

    @property
    def N(self) -> int:
        return len(self.ys) - 1

    @property
    def window(self) -> tuple[int, int]:
        return (self.tau, self.tau + self.N)


# ---------------------------------------------------------------------------
# Rollout, cost, residuals
# ---------------------------------------------------------------------------

def rollout(model: SystemModel, x0: np.ndarray, us: np.ndarray, ws: np.ndarray) -> np.ndarray:
    """States produced by iterating the dynamics from x0 under (us, ws)."""
    L = len(ws)
    xs = np.empty((L + 1, model.n))
    xs[0] = x0
    for j in range(L):
        xs[j + 1] = model.step(xs[j], us[j], ws[j])
    return xs


def _fit_errors(problem: HorizonProblem, xs: np.ndarray) -> np.ndarray:
    model = problem.model
    if model.h_matrix is not None:
        return problem.ys - xs @ model.h_matrix.T
    return np.stack([
        problem.ys[j] - np.asarray(model.output(xs[j], problem.us[j]), dtype=float)
        for j in range(len(xs))
    ])


def _box_violations(arr: np.ndarray, box) -> np.ndarray:
    return np.maximum(0.0, arr - box.upper) + np.minimum(0.0, arr - box.lower)


def evaluate_cost(problem: HorizonProblem, xs: np.ndarray, ws: np.ndarray):
    """(cost, penalty, max_violation) at the trajectory (xs, ws).

    ``cost`` is the prior-plus-stage-plus-terminal objective; ``penalty`` is
    the exterior quadratic penalty on any bounded state/disturbance/noise
    boxes, reported separately."""
    Q, R, G = problem.cost.Q, problem.cost.R, problem.cost.G
    es = _fit_errors(problem, xs)
    L = problem.N
    cost = float(np.einsum("ij,jk,ik->", ws, Q, ws)) if L else 0.0
    if L:
        cost += float(np.einsum("ij,jk,ik->", es[:L], R, es[:L]))
    cost += float(es[L] @ G @ es[L])
    if problem.prior is not None:
        d = xs[0] - problem.prior.xbar
        cost += float(d @ problem.prior.weight @ d)

    mu = problem.options.penalty_mu
    penalty = 0.0
    max_violation = 0.0
    model = problem.model
    for arr, box in ((xs, model.x_set), (ws, model.w_set), (es, model.v_set)):
        if box.bounded and len(arr):
            v = _box_violations(arr, box)
            penalty += mu * float(np.sum(v * v))
            max_violation = max(max_violation, float(np.max(np.abs(v))))
    return cost, penalty, max_violation


@dataclass(frozen=True)
class ResidualStack:
    """Ordered labelled residual blocks of one window problem.

    The squared norm of the stacked vector equals the prior-plus-stage
    objective plus the penalty terms, which pins the solver's cost
    bookkeeping to the quadratic-form definitions."""

    blocks: tuple[tuple[str, np.ndarray], ...]

    @property
    def stacked(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros(0)
        return np.concatenate([b for _, b in self.blocks])

    @property
    def squared_norm(self) -> float:
        s = self.stacked
        return float(s @ s)


def residual_stack(problem: HorizonProblem, xs: np.ndarray, ws: np.ndarray) -> ResidualStack:
    """Residual decomposition at (xs, ws): prior block, per-step disturbance
    and fit blocks, terminal fit block, and sqrt(mu)-scaled box violations."""
    blocks: list[tuple[str, np.ndarray]] = []
    cQ = np.linalg.cholesky(problem.cost.Q)
    cR = np.linalg.cholesky(problem.cost.R)
    cG = np.linalg.cholesky(problem.cost.G)
    es = _fit_errors(problem, xs)
    L = problem.N
    if problem.prior is not None:
        cW = np.linalg.cholesky(problem.prior.weight)
        blocks.append(("prior", cW.T @ (xs[0] - problem.prior.xbar)))
    for j in range(L):
        blocks.append((f"w[{j}]", cQ.T @ ws[j]))
        blocks.append((f"fit[{j}]", cR.T @ es[j]))
    blocks.append((f"fit[{L}]", cG.T @ es[L]))
    smu = math.sqrt(problem.options.penalty_mu)
    model = problem.model
    if model.x_set.bounded:
        for j in range(L + 1):
            blocks.append((f"xbox[{j}]", smu * model.x_set.violation(xs[j])))
    if model.w_set.bounded:
        for j in range(L):
            blocks.append((f"wbox[{j}]", smu * model.w_set.violation(ws[j])))
    if model.v_set.bounded:
        for j in range(L + 1):
            blocks.append((f"vbox[{j}]", smu * model.v_set.violation(es[j])))
    return ResidualStack(blocks=tuple(blocks))


# ---------------------------------------------------------------------------
# Structured affine-LQ kernel
# ---------------------------------------------------------------------------

def _cho_solve(cL: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    y = np.linalg.solve(cL, rhs)
    return np.linalg.solve(cL.T, y)


def _make_lq_kernel():
    """Optional compiled fast path for the zero-offset backward recursion.

    Pure-numpy fallback is used when numba is unavailable; both paths share
    the same elimination order.  Returns non-finite x0 instead of raising so
    the caller can surface a LinAlgError."""
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is an optional accelerator
        return None

    @njit(cache=True, fastmath=False)
    def kernel(As, Bs, Hxs, gxs, Hws, gws):
        L, n, q = As.shape[0], As.shape[1], Bs.shape[2]
        P = Hxs[L].copy()
        p = gxs[L].copy()
        Ks = np.empty((L, q, n))
        ks = np.empty((L, q))
        bad = False
        for j in range(L - 1, -1, -1):
            A = As[j]
            B = Bs[j]
            PB = P @ B
            S = Hws[j] + B.T @ PB
            M = PB.T @ A
            mv = gws[j] + B.T @ p
            if q == 1:
                s = S[0, 0]
                if s <= 0.0:
                    bad = True
                    break
                K = M / s
                kv = mv / s
            elif q == 2:
                a = S[0, 0]
                b = S[0, 1]
                d = S[1, 1]
                det = a * d - b * b
                if det <= 0.0 or a <= 0.0:
                    bad = True
                    break
                K = np.empty((2, n))
                for col in range(n):
                    K[0, col] = (d * M[0, col] - b * M[1, col]) / det
                    K[1, col] = (a * M[1, col] - b * M[0, col]) / det
                kv = np.empty(2)
                kv[0] = (d * mv[0] - b * mv[1]) / det
                kv[1] = (a * mv[1] - b * mv[0]) / det
            else:
                K = np.linalg.solve(S, M)
                kv = np.linalg.solve(S, mv)
            Ks[j] = K
            ks[j] = kv
            Pn = Hxs[j] + A.T @ (P @ A) - M.T @ K
            p = gxs[j] + A.T @ p - M.T @ kv
            P = 0.5 * (Pn + Pn.T)
        x0 = np.full(n, np.nan)
        ws = np.empty((L, q))
        if not bad:
            x0 = np.linalg.solve(P, -p)
            # solve() does not certify definiteness; reject indefinite P via
            # the objective curvature along x0
            if x0 @ (P @ x0) < 0.0:
                x0 = np.full(n, np.nan)
            else:
                x = x0
                for j in range(L):
                    w = -(Ks[j] @ x + ks[j])
                    ws[j] = w
                    x = As[j] @ x + Bs[j] @ w
        return x0, ws

    return kernel


_lq_kernel = _make_lq_kernel()


def _solve_spd(S: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve S x = rhs for small symmetric positive definite S.

    Hand-rolled 1x1/2x2 paths avoid LAPACK call overhead, which dominates on
    the low-dimensional benchmark models."""
    k = S.shape[0]
    if k == 1:
        return rhs / S[0, 0]
    if k == 2:
        a, b = S[0, 0], S[0, 1]
        c, d = S[1, 0], S[1, 1]
        det = a * d - b * c
        if det <= 0.0:
            raise np.linalg.LinAlgError("matrix not positive definite")
        out = np.empty_like(rhs, dtype=float)
        out[0] = (d * rhs[0] - b * rhs[1]) / det
        out[1] = (a * rhs[1] - c * rhs[0]) / det
        return out
    return np.linalg.solve(S, rhs)


def affine_lq(As, Bs, cs, Hxs, gxs, Hws, gws):
    """Structured solve of the stage-separable quadratic (see module docs).

    Stage objective: sum_j [1/2 x_j' Hx_j x_j + gx_j' x_j] over j=0..L plus
    [1/2 w_j' Hw_j w_j + gw_j' w_j] over j=0..L-1, with the affine dynamics
    x_{j+1} = A_j x_j + B_j w_j + c_j eliminated backward in O(L).
    Entries of ``cs`` may be None for a zero offset.
    """
    L = len(As)
    if _lq_kernel is not None and L >= 8 and all(c is None for c in cs):
        x0, ws = _lq_kernel(
            np.stack(As), np.stack(Bs), np.stack(Hxs),
            np.stack(gxs), np.stack(Hws), np.stack(gws),
        )
        if np.all(np.isfinite(x0)):
            return x0, ws
        raise np.linalg.LinAlgError("structured elimination produced non-finite values")
    P = np.atleast_2d(Hxs[L]).copy()
    pvec = np.asarray(gxs[L], dtype=float).copy()
    gains: list = [None] * L
    for j in range(L - 1, -1, -1):
        A, B, c = As[j], Bs[j], cs[j]
        PB = P @ B
        S = Hws[j] + B.T @ PB
        Pc_p = pvec + P @ c if c is not None else pvec
        M = PB.T @ A
        rhs = np.concatenate([M, (gws[j] + B.T @ Pc_p)[:, None]], axis=1)
        Kk = _solve_spd(S, rhs)
        K, kv = Kk[:, :-1], Kk[:, -1]
        gains[j] = (K, kv)
        Pnew = Hxs[j] + A.T @ P @ A - M.T @ K
        pvec = gxs[j] + A.T @ Pc_p - M.T @ kv
        P = 0.5 * (Pnew + Pnew.T)
    cP = np.linalg.cholesky(P)
    piv = np.diag(cP)
    # semidefinite P passes Cholesky with a ~sqrt(eps)-scale pivot
    if piv.min() <= 1e-7 * piv.max():
        raise np.linalg.LinAlgError("condensed Hessian numerically singular")
    x0 = -_cho_solve(cP, pvec)
    q = Bs[0].shape[1] if L else 0
    ws = np.empty((L, q))
    x = x0
    for j in range(L):
        K, kv = gains[j]
        w = -(K @ x + kv)
        ws[j] = w
        x = As[j] @ x + Bs[j] @ w
        if cs[j] is not None:
            x = x + cs[j]
    return x0, ws


# ---------------------------------------------------------------------------
# Exact linear path
# ---------------------------------------------------------------------------

def solve_linear_horizon(problem: HorizonProblem) -> HorizonSolution:
    """Exact QP minimizer for linear models via the structured elimination.

    Requires a linear model and unbounded constraint sets (the linear path
    carries no penalty handling).  Unique minimizer provided the condensed
    Hessian is positive definite (guaranteed with a prior or an observable
    window since Q, R, G are positive definite).
    """
    model = problem.model
    if not model.is_linear:
        raise ValidationError(f"model {model.model_id!r} is not linear")
    if model.x_set.bounded or model.w_set.bounded or model.v_set.bounded:
        raise ValidationError("linear path does not handle bounded constraint sets")
    A, B, C = model.lin
    L = problem.N
    Q, R, G = problem.cost.Q, problem.cost.R, problem.cost.G
    Bw = np.eye(model.n)

    As = [A] * L
    Bs = [Bw] * L
    cs = [B @ problem.us[j] for j in range(L)]
    CtR = C.T @ R
    Hx_mid = 2.0 * CtR @ C
    Hxs = [Hx_mid.copy() for _ in range(L)] + [2.0 * C.T @ G @ C]
    gxs = [-2.0 * CtR @ problem.ys[j] for j in range(L)] + [-2.0 * C.T @ G @ problem.ys[L]]
    if problem.prior is not None:
        Hxs[0] = Hxs[0] + 2.0 * problem.prior.weight
        gxs[0] = gxs[0] - 2.0 * problem.prior.weight @ problem.prior.xbar
    Hws = [2.0 * Q] * L
    gws = [np.zeros(model.q)] * L

    try:
        x0, ws = affine_lq(As, Bs, cs, Hxs, gxs, Hws, gws)
    except np.linalg.LinAlgError:
        raise SolverFailure(
            "condensed Hessian is not positive definite (window not observable and no prior)"
        ) from None
    ws = ws.reshape(L, model.q)
    xs = rollout(model, x0, problem.us, ws)
    cost, penalty, maxviol = evaluate_cost(problem, xs, ws)
    grad = _gradient_norm(problem, xs, ws)
    stats = SolverStats(iterations=1, grad_norm=grad, status="direct",
                        penalty=penalty, max_violation=maxviol)
    return HorizonSolution(window=problem.window, xs=xs, ws=ws, cost=cost, stats=stats)


# ---------------------------------------------------------------------------
# Levenberg-Marquardt path
# ---------------------------------------------------------------------------

def _linearize(problem: HorizonProblem, xs: np.ndarray, ws: np.ndarray):
    """Stage quadratics of the Gauss-Newton model at (xs, ws).

    Returns (As, Bs, Hxs, gxs, Hws, gws); the gx/gw blocks double as the
    exact stage gradients, so the condensed gradient falls out of one adjoint
    sweep over the same data.  Constant-output-map models share the fitting
    Hessian block across stages."""
    model = problem.model
    Q, R, G = problem.cost.Q, problem.cost.R, problem.cost.G
    mu = problem.options.penalty_mu
    L = problem.N
    es = _fit_errors(problem, xs)
    const_C = model.h_matrix

    As, Bs = [], []
    additive = model.additive_disturbance
    eye_q = np.eye(model.q)
    for j in range(L):
        if additive and model.jac_x is not None:
            As.append(np.asarray(model.jac_x(xs[j], problem.us[j], ws[j]), dtype=float))
            Bs.append(eye_q)
        else:
            Aj, Bj, _ = model.jacobians(xs[j], problem.us[j], ws[j])
            As.append(Aj)
            Bs.append(Bj)

    if const_C is not None:
        CtR = const_C.T @ R
        CtG = const_C.T @ G
        Hx_mid = 2.0 * CtR @ const_C
        Hx_end = 2.0 * CtG @ const_C
        gx_arr = np.empty((L + 1, model.n))
        if L:
            gx_arr[:L] = -2.0 * es[:L] @ CtR.T
        gx_arr[L] = -2.0 * CtG @ es[L]
        Hxs = [Hx_mid] * L + [Hx_end]
        gxs = list(gx_arr)
        Cs = [const_C] * (L + 1)
    else:
        Hxs, gxs, Cs = [], [], []
        for j in range(L + 1):
            Cj = np.asarray(
                model.jac_h(xs[j], problem.us[j]) if model.jac_h is not None
                else model.jacobians(xs[j], problem.us[j], np.zeros(model.q))[2],
                dtype=float,
            )
            Reff = R if j < L else G
            Cs.append(Cj)
            Hxs.append(2.0 * Cj.T @ Reff @ Cj)
            gxs.append(-2.0 * Cj.T @ (Reff @ es[j]))

    if model.x_set.bounded or model.v_set.bounded:
        vx = _box_violations(xs, model.x_set) if model.x_set.bounded else None
        ve = _box_violations(es, model.v_set) if model.v_set.bounded else None
        for j in range(L + 1):
            Hx, gx = Hxs[j], gxs[j]
            if vx is not None and np.any(vx[j]):
                Hx = Hx + 2.0 * mu * np.diag((vx[j] != 0.0).astype(float))
                gx = gx + 2.0 * mu * vx[j]
            if ve is not None and np.any(ve[j]):
                Cj = Cs[j]
                Hx = Hx + 2.0 * mu * Cj.T @ np.diag((ve[j] != 0.0).astype(float)) @ Cj
                gx = gx - 2.0 * mu * Cj.T @ ve[j]
            Hxs[j], gxs[j] = Hx, gx

    if problem.prior is not None:
        Hxs[0] = Hxs[0] + 2.0 * problem.prior.weight
        gxs[0] = gxs[0] + 2.0 * problem.prior.weight @ (xs[0] - problem.prior.xbar)

    Hw_const = 2.0 * Q
    Hws = [Hw_const] * L
    gws = list(2.0 * ws @ Q) if L else []
    if model.w_set.bounded and L:
        vw = _box_violations(ws, model.w_set)
        for j in range(L):
            if np.any(vw[j]):
                Hws[j] = Hw_const + 2.0 * mu * np.diag((vw[j] != 0.0).astype(float))
                gws[j] = gws[j] + 2.0 * mu * vw[j]
    return As, Bs, Hxs, gxs, Hws, gws


def _condensed_gradient(As, Bs, gxs, gws) -> np.ndarray:
    """Gradient over (x0, w_0..w_{L-1}) by one backward adjoint sweep."""
    L = len(As)
    lam = gxs[L].copy()
    gws_out = [None] * L
    for j in range(L - 1, -1, -1):
        gws_out[j] = gws[j] + Bs[j].T @ lam
        lam = gxs[j] + As[j].T @ lam
    parts = [lam] + gws_out
    return np.concatenate(parts) if parts else lam


def _gradient_norm(problem: HorizonProblem, xs: np.ndarray, ws: np.ndarray) -> float:
    As, Bs, _, gxs, _, gws = _linearize(problem, xs, ws)
    return float(np.linalg.norm(_condensed_gradient(As, Bs, gxs, gws)))


def _cold_start(problem: HorizonProblem) -> tuple[np.ndarray, np.ndarray]:
    """Prior mean if present; else a box midpoint or output-consistent guess."""
    model = problem.model
    if problem.prior is not None:
        x0 = problem.prior.xbar.copy()
        if model.x_set.bounded:
            x0 = model.x_set.project(x0)
    elif model.x_set.bounded:
        x0 = model.x_set.midpoint()
    else:
        ref = np.zeros(model.n)
        C0 = np.asarray(
            model.jac_h(ref, problem.us[0]) if model.jac_h is not None
            else finite_diff_jac_h(model, ref, problem.us[0]),
            dtype=float,
        )
        x0 = np.linalg.pinv(C0) @ problem.ys[0]
    return x0, np.zeros((problem.N, model.q))


def finite_diff_jac_h(model: SystemModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    from .models import finite_difference_jacobians

    return finite_difference_jacobians(model, x, u, np.zeros(model.q))[2]


def solve_horizon(
    problem: HorizonProblem,
    warm_start: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> HorizonSolution:
    """Levenberg-Marquardt solve of the condensed window problem.

    Terminates when the condensed gradient norm drops below
    ``grad_tol * max(1, cost)`` or after ``max_iters`` accepted linearization
    points.  Damped Gauss-Newton steps are accepted only on strict cost
    decrease, so the iterate cost is non-increasing.  Deterministic for
    identical inputs and warm start.
    """
    model = problem.model
    opts = problem.options
    if warm_start is not None:
        x0 = np.asarray(warm_start[0], dtype=float).ravel().copy()
        ws = np.asarray(warm_start[1], dtype=float).reshape(problem.N, model.q).copy()
        if x0.shape != (model.n,):
            raise ValidationError("warm start x0 has wrong length")
    else:
        x0, ws = _cold_start(problem)

    try:
        with np.errstate(over="ignore", invalid="ignore"):
            xs = rollout(model, x0, problem.us, ws)
            cost, penalty, maxviol = evaluate_cost(problem, xs, ws)
    except Exception as exc:
        raise SolverFailure(f"rollout failed at the starting point: {exc}") from exc
    total = cost + penalty
    if not (math.isfinite(total) and np.all(np.isfinite(xs))):
        raise SolverFailure("diverged rollout: non-finite cost at the starting point")

    lam = None
    trace = [] if opts.trace else None
    status = "max_iters"
    grad_norm = math.nan
    iterations = 0
    diag_mean = 1.0
    for it in range(opts.max_iters):
        iterations = it + 1
        As, Bs, Hxs, gxs, Hws, gws = _linearize(problem, xs, ws)
        grad = _condensed_gradient(As, Bs, gxs, gws)
        grad_norm = float(np.linalg.norm(grad))
        if trace is not None:
            trace.append({"iter": it, "cost": total, "grad_norm": grad_norm, "lambda": lam})
        if grad_norm <= opts.grad_tol * max(1.0, total):
            status = "converged"
            break
        diag_mean = max(_mean_hessian_diag(Hxs, Hws), 1e-12)
        at_floor = 0.5 * grad_norm**2 / diag_mean <= 1e-12 * max(1.0, total)
        if lam is None:
            lam = opts.lm_lambda0 * diag_mean

        cs = [None] * problem.N  # rollout is exact, no defects
        accepted = False
        while not accepted:
            Hxs_d = list(Hxs)
            Hxs_d[0] = Hxs[0] + 2.0 * lam * np.eye(model.n)
            damp_w = 2.0 * lam * np.eye(model.q)
            seen: dict[int, np.ndarray] = {}
            Hws_d = [seen.setdefault(id(H), H + damp_w) for H in Hws]
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    dx0, dws = affine_lq(As, Bs, cs, Hxs_d, gxs, Hws_d, gws)
                    dws = dws.reshape(problem.N, model.q)
                    x0_t = x0 + dx0
                    ws_t = ws + dws
                    xs_t = rollout(model, x0_t, problem.us, ws_t)
                    cost_t, penalty_t, maxviol_t = evaluate_cost(problem, xs_t, ws_t)
                    total_t = cost_t + penalty_t
                if not np.all(np.isfinite(xs_t)):
                    total_t = math.inf
            except (np.linalg.LinAlgError, SingularModelError, OverflowError,
                    ZeroDivisionError, FloatingPointError):
                total_t = math.inf
            if math.isfinite(total_t) and total_t < total - 1e-15 * max(1.0, total):
                x0, ws, xs = x0_t, ws_t, xs_t
                cost, penalty, maxviol, total = cost_t, penalty_t, maxviol_t, total_t
                lam = lam * opts.lm_down
                accepted = True
            else:
                # a failed trial with a Cauchy decrease near double-precision
                # resolution of the cost means the iterate is stationary to
                # working accuracy; steps that still succeed keep refining
                if at_floor:
                    status = "floor"
                    break
                lam = lam * opts.lm_up
                if lam > 1e16 * max(1.0, opts.lm_lambda0):
                    if 0.5 * grad_norm**2 / diag_mean <= 1e-10 * max(1.0, total):
                        status = "floor"
                        break
                    raise SolverFailure(
                        f"stalled: damping saturated at iteration {it} (grad {grad_norm:.2e})",
                        best=(x0, ws, total),
                    )
        if status == "floor":
            break

    stats = SolverStats(iterations=iterations, grad_norm=grad_norm, status=status,
                        penalty=penalty, max_violation=maxviol, cost_trace=trace)
    return HorizonSolution(window=problem.window, xs=xs, ws=ws, cost=cost, stats=stats)


def _mean_hessian_diag(Hxs, Hws) -> float:
    # stage blocks are widely shared between stages; sum traces per object
    traces: dict[int, float] = {}
    total = 0.0
    count = 0
    for H in Hxs:
        key = id(H)
        if key not in traces:
            traces[key] = float(H.trace())
        total += traces[key]
        count += H.shape[0]
    for H in Hws:
        key = id(H)
        if key not in traces:
            traces[key] = float(H.trace())
        total += traces[key]
        count += H.shape[0]
    return 0.5 * total / max(count, 1)
