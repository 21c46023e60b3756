"""Registry of discrete-time system models with constraint sets and
derivative providers.

Every model maps ``(x, u, w) -> x_next`` and ``(x, u) -> y``.  Models whose
disturbance enters additively expose that via ``additive_disturbance`` (then
``q == n`` and ``step(x,u,w) == step(x,u,0) + w`` exactly), which estimators
exploit to reconstruct disturbances from published state sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional

import numpy as np

from .core import SingularModelError, ValidationError, _freeze

__all__ = [
    "Box",
    "SystemModel",
    "scalar_integrator",
    "batch_reactor",
    "make_random_lti",
    "cstr",
    "quadrotor",
    "finite_difference_jacobians",
    "get_model",
    "CSTR_STEADY_STATE",
    "CSTR_STEADY_INPUT",
    "QUADROTOR_HOVER_SPEED",
]


# ---------------------------------------------------------------------------
# Constraint sets (boxes; an all-infinite box means "unconstrained")
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValidationError("box bounds must satisfy lower <= upper componentwise")
        object.__setattr__(self, "lower", _freeze(lo))
        object.__setattr__(self, "upper", _freeze(hi))

    @staticmethod
    def everything(dim: int) -> "Box":
        return Box(np.full(dim, -np.inf), np.full(dim, np.inf))

    @property
    def bounded(self) -> bool:
        return bool(np.any(np.isfinite(self.lower)) or np.any(np.isfinite(self.upper)))

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def project(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float).ravel(), self.lower, self.upper)

    def midpoint(self) -> np.ndarray:
        mid = 0.5 * (self.lower + self.upper)
        return np.where(np.isfinite(mid), mid, 0.0)

    def violation(self, x) -> np.ndarray:
        """Signed componentwise violation: positive above, negative below, zero inside."""
        x = np.asarray(x, dtype=float).ravel()
        return np.maximum(0.0, x - self.upper) + np.minimum(0.0, x - self.lower)

    def as_config(self) -> dict:
        return {"lower": self.lower, "upper": self.upper}


# ---------------------------------------------------------------------------
# System model record
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemModel:
    """Discrete-time model x+ = step(x, u, w), y = output(x, u).

    ``jac_x``/``jac_w``/``jac_h`` are analytic Jacobian callables or None, in
    which case :func:`finite_difference_jacobians` is used.  ``lin`` holds
    ``(A, B, C)`` for linear models, enabling the exact QP solve path.
    Models are immutable; all callables are pure and reentrant.
    """

    model_id: str
    n: int
    m: int
    q: int
    p: int
    step: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    output: Callable[[np.ndarray, np.ndarray], np.ndarray]
    additive_disturbance: bool
    x_set: Box
    w_set: Box
    v_set: Box
    jac_x: Optional[Callable] = None
    jac_w: Optional[Callable] = None
    jac_h: Optional[Callable] = None
    h_matrix: Optional[np.ndarray] = None  # set when output(x, u) == h_matrix @ x
    lin: Optional[tuple] = None  # (A, B, C) when the model is linear
    params: Mapping[str, Any] = field(default_factory=dict)

    @property
    def is_linear(self) -> bool:
        return self.lin is not None

    def drift(self, x, u) -> np.ndarray:
        """Disturbance-free step; for additive models step = drift + w."""
        return self.step(x, u, np.zeros(self.q))

    def jacobians(self, x, u, w) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(df/dx, df/dw, dh/dx) at (x, u, w), analytic where available."""
        if self.jac_x is not None and self.jac_w is not None and self.jac_h is not None:
            return (
                np.asarray(self.jac_x(x, u, w), dtype=float),
                np.asarray(self.jac_w(x, u, w), dtype=float),
                np.asarray(self.jac_h(x, u), dtype=float),
            )
        fd = finite_difference_jacobians(self, x, u, w)
        Fx = np.asarray(self.jac_x(x, u, w), dtype=float) if self.jac_x else fd[0]
        Fw = np.asarray(self.jac_w(x, u, w), dtype=float) if self.jac_w else fd[1]
        Hx = np.asarray(self.jac_h(x, u), dtype=float) if self.jac_h else fd[2]
        return Fx, Fw, Hx

    def card(self) -> dict:
        """JSON-ready model card: dimensions, parameters, constraint sets."""
        return {
            "model_id": self.model_id,
            "dims": {"n": self.n, "m": self.m, "q": self.q, "p": self.p},
            "additive_disturbance": self.additive_disturbance,
            "linear": self.is_linear,
            "x_set": self.x_set.as_config(),
            "w_set": self.w_set.as_config(),
            "v_set": self.v_set.as_config(),
            "params": {k: v for k, v in self.params.items()},
        }


def finite_difference_jacobians(model: SystemModel, x, u, w):
    """Forward-difference Jacobians (df/dx, df/dw, dh/dx).

    Step sizes follow h_i = sqrt(machine eps) * (1 + |z_i|) per coordinate.
    Model singularity errors propagate unchanged.
    """
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    sq = math.sqrt(np.finfo(float).eps)
    f0 = np.asarray(model.step(x, u, w), dtype=float)
    h0 = np.asarray(model.output(x, u), dtype=float)
    Fx = np.empty((model.n, model.n))
    Hx = np.empty((model.p, model.n))
    for i in range(model.n):
        hi = sq * (1.0 + abs(x[i]))
        xp = x.copy()
        xp[i] += hi
        Fx[:, i] = (np.asarray(model.step(xp, u, w)) - f0) / hi
        Hx[:, i] = (np.asarray(model.output(xp, u)) - h0) / hi
    Fw = np.empty((model.n, model.q))
    for i in range(model.q):
        hi = sq * (1.0 + abs(w[i]))
        wp = w.copy()
        wp[i] += hi
        Fw[:, i] = (np.asarray(model.step(x, u, wp)) - f0) / hi
    return Fx, Fw, Hx


# ---------------------------------------------------------------------------
# Discretizers (Jacobians propagated alongside)
# ---------------------------------------------------------------------------

def discretize_euler(rhs, rhs_jac, dt: float, dim: Optional[int] = None):
    """Euler map x + dt*rhs(x, u) and its state Jacobian I + dt*J."""
    eye = np.eye(dim) if dim else None

    def step0(x, u):
        return x + dt * rhs(x, u)

    def jac0(x, u):
        base = eye if eye is not None else np.eye(len(x))
        return base + dt * rhs_jac(x, u)

    return step0, jac0


def discretize_rk4(rhs, rhs_jac, dt: float, dim: Optional[int] = None):
    """Classical RK4 map and its state Jacobian via chained stage Jacobians."""
    fixed_eye = np.eye(dim) if dim else None

    def step0(x, u):
        k1 = rhs(x, u)
        k2 = rhs(x + 0.5 * dt * k1, u)
        k3 = rhs(x + 0.5 * dt * k2, u)
        k4 = rhs(x + dt * k3, u)
        return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def jac0(x, u):
        eye = fixed_eye if fixed_eye is not None else np.eye(len(x))
        k1 = rhs(x, u)
        K1 = rhs_jac(x, u)
        x2 = x + 0.5 * dt * k1
        k2 = rhs(x2, u)
        K2 = rhs_jac(x2, u) @ (eye + 0.5 * dt * K1)
        x3 = x + 0.5 * dt * k2
        k3 = rhs(x3, u)
        K3 = rhs_jac(x3, u) @ (eye + 0.5 * dt * K2)
        x4 = x + dt * k3
        K4 = rhs_jac(x4, u) @ (eye + dt * K3)
        return eye + (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)

    return step0, jac0


def _additive(step0):
    def step(x, u, w):
        return step0(np.asarray(x, dtype=float), np.asarray(u, dtype=float)) + np.asarray(w, dtype=float)

    return step


# ---------------------------------------------------------------------------
# Scalar integrator
# ---------------------------------------------------------------------------

def scalar_integrator() -> SystemModel:
    """One-state random walk: x+ = x + w, y = x + v (no control input)."""
    A = np.array([[1.0]])
    B = np.zeros((1, 0))
    C = np.array([[1.0]])

    def step(x, u, w):
        return np.asarray(x, dtype=float) + np.asarray(w, dtype=float)

    def output(x, u):
        return np.asarray(x, dtype=float).copy()

    return SystemModel(
        model_id="scalar",
        n=1, m=0, q=1, p=1,
        step=step,
        output=output,
        additive_disturbance=True,
        x_set=Box.everything(1),
        w_set=Box.everything(1),
        v_set=Box.everything(1),
        jac_x=lambda x, u, w: A,
        jac_w=lambda x, u, w: np.eye(1),
        jac_h=lambda x, u: C,
        h_matrix=C,
        lin=(A, B, C),
    )


# ---------------------------------------------------------------------------
# Two-state batch reactor (Euler)
# ---------------------------------------------------------------------------

REACTOR_K1 = 0.16
REACTOR_K2 = 0.0064
REACTOR_DT = 0.1


def batch_reactor() -> SystemModel:
    """Two-state reversible-reaction reactor, Euler map with dt=0.1.

    x1+ = x1 + dt*(-2*k1*x1^2 + 2*k2*x2) + u1 + w1
    x2+ = x2 + dt*( k1*x1^2 -  k2*x2)    + u2 + w2
    y   = x1 + x2 + v
    Controls and disturbances enter additively outside the Euler drift (the
    control empties/refills the reactor instantaneously).
    """
    k1, k2, dt = REACTOR_K1, REACTOR_K2, REACTOR_DT

    def rhs(x, u):
        return np.array([-2.0 * k1 * x[0] ** 2 + 2.0 * k2 * x[1],
                         k1 * x[0] ** 2 - k2 * x[1]])

    def rhs_jac(x, u):
        return np.array([[-4.0 * k1 * x[0], 2.0 * k2],
                         [2.0 * k1 * x[0], -k2]])

    step0, jac0 = discretize_euler(rhs, rhs_jac, dt, dim=2)

    def step(x, u, w):
        return step0(np.asarray(x, dtype=float), u) + np.asarray(u, dtype=float) + np.asarray(w, dtype=float)

    def output(x, u):
        return np.array([x[0] + x[1]])

    return SystemModel(
        model_id="reactor",
        n=2, m=2, q=2, p=1,
        step=step,
        output=output,
        additive_disturbance=True,
        x_set=Box.everything(2),
        w_set=Box.everything(2),
        v_set=Box.everything(1),
        jac_x=lambda x, u, w: jac0(np.asarray(x, dtype=float), u),
        jac_w=lambda x, u, w: np.eye(2),
        jac_h=lambda x, u: np.array([[1.0, 1.0]]),
        h_matrix=np.array([[1.0, 1.0]]),
        params={"k1": k1, "k2": k2, "dt": dt},
    )


# ---------------------------------------------------------------------------
# Random stable LTI
# ---------------------------------------------------------------------------

def make_random_lti(n: int, m: int, p: int, seed: int) -> SystemModel:
    """Seeded random stable LTI model x+ = Ax + Bu + w, y = Cx + v.

    A is drawn with entries N(0, 0.95^2/n) and resampled until its spectral
    radius is below one, so the map is deterministic in the seed.
    """
    if min(n, m, p) < 1:
        raise ValidationError("dimensions must be at least 1")
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        A = 0.95 * rng.standard_normal((n, n)) / math.sqrt(n)
        if np.max(np.abs(np.linalg.eigvals(A))) < 1.0:
            break
    else:  # pragma: no cover - astronomically unlikely
        raise RuntimeError("failed to sample a stable A")
    B = rng.standard_normal((n, m)) / math.sqrt(m)
    C = rng.standard_normal((p, n)) / math.sqrt(n)
    A.setflags(write=False)
    B.setflags(write=False)
    C.setflags(write=False)

    def step(x, u, w):
        return A @ np.asarray(x, dtype=float) + B @ np.asarray(u, dtype=float) + np.asarray(w, dtype=float)

    def output(x, u):
        return C @ np.asarray(x, dtype=float)

    return SystemModel(
        model_id=f"lti:{n}:{m}:{p}:{seed}",
        n=n, m=m, q=n, p=p,
        step=step,
        output=output,
        additive_disturbance=True,
        x_set=Box.everything(n),
        w_set=Box.everything(n),
        v_set=Box.everything(p),
        jac_x=lambda x, u, w: A,
        jac_w=lambda x, u, w: np.eye(n),
        jac_h=lambda x, u: C,
        h_matrix=C,
        lin=(A, B, C),
        params={"seed": seed, "spectral_radius": float(np.max(np.abs(np.linalg.eigvals(A))))},
    )


# ---------------------------------------------------------------------------
# Continuous stirred-tank reactor (RK4)
# ---------------------------------------------------------------------------

# Physical constants of the cited exothermic A->B reactor benchmark.  The
# open-loop steady state these produce is (0.8778, 324.4966, 0.659) at
# u = (300, 0.1); published summaries sometimes round the temperature
# differently, so the equilibrium is pinned here by computation.
CSTR_PARAMS = {
    "F0": 0.1,      # feed flowrate [m^3/min]
    "T0": 350.0,    # feed temperature [K]
    "c0": 1.0,      # feed concentration [kmol/m^3]
    "r": 0.219,     # tank radius [m]
    "k0": 7.2e10,   # rate constant [1/min]
    "EoR": 8750.0,  # activation energy over gas constant [K]
    "U": 54.94,     # heat transfer coefficient [kJ/(min m^2 K)]
    "rho": 1000.0,  # density [kg/m^3]
    "Cp": 0.239,    # heat capacity [kJ/(kg K)]
    "dH": -5.0e4,   # reaction enthalpy [kJ/kmol]
    "dt": 0.25,     # RK4 sampling time [min]
}

CSTR_STEADY_INPUT = np.array([300.0, 0.1])
CSTR_STEADY_STATE = np.array([0.8778252, 324.4966086, 0.659])


def cstr() -> SystemModel:
    """Three-state CSTR (concentration, temperature, level), RK4 with dt=0.25.

    Inputs are coolant temperature and outlet flowrate; only the reactor
    temperature is measured.  State box: [0.5,1.5] x [200,400] x [0.5,1.5].
    """
    P = CSTR_PARAMS
    area = math.pi * P["r"] ** 2
    heat = -P["dH"] / (P["rho"] * P["Cp"])
    cool = 2.0 * P["U"] / (P["r"] * P["rho"] * P["Cp"])

    def rhs(x, u):
        c, T, h = x
        Tc, F = u
        kT = P["k0"] * math.exp(-P["EoR"] / T)
        return np.array([
            P["F0"] * (P["c0"] - c) / (area * h) - kT * c,
            P["F0"] * (P["T0"] - T) / (area * h) + heat * kT * c + cool * (Tc - T),
            (P["F0"] - F) / area,
        ])

    def rhs_jac(x, u):
        c, T, h = x
        kT = P["k0"] * math.exp(-P["EoR"] / T)
        dk = kT * P["EoR"] / T ** 2
        return np.array([
            [-P["F0"] / (area * h) - kT, -dk * c, -P["F0"] * (P["c0"] - c) / (area * h ** 2)],
            [heat * kT, -P["F0"] / (area * h) + heat * dk * c - cool,
             -P["F0"] * (P["T0"] - T) / (area * h ** 2)],
            [0.0, 0.0, 0.0],
        ])

    step0, jac0 = discretize_rk4(rhs, rhs_jac, P["dt"], dim=3)

    return SystemModel(
        model_id="cstr",
        n=3, m=2, q=3, p=1,
        step=_additive(step0),
        output=lambda x, u: np.array([x[1]]),
        additive_disturbance=True,
        x_set=Box(np.array([0.5, 200.0, 0.5]), np.array([1.5, 400.0, 1.5])),
        w_set=Box.everything(3),
        v_set=Box.everything(1),
        jac_x=lambda x, u, w: jac0(np.asarray(x, dtype=float), np.asarray(u, dtype=float)),
        jac_w=lambda x, u, w: np.eye(3),
        jac_h=lambda x, u: np.array([[0.0, 1.0, 0.0]]),
        h_matrix=np.array([[0.0, 1.0, 0.0]]),
        params={**P, "x_ss": CSTR_STEADY_STATE, "u_ss": CSTR_STEADY_INPUT},
    )


# ---------------------------------------------------------------------------
# 12-state quadrotor with flexible blades (Euler)
# ---------------------------------------------------------------------------

QUADROTOR_PARAMS = {
    "mass": 1.9,
    "J": (5.9e-3, 5.9e-3, 10.7e-3),
    "g": 9.8,
    "l": 0.25,
    "cT": 1.0e-5,
    "cQ": 1.0e-6,
    "blade": 1.14,    # flexible-blade coupling, scales e3 cross Omega
    "drag": 0.0297,   # yaw-rate damping, scales e3 e3^T
    "dt": 0.05,
}

QUADROTOR_HOVER_SPEED = math.sqrt(
    QUADROTOR_PARAMS["mass"] * QUADROTOR_PARAMS["g"] / (4.0 * QUADROTOR_PARAMS["cT"])
)

_E3 = np.array([0.0, 0.0, 1.0])


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def quad_rotation(xi: np.ndarray) -> np.ndarray:
    """Body-to-inertial rotation Rz(psi) Ry(theta) Rx(phi)."""
    cph, sph = math.cos(xi[0]), math.sin(xi[0])
    cth, sth = math.cos(xi[1]), math.sin(xi[1])
    cps, sps = math.cos(xi[2]), math.sin(xi[2])
    Rx = np.array([[1, 0, 0], [0, cph, -sph], [0, sph, cph]])
    Ry = np.array([[cth, 0, sth], [0, 1, 0], [-sth, 0, cth]])
    Rz = np.array([[cps, -sps, 0], [sps, cps, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def quad_body_rate_map(xi: np.ndarray) -> np.ndarray:
    """Gamma(xi): body angular velocity to Euler-angle rates.

    Singular at pitch +-pi/2 (secant blow-up); callers must guard."""
    cph, sph = math.cos(xi[0]), math.sin(xi[0])
    cth = math.cos(xi[1])
    tth = math.tan(xi[1])
    return np.array([
        [1.0, sph * tth, cph * tth],
        [0.0, cph, -sph],
        [0.0, sph / cth, cph / cth],
    ])


def quadrotor() -> SystemModel:
    """Quadrotor with flexible blades: 12 states, 4 rotor speeds, Euler dt=0.05.

    State is [position, Euler angles, velocity, body rates] in an inertial
    frame whose vertical axis points into the Earth; only position and
    attitude are measured.  The thrust/torque mixer acts on squared rotor
    speeds; the model input is the rotor speeds themselves.
    """
    P = QUADROTOR_PARAMS
    mass, g, l, cT, cQ = P["mass"], P["g"], P["l"], P["cT"], P["cQ"]
    Jd = np.array(P["J"])
    Jinv = 1.0 / Jd
    Bfl = P["blade"] * _skew(_E3)
    Dd = np.diag([0.0, 0.0, P["drag"]])
    mixer = np.array([
        [cT, cT, cT, cT],
        [0.0, -l * cT, 0.0, l * cT],
        [l * cT, 0.0, -l * cT, 0.0],
        [-cQ, cQ, -cQ, cQ],
    ])
    dt = P["dt"]

    def _check(xi):
        if abs(math.cos(xi[1])) < 1e-9:
            raise SingularModelError("quadrotor attitude map singular at pitch +-pi/2")

    def rhs(x, u):
        xi, v, Om = x[3:6], x[6:9], x[9:12]
        _check(xi)
        thrust_torque = mixer @ (np.asarray(u, dtype=float) ** 2)
        Tf, tau = thrust_torque[0], thrust_torque[1:]
        R = quad_rotation(xi)
        dv = g * _E3 - (Tf / mass) * (R @ _E3) - (R @ (Bfl @ Om)) / mass
        dxi = quad_body_rate_map(xi) @ Om
        dOm = Jinv * (-np.cross(Om, Jd * Om) + tau - Dd @ Om)
        return np.concatenate([v, dxi, dv, dOm])

    def rhs_jac(x, u):
        xi, Om = x[3:6], x[9:12]
        _check(xi)
        thrust_torque = mixer @ (np.asarray(u, dtype=float) ** 2)
        Tf = thrust_torque[0]
        cph, sph = math.cos(xi[0]), math.sin(xi[0])
        cth, sth = math.cos(xi[1]), math.sin(xi[1])
        cps, sps = math.cos(xi[2]), math.sin(xi[2])
        Rx = np.array([[1, 0, 0], [0, cph, -sph], [0, sph, cph]])
        Ry = np.array([[cth, 0, sth], [0, 1, 0], [-sth, 0, cth]])
        Rz = np.array([[cps, -sps, 0], [sps, cps, 0], [0, 0, 1]])
        dRx = np.array([[0, 0, 0], [0, -sph, -cph], [0, cph, -sph]])
        dRy = np.array([[-sth, 0, cth], [0, 0, 0], [-cth, 0, -sth]])
        dRz = np.array([[-sps, -cps, 0], [cps, -sps, 0], [0, 0, 0]])
        R = Rz @ Ry @ Rx
        dR = (Rz @ Ry @ dRx, Rz @ dRy @ Rx, dRz @ Ry @ Rx)

        J = np.zeros((12, 12))
        J[0:3, 6:9] = np.eye(3)
        # attitude kinematics
        Gm = quad_body_rate_map(xi)
        tth, sec2 = sth / cth, 1.0 / cth ** 2
        dG_dph = np.array([
            [0.0, cph * tth, -sph * tth],
            [0.0, -sph, -cph],
            [0.0, cph / cth, -sph / cth],
        ])
        dG_dth = np.array([
            [0.0, sph * sec2, cph * sec2],
            [0.0, 0.0, 0.0],
            [0.0, sph * sth * sec2, cph * sth * sec2],
        ])
        J[3:6, 3] = dG_dph @ Om
        J[3:6, 4] = dG_dth @ Om
        J[3:6, 9:12] = Gm
        # translational dynamics
        BOm = Bfl @ Om
        for k in range(3):
            J[6:9, 3 + k] = -(Tf / mass) * (dR[k] @ _E3) - (dR[k] @ BOm) / mass
        J[6:9, 9:12] = -(R @ Bfl) / mass
        # rotational dynamics: d/dOm of -Om x J Om is (J Om)^x - Om^x J
        J[9:12, 9:12] = (Jinv[:, None]) * (_skew(Jd * Om) - _skew(Om) @ np.diag(Jd) - Dd)
        return J

    step0, jac0 = discretize_euler(rhs, rhs_jac, dt, dim=12)
    Hx = np.hstack([np.eye(6), np.zeros((6, 6))])

    return SystemModel(
        model_id="quadrotor",
        n=12, m=4, q=12, p=6,
        step=_additive(step0),
        output=lambda x, u: np.asarray(x, dtype=float)[:6].copy(),
        additive_disturbance=True,
        x_set=Box.everything(12),
        w_set=Box.everything(12),
        v_set=Box.everything(6),
        jac_x=lambda x, u, w: jac0(np.asarray(x, dtype=float), np.asarray(u, dtype=float)),
        jac_w=lambda x, u, w: np.eye(12),
        jac_h=lambda x, u: Hx,
        h_matrix=Hx,
        params={**P, "hover_speed": QUADROTOR_HOVER_SPEED},
    )


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

def get_model(model_id: str) -> SystemModel:
    """Resolve a model id: scalar | reactor | cstr | quadrotor | lti:n:m:p:seed."""
    if model_id == "scalar":
        return scalar_integrator()
    if model_id == "reactor":
        return batch_reactor()
    if model_id == "cstr":
        return cstr()
    if model_id == "quadrotor":
        return quadrotor()
    if model_id.startswith("lti:"):
        parts = model_id.split(":")
        if len(parts) != 5:
            raise ValidationError(f"bad LTI id {model_id!r}, expected lti:<n>:<m>:<p>:<seed>")
        n, m, p, seed = (int(v) for v in parts[1:])
        return make_random_lti(n, m, p, seed)
    raise ValidationError(f"unknown model id {model_id!r}")
