"""Ground-truth trajectory and measurement generation.

Randomness is split into independent named substreams derived by hashing the
master seed with a label, so regeneration is bit-identical regardless of
platform or how many workers run concurrently.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

from .core import DataBatch, ValidationError, _freeze
from .models import SystemModel

__all__ = [
    "Overlay",
    "NoiseSpec",
    "InputProfile",
    "split_seed",
    "stream",
    "simulate",
]

PROFILE_KINDS = ("zero", "constant", "sinusoid", "trapezoid", "periodic_refill", "spiral_openloop")


def split_seed(master_seed: int, stream_label: str) -> int:
    """Derive an independent substream seed from (master seed, label).

    Hash-based so the result is stable across platforms and independent of
    any parallel schedule."""
    blob = f"{int(master_seed)}:{stream_label}".encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


def stream(master_seed: int, stream_label: str) -> np.random.Generator:
    return np.random.default_rng(split_seed(master_seed, stream_label))


# ---------------------------------------------------------------------------
# Noise specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Overlay:
    """Deterministic per-component sinusoid a*sin(2*pi*f*t + phase).

    A constant offset c is the special case (amplitude=c, frequency=0,
    phase=pi/2)."""

    amplitude: np.ndarray
    frequency: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitude, dtype=float).ravel()
        f = np.asarray(self.frequency, dtype=float).ravel()
        ph = np.asarray(self.phase, dtype=float).ravel()
        if not (a.shape == f.shape == ph.shape):
            raise ValidationError("overlay component arrays must share one shape")
        object.__setattr__(self, "amplitude", _freeze(a))
        object.__setattr__(self, "frequency", _freeze(f))
        object.__setattr__(self, "phase", _freeze(ph))

    @staticmethod
    def constant(values) -> "Overlay":
        v = np.asarray(values, dtype=float).ravel()
        return Overlay(v, np.zeros_like(v), np.full_like(v, math.pi / 2.0))

    def value(self, t: int) -> np.ndarray:
        return self.amplitude * np.sin(2.0 * math.pi * self.frequency * t + self.phase)

    def as_config(self) -> dict:
        return {"amplitude": self.amplitude, "frequency": self.frequency, "phase": self.phase}


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform noise on [-b, b] per component, plus optional deterministic overlays."""

    w_bounds: np.ndarray
    v_bounds: np.ndarray
    w_overlay: Optional[Overlay] = None
    v_overlay: Optional[Overlay] = None

    def __post_init__(self):
        wb = np.asarray(self.w_bounds, dtype=float).ravel()
        vb = np.asarray(self.v_bounds, dtype=float).ravel()
        if np.any(wb < 0) or np.any(vb < 0):
            raise ValidationError("noise bounds must be nonnegative")
        object.__setattr__(self, "w_bounds", _freeze(wb))
        object.__setattr__(self, "v_bounds", _freeze(vb))

    @staticmethod
    def silent(q: int, p: int) -> "NoiseSpec":
        return NoiseSpec(np.zeros(q), np.zeros(p))

    def sample_w(self, rng: np.random.Generator, times: np.ndarray) -> np.ndarray:
        base = rng.uniform(-self.w_bounds, self.w_bounds, size=(len(times), len(self.w_bounds)))
        if self.w_overlay is not None:
            base = base + np.stack([self.w_overlay.value(t) for t in times])
        return base

    def sample_v(self, rng: np.random.Generator, times: np.ndarray) -> np.ndarray:
        base = rng.uniform(-self.v_bounds, self.v_bounds, size=(len(times), len(self.v_bounds)))
        if self.v_overlay is not None:
            base = base + np.stack([self.v_overlay.value(t) for t in times])
        return base

    def as_config(self) -> dict:
        cfg = {"w_bounds": self.w_bounds, "v_bounds": self.v_bounds}
        if self.w_overlay is not None:
            cfg["w_overlay"] = self.w_overlay.as_config()
        if self.v_overlay is not None:
            cfg["v_overlay"] = self.v_overlay.as_config()
        return cfg


# ---------------------------------------------------------------------------
# Input profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InputProfile:
    """Named open-loop input family; ``periodic_refill`` is state-feedback.

    Kinds and parameters:
      zero                -- no parameters
      constant            -- value: (m,)
      sinusoid            -- amplitude/frequency/phase/offset: (m,) each,
                             frequency in cycles per step
      trapezoid           -- high, low, ramp, period on component 0 plus
                             rest: fixed values for the remaining components
      periodic_refill     -- period, target: every `period` steps the input
                             is chosen so the next state lands on target (+w)
      spiral_openloop     -- base, climb, yaw, wobble, wobble_freq for the
                             four-rotor model
    """

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValidationError(f"unknown input profile kind {self.kind!r}")

    def input_at(self, model: SystemModel, t: int, x: np.ndarray) -> np.ndarray:
        p = self.params
        if self.kind == "zero":
            return np.zeros(model.m)
        if self.kind == "constant":
            return np.asarray(p["value"], dtype=float).ravel().copy()
        if self.kind == "sinusoid":
            amp = np.asarray(p["amplitude"], dtype=float)
            freq = np.asarray(p["frequency"], dtype=float)
            phase = np.asarray(p.get("phase", np.zeros(model.m)), dtype=float)
            offset = np.asarray(p.get("offset", np.zeros(model.m)), dtype=float)
            return offset + amp * np.sin(2.0 * math.pi * freq * t + phase)
        if self.kind == "trapezoid":
            u0 = _trapezoid(t, p["high"], p["low"], p["ramp"], p["period"])
            return np.concatenate([[u0], np.asarray(p.get("rest", ()), dtype=float).ravel()])
        if self.kind == "periodic_refill":
            period = int(p["period"])
            target = np.asarray(p["target"], dtype=float)
            if t > 0 and t % period == 0:
                # u cancels the drift so that x_next = target + w
                return target - model.drift(x, np.zeros(model.m))
            return np.zeros(model.m)
        if self.kind == "spiral_openloop":
            base = float(p["base"])
            yaw = float(p.get("yaw", 0.0))
            wob = float(p.get("wobble", 0.0))
            f = float(p.get("wobble_freq", 0.0125))
            ramp = float(p.get("ramp", 2.0 / f if f > 0 else 0.0))
            # smooth turn-on: a rotating torque switched on abruptly leaves a
            # DC body-rate offset that makes the (undamped) tilt ramp away
            if ramp > 0 and t < ramp:
                wob *= 0.5 * (1.0 - math.cos(math.pi * max(t, 0) / ramp))
            s = wob * math.sin(2.0 * math.pi * f * t)
            c = wob * math.cos(2.0 * math.pi * f * t)
            return np.array([base - yaw + s, base + yaw + c, base - yaw - s, base + yaw - c])
        raise AssertionError(self.kind)

    def as_config(self) -> dict:
        return {"kind": self.kind, "params": {k: v for k, v in self.params.items()}}


def _trapezoid(t: int, high: float, low: float, ramp: int, period: int) -> float:
    plateau = (period - 2 * ramp) // 2
    k = t % period
    if k < plateau:
        return high
    if k < plateau + ramp:
        return high + (low - high) * (k - plateau + 1) / ramp
    if k < 2 * plateau + ramp:
        return low
    return low + (high - low) * (k - 2 * plateau - ramp + 1) / ramp


# ---------------------------------------------------------------------------
# Simulation driver
# ---------------------------------------------------------------------------

def simulate(
    model: SystemModel,
    x0,
    profile: InputProfile,
    noise: NoiseSpec,
    T: int,
    seed: int,
    t0: int = 0,
) -> DataBatch:
    """Roll the model forward for T steps and record the full truth.

    Deterministic in ``seed``; raises if the state leaves the model's state
    set during simulation (which indicates a misconfigured profile or noise).
    Overlay phases use the absolute time index, so extending a window
    backward (negative ``t0``) keeps deterministic components coherent.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape != (model.n,):
        raise ValidationError(f"x0 must have length n={model.n}")
    if not model.x_set.contains(x0):
        raise ValidationError("x0 outside the model's state set")
    if len(noise.w_bounds) != model.q or len(noise.v_bounds) != model.p:
        raise ValidationError("noise bounds must match model dimensions (q, p)")

    times = np.arange(t0, t0 + T + 1)
    ws = noise.sample_w(stream(seed, "w"), times[:-1])
    vs = noise.sample_v(stream(seed, "v"), times)

    xs = np.empty((T + 1, model.n))
    us = np.empty((T + 1, model.m))
    xs[0] = x0
    for k in range(T):
        us[k] = profile.input_at(model, int(times[k]), xs[k])
        xs[k + 1] = model.step(xs[k], us[k], ws[k])
        if not model.x_set.contains(xs[k + 1]):
            raise ValidationError(
                f"state left the state set at step t={times[k]} -> {times[k + 1]}"
            )
    us[T] = profile.input_at(model, int(times[T]), xs[T])
    ys = np.stack([model.output(xs[k], us[k]) for k in range(T + 1)]) + vs

    meta = {
        "model_id": model.model_id,
        "seed": int(seed),
        "t0": int(t0),
        "T": int(T),
        "x0": x0,
        "profile": profile.as_config(),
        "noise": noise.as_config(),
    }
    return DataBatch(t0=t0, inputs=us, outputs=ys, states=xs, disturbances=ws, noises=vs, meta=meta)
