"""Discrete time-varying unicycle-like vehicle model.

State ``(x, y, theta, v, omega)``, input ``(t, s)`` = desired speed and turn
rate. Speed and turn rate follow first-order lags toward the commands::

    x'     = x + dt cos(theta~) v        v'     = (1 - alpha) v + alpha t
    y'     = y + dt sin(theta~) v        omega' = (1 - beta) omega + beta s
    theta' = theta + dt omega

where ``theta~`` is the heading at which the linearization is frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels, io
from .config import DynamicsParams
from .errors import DomainError


class VehicleState(NamedTuple):
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    v: float = 0.0
    omega: float = 0.0


class ControlInput(NamedTuple):
    t: float = 0.0
    s: float = 0.0


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    out = a - 2.0 * np.pi * np.ceil((a - np.pi) / (2.0 * np.pi))
    return float(out) if out.ndim == 0 else out


def linearize(theta_ref, params: DynamicsParams | None = None):
    """``(A_k, B)`` for the heading estimate ``theta_ref``."""
    p = params or DynamicsParams()
    if not math.isfinite(theta_ref):
        raise DomainError("heading estimate must be finite")
    A = np.eye(5)
    A[0, 3] = p.dt * math.cos(theta_ref)
    A[1, 3] = p.dt * math.sin(theta_ref)
    A[2, 4] = p.dt
    A[3, 3] = 1.0 - p.alpha
    A[4, 4] = 1.0 - p.beta
    B = np.zeros((5, 2))
    B[3, 0] = p.alpha
    B[4, 1] = p.beta
    return A, B


def clamp_input(u, lo, hi):
    return np.minimum(np.maximum(np.asarray(u, dtype=float), lo), hi)


def step(state, u, params: DynamicsParams | None = None) -> VehicleState:
    """One transition with the linearization frozen at the current heading."""
    p = params or DynamicsParams()
    x = np.asarray(state, dtype=float)
    uc = clamp_input(u, p.u_lo, p.u_hi)
    A, B = linearize(float(x[2]), p)
    nxt = A @ x + B @ uc
    nxt[2] = wrap_angle(nxt[2])
    return VehicleState(*(float(v) for v in nxt))


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray  # (H+1, 5)
    inputs: np.ndarray  # (H, 2)

    def __post_init__(self):
        if self.states.shape[0] != self.inputs.shape[0] + 1:
            raise DomainError("a trajectory needs exactly one more state than inputs")

    @property
    def horizon(self):
        return self.inputs.shape[0]

    @property
    def positions(self):
        return self.states[:, :2]

    def save_csv(self, path):
        rows = []
        for k in range(self.horizon + 1):
            u = self.inputs[k] if k < self.horizon else (math.nan, math.nan)
            rows.append((k, *(repr(float(v)) for v in self.states[k]), *(repr(float(v)) for v in u)))
        io.write_csv(path, ("k", "x", "y", "theta", "v", "omega", "t", "s"), rows)

    @classmethod
    def load_csv(cls, path):
        rows = io.read_csv(path)
        states = np.array([[float(r[c]) for c in ("x", "y", "theta", "v", "omega")] for r in rows])
        inputs = np.array([[float(r["t"]), float(r["s"])] for r in rows[:-1]])
        return cls(states, inputs.reshape(-1, 2))


def rollout_batch(state0, inputs, params: DynamicsParams | None = None):
    """Propagate one start state under ``(N, H, 2)`` input sequences -> ``(N, H+1, 5)``."""
    p = params or DynamicsParams()
    u = clamp_input(inputs, p.u_lo, p.u_hi)
    if u.ndim != 3 or u.shape[1] < 1 or u.shape[2] != 2:
        raise DomainError(f"inputs must have shape (N, H>=1, 2), got {u.shape}")
    s0 = np.broadcast_to(np.asarray(state0, dtype=float), (u.shape[0], 5))
    return _kernels.rollout(s0, u, p.dt, p.alpha, p.beta)


def rollout(state0, inputs, params: DynamicsParams | None = None) -> Trajectory:
    """Step repeatedly, re-linearizing at each propagated heading."""
    p = params or DynamicsParams()
    u = clamp_input(np.asarray(inputs, dtype=float).reshape(-1, 2), p.u_lo, p.u_hi)
    if len(u) < 1:
        raise DomainError("rollout horizon must be at least 1")
    states = rollout_batch(state0, u[None], p)[0]
    return Trajectory(states, u)
