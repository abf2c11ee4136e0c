"""Finite-horizon LQR tracking of a planned reference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DynamicsParams, LqrWeights
from .dynamics import Trajectory, linearize, wrap_angle
from .errors import DomainError


@dataclass(frozen=True, eq=False)
class GainSchedule:
    K: np.ndarray  # (H, m, n)
    P: np.ndarray  # (H+1, n, n)

    @property
    def horizon(self):
        return self.K.shape[0]


def _solve_small(M, rhs):
    """Closed-form solve for 1x1 and 2x2 systems, generic otherwise."""
    if M.shape == (1, 1):
        return rhs / M[0, 0]
    if M.shape == (2, 2):
        a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
        det = a * d - b * c
        if det == 0.0:
            raise FloatingPointError("singular R + B'PB")
        inv = np.array([[d, -b], [-c, a]]) / det
        return inv @ rhs
    return np.linalg.solve(M, rhs)


def riccati_backward(A_seq, B, Q, R, horizon=None):
    """Gains ``K_k`` and cost-to-go ``P_k`` from the backward recursion with ``P_H = Q``.

    ``K_k = (R + B' P_{k+1} B)^-1 B' P_{k+1} A_k``
    ``P_k = Q + K_k' R K_k + (A_k - B K_k)' P_{k+1} (A_k - B K_k)``
    """
    A_seq = [np.atleast_2d(np.asarray(a, dtype=float)) for a in A_seq]
    H = len(A_seq) if horizon is None else int(horizon)
    if len(A_seq) != H or H < 1:
        raise DomainError("A_seq length must equal the horizon (>= 1)")
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n, m = B.shape
    K = np.zeros((H, m, n))
    P = np.zeros((H + 1, n, n))
    P[H] = Q
    for k in range(H - 1, -1, -1):
        A = A_seq[k]
        Pn = P[k + 1]
        K[k] = _solve_small(R + B.T @ Pn @ B, B.T @ Pn @ A)
        Acl = A - B @ K[k]
        Pk = Q + K[k].T @ R @ K[k] + Acl.T @ Pn @ Acl
        P[k] = 0.5 * (Pk + Pk.T)
    return GainSchedule(K, P)


def gains_for(ref: Trajectory, weights: LqrWeights | None = None, params: DynamicsParams | None = None):
    """Gain schedule along a reference, linearized at each reference heading."""
    w = weights or LqrWeights()
    A_seq = []
    B = None
    for k in range(ref.horizon):
        A, B = linearize(float(ref.states[k, 2]), params)
        A_seq.append(A)
    return riccati_backward(A_seq, B, w.Qm, w.Rm)


def track(state, ref_state, ref_input, K, u_lo, u_hi):
    """``u = -K (x - x_ref) + u_ref`` with wrapped heading error, clamped to bounds."""
    e = np.asarray(state, dtype=float) - np.asarray(ref_state, dtype=float)
    e[2] = wrap_angle(e[2])
    u = -np.asarray(K, dtype=float) @ e + np.asarray(ref_input, dtype=float)
    return np.minimum(np.maximum(u, u_lo), u_hi)
