"""Sampling-based local planner with competency-aware variants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import io
from .config import CameraModel, CompetencyConfig, DynamicsParams, PlannerConfig
from .dynamics import Trajectory, rollout_batch, wrap_angle
from .errors import ConfigurationError, DomainError
from .world import ground_points, project_ground_points


@dataclass(frozen=True)
class GoalSpec:
    x_goal: tuple
    tolerance: float = 1.0
    timeout: float = 90.0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise DomainError("goal tolerance must be positive")


@dataclass(frozen=True, eq=False)
class Diagnostics:
    cost: np.ndarray  # (N,)
    min_competency: np.ndarray  # (N,)
    rejected: tuple  # per candidate: "", "fov" or "competency"
    vacuous: np.ndarray  # (N,) no footprint point projected into view

    def save_csv(self, path):
        rows = [
            (i, repr(float(c)), repr(float(m)), r, int(v))
            for i, (c, m, r, v) in enumerate(zip(self.cost, self.min_competency, self.rejected, self.vacuous))
        ]
        io.write_csv(path, ("candidate", "cost", "min_competency", "rejected", "vacuous"), rows)


@dataclass(frozen=True, eq=False)
class PlanResult:
    kind: str  # follow_path | safe_maneuver
    reference: Trajectory | None
    maneuver: np.ndarray | None  # (steps, 2)
    diagnostics: Diagnostics
    candidates: np.ndarray = field(repr=False, default=None)  # (N, H+1, 5)
    selected: int = -1

    def __post_init__(self):
        if (self.reference is None) == (self.maneuver is None):
            raise DomainError("exactly one of reference and maneuver must be set")


# ---------------------------------------------------------------------------
# building blocks


def sample_action_sequences(cfg: PlannerConfig, seed):
    """``(N, H, 2)`` constant-input sequences drawn uniformly from the input box."""
    rng = np.random.default_rng(seed)
    lo = np.asarray(cfg.u_min, dtype=float)
    hi = np.asarray(cfg.u_max, dtype=float)
    u = lo + (hi - lo) * rng.random((cfg.n_samples, 2))
    return np.repeat(u[:, None, :], cfg.horizon, axis=1)


def path_cost(final_states, goal: GoalSpec, cfg: PlannerConfig):
    """Terminal cost: squared heading-to-goal error plus weighted axis distances."""
    s = np.asarray(final_states, dtype=float)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    gx, gy = goal.x_goal
    dx = gx - s[:, 0]
    dy = gy - s[:, 1]
    err = wrap_angle(np.arctan2(dy, dx) - s[:, 2])
    err = np.where(np.hypot(dx, dy) <= goal.tolerance, 0.0, err)
    cost = cfg.alpha_ori * err**2 + cfg.alpha_goal_x * np.abs(dx) + cfg.alpha_goal_y * np.abs(dy)
    return float(cost[0]) if single else cost


def fov_filter(states, cam: CameraModel, state):
    """Mask of candidates whose every future position projects into the current view."""
    states = np.asarray(states, dtype=float)
    n, h1 = states.shape[:2]
    _, ok = project_ground_points(cam, state, states[:, 1:, :2].reshape(-1, 2))
    return ok.reshape(n, h1 - 1).all(axis=1)


def footprint_points(states, footprint):
    """Corners plus a 3x3 interior grid of the vehicle rectangle at each state, ``(..., 13, 2)``."""
    length, width = footprint
    fx = np.array([-0.5, 0.5, 0.5, -0.5] + [-1 / 3, 0, 1 / 3] * 3) * length
    fy = np.array([-0.5, -0.5, 0.5, 0.5] + [-1 / 3] * 3 + [0] * 3 + [1 / 3] * 3) * width
    s = np.asarray(states, dtype=float)
    c, sn = np.cos(s[..., 2:3]), np.sin(s[..., 2:3])
    px = s[..., 0:1] + c * fx - sn * fy
    py = s[..., 1:2] + sn * fx + c * fy
    return np.stack([px, py], axis=-1)


def min_traj_competency(states, comp_map, cam: CameraModel, state, footprint):
    """Lowest map value under the vehicle footprint along each trajectory.

    ``states`` is ``(H+1, 5)`` or ``(N, H+1, 5)``; the start state is skipped.
    Returns ``(values, vacuous)``; a candidate with no projected point scores 1.
    """
    s = np.asarray(states, dtype=float)
    single = s.ndim == 2
    if single:
        s = s[None]
    m = np.asarray(comp_map, dtype=float)
    pts = footprint_points(s[:, 1:], footprint)  # (N, H, 13, 2)
    uv, ok = project_ground_points(cam, state, pts.reshape(-1, 2))
    vals = np.ones(len(ok))
    iu = np.floor(uv[ok, 0]).astype(np.int64)
    iv = np.floor(uv[ok, 1]).astype(np.int64)
    vals[ok] = m[iv, iu]
    vals = vals.reshape(len(s), -1)
    out = vals.min(axis=1)
    vacuous = ~ok.reshape(len(s), -1).any(axis=1)
    if single:
        return float(out[0]), bool(vacuous[0])
    return out, vacuous


@lru_cache(maxsize=16)
def near_field_mask(cam: CameraModel, depth, half_width):
    """Pixels seeing the ground patch ``[0, depth] x [-half_width, half_width]`` ahead of the vehicle."""
    pts, valid = ground_points(cam, (0.0, 0.0, 0.0))
    with np.errstate(invalid="ignore"):
        mask = valid & (pts[..., 0] >= 0) & (pts[..., 0] <= depth) & (np.abs(pts[..., 1]) <= half_width)
    mask.setflags(write=False)
    return mask


def near_field_low_competency(comp_map, cam: CameraModel, eta, cfg: PlannerConfig | None = None):
    cfg = cfg or PlannerConfig()
    mask = near_field_mask(cam, cfg.near_field_depth, 0.5 * cfg.near_field_width_factor * cfg.footprint[1])
    if not mask.any():
        return False
    return bool(np.mean(np.asarray(comp_map)[mask]) < eta)


def safe_maneuver(comp_map=None, cfg: PlannerConfig | None = None, dt=0.1, invocation=0):
    """Back up, then turn toward the image half with higher mean competency.

    Ties turn left; with no map the direction alternates with ``invocation``.
    """
    cfg = cfg or PlannerConfig()
    n_back = int(round(cfg.backup_time / dt))
    n_turn = int(round(cfg.turn_time / dt))
    if comp_map is None:
        sign = 1.0 if invocation % 2 == 0 else -1.0
    else:
        m = np.asarray(comp_map, dtype=float)
        half = m.shape[1] // 2
        sign = 1.0 if m[:, :half].mean() >= m[:, m.shape[1] - half :].mean() else -1.0
    seq = np.zeros((n_back + n_turn, 2))
    seq[:n_back, 0] = -cfg.backup_speed
    seq[n_back:, 1] = sign * cfg.turn_rate
    return seq


# ---------------------------------------------------------------------------
# variants

_NEEDS = {
    "baseline": (False, False),
    "overall_turning": (True, False),
    "regional_turning": (False, True),
    "regional_trajectory": (False, True),
    "both_turning": (True, True),
    "both_trajectory": (True, True),
}


def plan(
    cfg: PlannerConfig,
    state,
    goal: GoalSpec,
    competency=None,
    cam: CameraModel | None = None,
    seed=0,
    comp_cfg: CompetencyConfig | None = None,
    dyn: DynamicsParams | None = None,
    invocation=0,
):
    """Select a reference trajectory or fall back to the safe maneuver."""
    cam = cam or CameraModel()
    comp_cfg = comp_cfg or CompetencyConfig()
    dyn = dyn or DynamicsParams()
    if cfg.variant not in _NEEDS:
        raise ConfigurationError(f"unknown planner variant {cfg.variant!r}")
    need_overall, need_regional = _NEEDS[cfg.variant]
    if (need_overall or need_regional) and competency is None:
        raise ConfigurationError(f"variant {cfg.variant} needs a competency record")
    if need_regional and competency.regional is None:
        raise ConfigurationError(f"variant {cfg.variant} needs a regional map")

    inputs = sample_action_sequences(cfg, seed)
    states = rollout_batch(state, inputs, dyn)
    cost = path_cost(states[:, -1], goal, cfg)
    in_fov = fov_filter(states, cam, state)
    cmap = competency.regional if competency is not None and competency.regional is not None else None
    if cmap is not None:
        min_c, vacuous = min_traj_competency(states, cmap, cam, state, cfg.footprint)
    else:
        min_c, vacuous = np.ones(len(states)), np.zeros(len(states), dtype=bool)

    low_overall = need_overall and competency.overall < comp_cfg.threshold_overall
    v = cfg.variant
    use_traj = v == "regional_trajectory" or (v == "both_trajectory" and low_overall)
    ok = in_fov.copy()
    if use_traj:
        ok &= min_c >= comp_cfg.threshold_regional
    rejected = tuple(
        "fov" if not f else ("competency" if not o else "") for f, o in zip(in_fov, ok)
    )
    diag = Diagnostics(cost, min_c, rejected, vacuous)

    def maneuver():
        seq = safe_maneuver(cmap, cfg, dyn.dt, invocation)
        return PlanResult("safe_maneuver", None, seq, diag, states)

    if v == "overall_turning" and low_overall:
        return maneuver()
    if v == "regional_turning" and near_field_low_competency(cmap, cam, comp_cfg.threshold_regional, cfg):
        return maneuver()
    if v == "both_turning" and low_overall and near_field_low_competency(cmap, cam, comp_cfg.threshold_regional, cfg):
        return maneuver()
    if not ok.any():
        return maneuver()
    idx = np.flatnonzero(ok)
    best = int(idx[np.argmin(cost[idx])])
    ref = Trajectory(states[best], inputs[best])
    return PlanResult("follow_path", ref, None, diag, states, best)


# ---------------------------------------------------------------------------
# visualization


def overlay(image, result: PlanResult, cam: CameraModel, state):
    """Image with candidate paths drawn red-to-green by minimum competency; selection in blue."""
    img = np.array(image, dtype=float, copy=True)
    h, w = img.shape[:2]
    if result.candidates is None:
        return img
    for i, traj in enumerate(result.candidates):
        uv, ok = project_ground_points(cam, state, traj[1:, :2])
        mc = float(np.clip(result.diagnostics.min_competency[i], 0, 1))
        color = np.array([0.0, 0.3, 1.0]) if i == result.selected else np.array([1.0 - mc, mc, 0.0])
        for u, v in uv[ok]:
            iu, iv = int(u), int(v)
            if 0 <= iu < w and 0 <= iv < h:
                img[iv, iu] = color
    return img
