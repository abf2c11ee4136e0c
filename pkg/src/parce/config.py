"""Parameter sets and INI loading.

Defaults for the competency, dynamics, sampling, cost, tracking and safety
groups follow the published parameter table; everything else is a choice
for the synthetic desk-scale world.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

CLASS_NAMES = ("smooth", "bumpy", "crater-edge", "crater-interior")


@dataclass(frozen=True)
class CameraModel:
    height_above_ground: float = 1.5
    pitch: float = math.radians(32.0)
    horizontal_fov: float = math.radians(90.0)
    vertical_fov: float = math.radians(60.0)
    image_width: int = 64
    image_height: int = 64
    max_view_distance: float = 12.0
    # camera position along the vehicle heading, relative to the vehicle center
    mount_offset: float = -1.0

    def __post_init__(self):
        for name in ("horizontal_fov", "vertical_fov"):
            v = getattr(self, name)
            if not 0.0 < v < math.pi:
                raise ConfigurationError(f"{name} must lie in (0, pi), got {v}")
        if self.image_width < 1 or self.image_height < 1:
            raise ConfigurationError("image dimensions must be positive")
        if self.height_above_ground <= 0 or self.max_view_distance <= 0:
            raise ConfigurationError("camera height and view distance must be positive")

    @property
    def fx(self):
        return 0.5 * self.image_width / math.tan(0.5 * self.horizontal_fov)

    @property
    def fy(self):
        return 0.5 * self.image_height / math.tan(0.5 * self.vertical_fov)


@dataclass(frozen=True)
class DynamicsParams:
    dt: float = 0.1
    alpha: float = 0.26
    beta: float = 0.35
    # actuator limits applied by step(); wider than the sampling box so the
    # safe maneuver can reverse
    u_lo: tuple = (-0.8, -0.4)
    u_hi: tuple = (0.8, 0.4)

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ConfigurationError("alpha and beta must lie in (0, 1)")


@dataclass(frozen=True)
class CompetencyConfig:
    confidence_overall: float = 95.0
    confidence_regional: float = 95.0
    threshold_overall: float = 0.8
    threshold_regional: float = 0.8
    sigma_min: float = 1e-6
    context_trim: float = 3.0  # 0 disables trimmed inpainting context

    def __post_init__(self):
        if self.context_trim < 0:
            raise ConfigurationError("context_trim must be >= 0")
        for name in ("confidence_overall", "confidence_regional"):
            v = getattr(self, name)
            if not 0 < v < 100:
                raise ConfigurationError(f"{name} must lie in (0, 100)")
        for name in ("threshold_overall", "threshold_regional"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigurationError(f"{name} must lie in (0, 1)")

    @property
    def z_overall(self):
        from .competency import z_from_confidence

        return z_from_confidence(self.confidence_overall)

    @property
    def z_regional(self):
        from .competency import z_from_confidence

        return z_from_confidence(self.confidence_regional)


@dataclass(frozen=True)
class FhParams:
    k: float = 100.0
    min_size: int = 20
    smoothing_sigma: float = 0.8

    def __post_init__(self):
        if self.k <= 0 or self.min_size < 1 or self.smoothing_sigma < 0:
            raise ConfigurationError("invalid segmentation parameters")


VARIANTS = (
    "baseline",
    "overall_turning",
    "regional_turning",
    "regional_trajectory",
    "both_turning",
    "both_trajectory",
)


@dataclass(frozen=True)
class PlannerConfig:
    n_samples: int = 128
    horizon: int = 60
    u_min: tuple = (0.0, -0.4)
    u_max: tuple = (0.8, 0.4)
    alpha_ori: float = 3.0
    alpha_goal_x: float = 1.0
    alpha_goal_y: float = 1.5
    footprint: tuple = (0.9, 0.6)
    variant: str = "baseline"
    backup_time: float = 1.0
    turn_time: float = 1.0
    backup_speed: float = 0.3
    turn_rate: float = 0.4
    near_field_depth: float = 2.0
    near_field_width_factor: float = 1.5
    goal_tolerance: float = 1.0

    def __post_init__(self):
        if self.n_samples < 1 or self.horizon < 1:
            raise ConfigurationError("n_samples and horizon must be >= 1")
        if any(lo > hi for lo, hi in zip(self.u_min, self.u_max)):
            raise ConfigurationError("u_min must not exceed u_max")
        if min(self.alpha_ori, self.alpha_goal_x, self.alpha_goal_y) < 0:
            raise ConfigurationError("cost weights must be nonnegative")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown planner variant {self.variant!r}")
        if min(self.footprint) <= 0:
            raise ConfigurationError("footprint dimensions must be positive")


@dataclass(frozen=True)
class LqrWeights:
    Q: tuple = (1.0, 1.0, 2.0, 0.5, 0.0)
    R: tuple = (0.1, 0.1)

    def __post_init__(self):
        if min(self.Q) < 0 or min(self.R) <= 0:
            raise ConfigurationError("Q must be >= 0 and R > 0 on the diagonal")

    @property
    def Qm(self):
        return np.diag(np.asarray(self.Q, dtype=float))

    @property
    def Rm(self):
        return np.diag(np.asarray(self.R, dtype=float))


@dataclass(frozen=True)
class ControlConfig:
    weights: LqrWeights = field(default_factory=LqrWeights)
    replan_every: int = 10


@dataclass(frozen=True)
class DataConfig:
    tiles_per_class: int = 200
    test_fraction: float = 0.25
    holdout_fraction: float = 0.2
    n_ood: int = 100
    epochs: int = 1000
    learning_rate: float = 4.0
    l2: float = 1e-4
    rank: int = 32


@dataclass
class Settings:
    camera: CameraModel = field(default_factory=CameraModel)
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    competency: CompetencyConfig = field(default_factory=CompetencyConfig)
    segmentation: FhParams = field(default_factory=FhParams)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    data: DataConfig = field(default_factory=DataConfig)
    seed: int = 0


def parse_value(text):
    """Parse a config scalar: int, float, comma/space separated tuple, or string."""
    text = text.strip()
    if "," in text:
        return tuple(parse_value(t) for t in text.split(",") if t.strip())
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


_ANGLE_KEYS = {"pitch", "horizontal_fov", "vertical_fov"}


def _apply(obj, section, name):
    kwargs = {}
    valid = {f.name for f in fields(obj)}
    for key, raw in section.items():
        val = parse_value(raw)
        if key.endswith("_deg") and key[:-4] in _ANGLE_KEYS:
            key, val = key[:-4], math.radians(float(val))
        if key not in valid:
            raise ConfigurationError(f"unknown key {key!r} in [{name}]")
        kwargs[key] = val
    return replace(obj, **kwargs)


def read_ini(path):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    cp.read(path)
    return cp


def load_settings(path=None, seed=None):
    """Build :class:`Settings` from an optional INI file."""
    s = Settings()
    if path is not None:
        cp = read_ini(path)
        for name in ("camera", "dynamics", "competency", "segmentation", "planner", "data"):
            if cp.has_section(name):
                setattr(s, name, _apply(getattr(s, name), cp[name], name))
        if cp.has_section("control"):
            sec = dict(cp["control"])
            q = sec.pop("q", None)
            r = sec.pop("r", None)
            w = s.control.weights
            if q is not None or r is not None:
                w = LqrWeights(
                    Q=tuple(float(v) for v in parse_value(q)) if q else w.Q,
                    R=tuple(float(v) for v in parse_value(r)) if r else w.R,
                )
            ctl = ControlConfig(weights=w)
            s.control = _apply(ctl, sec, "control") if sec else ctl
        if cp.has_section("run") and "seed" in cp["run"]:
            s.seed = int(cp["run"]["seed"])
    if seed is not None:
        s.seed = int(seed)
    return s
