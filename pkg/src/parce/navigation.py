"""Closed-loop episodes, scenario files and the benchmark table."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import io
from .config import VARIANTS, Settings, _apply, parse_value, read_ini
from .control import gains_for, track
from .dynamics import VehicleState, step
from .errors import ConfigurationError
from .planner import GoalSpec, overlay, plan
from .world import Obstacle, World, _mix_seed, box_obstacle, penetration_vector, render_camera, vehicle_polygon

SCENARIO_IDS = (1, 2, 3, 4, 5)


@dataclass(frozen=True, eq=False)
class Scenario:
    scenario_id: int
    name: str
    world: World
    start: tuple  # (x, y, theta)
    goal: GoalSpec
    start_jitter: tuple = (0.0, 0.0, 0.0)  # per-trial uniform half-widths on (x, y, theta)
    description: str = ""


def _obstacle_from(section):
    kind = section.get("kind", "unfamiliar").strip()
    tex = int(section.get("texture_seed", "0"))
    if "vertices" in section:
        verts = [tuple(float(v) for v in p.split()) for p in section["vertices"].split(";") if p.strip()]
        return Obstacle(np.array(verts), kind, tex)
    cx, cy = parse_value(section["center"])
    length, width = parse_value(section["size"])
    heading = math.radians(float(section.get("heading_deg", "0")))
    return box_obstacle(float(cx), float(cy), float(length), float(width), heading, kind, tex)


def load_scenario(path, scenario_id=None) -> Scenario:
    """Parse a scenario INI with ``[scenario]``, ``[world]``, ``[start]``, ``[goal]`` and ``[obstacle.N]`` sections."""
    cp = read_ini(path)
    for sec in ("world", "start", "goal"):
        if not cp.has_section(sec):
            raise ConfigurationError(f"{path}: missing [{sec}] section")
    meta = cp["scenario"] if cp.has_section("scenario") else {}
    w = cp["world"]
    obstacles = [_obstacle_from(cp[s]) for s in cp.sections() if s.startswith("obstacle.")]
    uc = w.get("uniform_class", "").strip()
    world = World(
        extent=tuple(float(v) for v in parse_value(w.get("extent", "-50, 50, -50, 50"))),
        seed=int(w.get("seed", "0")),
        obstacles=tuple(obstacles),
        terrain_scale=float(w.get("terrain_scale", "15")),
        classes=tuple(int(c) for c in parse_value(w["classes"] + ",")) if "classes" in w else (0, 1, 2, 3),
        uniform_class=int(uc) if uc else None,
        illumination=float(w.get("illumination", "1.0")),
    )
    st = cp["start"]
    start = (float(st["x"]), float(st["y"]), math.radians(float(st.get("heading_deg", "0"))))
    jitter = (
        float(st.get("jitter_x", "0")),
        float(st.get("jitter_y", "0")),
        math.radians(float(st.get("jitter_heading_deg", "0"))),
    )
    g = cp["goal"]
    goal = GoalSpec((float(g["x"]), float(g["y"])), float(g.get("tolerance", "1.0")), float(g.get("timeout", "90")))
    sid = int(meta.get("id", scenario_id or 0))
    return Scenario(sid, meta.get("name", Path(path).stem), world, start, goal, jitter, meta.get("description", ""))


def scenario_path(scenario_id):
    return resources.files("parce") / "scenarios" / f"scenario{int(scenario_id)}.ini"


def builtin_scenario(scenario_id) -> Scenario:
    if int(scenario_id) not in SCENARIO_IDS:
        raise ConfigurationError(f"unknown scenario {scenario_id!r}; expected one of {SCENARIO_IDS}")
    with resources.as_file(scenario_path(scenario_id)) as p:
        return load_scenario(p, int(scenario_id))


def apply_camera_section(settings: Settings, path):
    """Scenario files may carry their own ``[camera]`` overrides."""
    cp = read_ini(path)
    if cp.has_section("camera"):
        settings = replace(settings, camera=_apply(settings.camera, cp["camera"], "camera"))
    return settings


# ---------------------------------------------------------------------------
# episodes


@dataclass(frozen=True)
class EpisodeResult:
    outcome: str  # success | timeout
    collided: bool
    nav_time: float
    path_length: float
    variant: str
    scenario_id: int
    seed: int
    n_collision_steps: int = 0
    n_maneuvers: int = 0

    FIELDS = (
        "scenario_id",
        "variant",
        "seed",
        "outcome",
        "collided",
        "nav_time",
        "path_length",
        "n_collision_steps",
        "n_maneuvers",
    )

    def row(self):
        return (
            self.scenario_id,
            self.variant,
            self.seed,
            self.outcome,
            int(self.collided),
            f"{self.nav_time:.2f}",
            f"{self.path_length:.4f}",
            self.n_collision_steps,
            self.n_maneuvers,
        )


@dataclass
class EpisodeLog:
    states: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    overlays: list = field(default_factory=list)  # (step, image)
    plans: list = field(default_factory=list)  # one dict per planning cycle


def _resolve_collisions(world: World, state, footprint):
    """Push the vehicle out of any obstacle along the minimum translation vector."""
    hit = False
    x, y = state[0], state[1]
    reach = 0.5 * math.hypot(*footprint)
    for _ in range(4):
        moved = False
        for ob in world.obstacles:
            if not ob.near(x, y, reach):
                continue
            mtv = penetration_vector(vehicle_polygon((x, y, state[2]), footprint), ob.footprint)
            if mtv is None:
                continue
            hit = True
            n = np.linalg.norm(mtv)
            if n > 0:
                x += mtv[0] * (1.0 + 1e-6 / n)
                y += mtv[1] * (1.0 + 1e-6 / n)
                moved = True
        if not moved:
            break
    return VehicleState(x, y, *state[2:]), hit


def _needs(variant):
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}")
    return variant != "baseline", variant in ("regional_turning", "regional_trajectory", "both_turning", "both_trajectory")


def start_state(scenario: Scenario, seed):
    rng = np.random.default_rng(_mix_seed(seed, scenario.scenario_id, 0x57A7))
    jit = rng.uniform(-1.0, 1.0, 3) * np.asarray(scenario.start_jitter)
    return VehicleState(*(np.asarray(scenario.start) + jit), 0.0, 0.0)


def run_episode(
    scenario: Scenario,
    variant,
    estimator=None,
    seed=0,
    settings: Settings | None = None,
    log: EpisodeLog | None = None,
    overlay_every=0,
) -> EpisodeResult:
    """Simulate one trial: perceive and plan on schedule, track with LQR, step, resolve contacts."""
    s = settings or Settings()
    use_comp, use_regional = _needs(variant)
    if use_comp and estimator is None:
        raise ConfigurationError(f"variant {variant} needs a competency estimator")
    pcfg = replace(s.planner, variant=variant)
    dyn = s.dynamics
    cam = s.camera
    goal = scenario.goal
    world = scenario.world
    gx, gy = goal.x_goal
    u_lo = np.asarray(pcfg.u_min, dtype=float)
    u_hi = np.asarray(pcfg.u_max, dtype=float)

    state = start_state(scenario, seed)
    max_steps = int(round(goal.timeout / dyn.dt))
    replan_every = max(1, int(s.control.replan_every))
    length = 0.0
    collided = False
    n_hits = 0
    n_plans = 0
    n_man = 0
    active = None  # ("track", ref, gains, k) or ("maneuver", seq, k)
    steps = 0
    success = math.hypot(gx - state.x, gy - state.y) <= goal.tolerance
    if log is not None:
        log.states.append(tuple(state))

    while not success and steps < max_steps:
        due = (
            active is None
            or (active[0] == "track" and active[3] >= replan_every)
            or (active[0] == "maneuver" and active[2] >= len(active[1]))
        )
        if due:
            record = None
            img = None
            if use_comp or (overlay_every and log is not None):
                img = render_camera(world, state, cam)
            if use_comp:
                record = estimator.score(img, regional=use_regional)
            res = plan(pcfg, state, goal, record, cam, _mix_seed(seed, n_plans), s.competency, dyn, n_man)
            if log is not None and overlay_every and n_plans % overlay_every == 0:
                log.overlays.append((steps, overlay(img, res, cam, state)))
            if log is not None:
                d = res.diagnostics
                log.plans.append(
                    {
                        "step": steps,
                        "x": state.x,
                        "y": state.y,
                        "theta": state.theta,
                        "overall": math.nan if record is None else record.overall,
                        "kind": res.kind,
                        "n_fov": sum(r != "fov" for r in d.rejected),
                        "n_ok": sum(r == "" for r in d.rejected),
                    }
                )
            n_plans += 1
            if res.kind == "safe_maneuver":
                n_man += 1
                active = ["maneuver", res.maneuver, 0]
            else:
                active = ["track", res.reference, gains_for(res.reference, s.control.weights, dyn), 0]

        if active[0] == "maneuver":
            u = active[1][active[2]]
            active[2] += 1
        else:
            ref, gains, k = active[1], active[2], active[3]
            u = track(state, ref.states[k], ref.inputs[k], gains.K[k], u_lo, u_hi)
            active[3] += 1

        nxt = step(state, u, dyn)
        nxt, hit = _resolve_collisions(world, nxt, pcfg.footprint)
        if hit:
            collided = True
            n_hits += 1
        length += math.hypot(nxt.x - state.x, nxt.y - state.y)
        state = nxt
        steps += 1
        if log is not None:
            log.states.append(tuple(state))
            log.inputs.append(tuple(float(v) for v in u))
        success = math.hypot(gx - state.x, gy - state.y) <= goal.tolerance

    return EpisodeResult(
        "success" if success else "timeout",
        collided,
        round(steps * dyn.dt, 10),
        length,
        variant,
        scenario.scenario_id,
        int(seed),
        n_hits,
        n_man,
    )


# ---------------------------------------------------------------------------
# benchmark


@dataclass(frozen=True)
class CellStats:
    success_rate: float
    timeout_rate: float
    collision_rate: float
    mean_time: float
    mean_path_length: float  # NaN without successes
    n: int


def summarize_cell(results):
    n = len(results)
    succ = [r for r in results if r.outcome == "success"]
    return CellStats(
        100.0 * len(succ) / n,
        100.0 * (n - len(succ)) / n,
        100.0 * sum(r.collided for r in results) / n,
        float(np.mean([r.nav_time for r in results])),
        float(np.mean([r.path_length for r in succ])) if succ else math.nan,
        n,
    )


@dataclass
class BenchmarkTable:
    results: list

    def cell(self, variant, scenario_id=None):
        rs = [
            r for r in self.results if r.variant == variant and (scenario_id is None or r.scenario_id == scenario_id)
        ]
        if not rs:
            raise KeyError((variant, scenario_id))
        return summarize_cell(rs)

    @property
    def variants(self):
        return tuple(v for v in VARIANTS if any(r.variant == v for r in self.results))

    @property
    def scenarios(self):
        return tuple(sorted({r.scenario_id for r in self.results}))

    def rows(self, scenario_id=None):
        out = []
        for v in self.variants:
            try:
                c = self.cell(v, scenario_id)
            except KeyError:
                continue
            out.append(
                (
                    "all" if scenario_id is None else scenario_id,
                    v,
                    f"{c.success_rate:.1f}",
                    f"{c.timeout_rate:.1f}",
                    f"{c.collision_rate:.1f}",
                    f"{c.mean_time:.2f}",
                    "--" if math.isnan(c.mean_path_length) else f"{c.mean_path_length:.3f}",
                    c.n,
                )
            )
        return out

    HEADER = ("scenario", "variant", "success_pct", "timeout_pct", "collision_pct", "mean_time_s", "mean_path_m", "trials")

    def write(self, out_dir):
        """Per-episode CSV, one table per scenario, and the averaged table."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        io.write_csv(out / "episodes.csv", EpisodeResult.FIELDS, [r.row() for r in self.results])
        for sid in self.scenarios:
            io.write_csv(out / f"scenario{sid}.csv", self.HEADER, self.rows(sid))
        io.write_csv(out / "summary.csv", self.HEADER, self.rows())
        return out

    def format(self, scenario_id=None):
        lines = ["  ".join(f"{h:>13}" for h in self.HEADER)]
        lines += ["  ".join(f"{str(v):>13}" for v in row) for row in self.rows(scenario_id)]
        return "\n".join(lines)


def run_benchmark(
    scenarios=SCENARIO_IDS,
    variants=VARIANTS,
    trials=10,
    estimator=None,
    settings: Settings | None = None,
    seed=0,
    progress=None,
):
    """Every (scenario, variant) cell over ``trials`` seeded episodes."""
    s = settings or Settings()
    scenarios = SCENARIO_IDS if scenarios is None else scenarios
    variants = VARIANTS if variants is None else variants
    loaded = []
    for sc in scenarios:
        loaded.append(sc if isinstance(sc, Scenario) else builtin_scenario(sc))
    results = []
    for sc in loaded:
        for v in variants:
            for t in range(trials):
                t0 = time.perf_counter()
                r = run_episode(sc, v, estimator, _mix_seed(seed, t), s)
                results.append(r)
                if progress is not None:
                    progress(r, time.perf_counter() - t0)
    return BenchmarkTable(results)
