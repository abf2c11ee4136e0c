"""Deterministic flat 2D world: terrain texture field, obstacles, pinhole camera.

Everything lives on the ground plane z = 0. A camera at height ``h`` looks
along the vehicle heading, pitched down. Pixel ``(row i, col j)`` has its
center at continuous image coordinates ``(u, v) = (j + 0.5, i + 0.5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import _kernels
from .config import CLASS_NAMES, CameraModel
from .errors import DomainError

SKY_COLOR = np.array([0.5, 0.5, 0.5])

# label values returned by render_labels
SKY = -2
TERRAIN = -1


@dataclass(frozen=True)
class TerrainClass:
    id: int
    name: str


TERRAIN_CLASSES = tuple(TerrainClass(i, n) for i, n in enumerate(CLASS_NAMES))


@dataclass(frozen=True)
class TextureParams:
    base: tuple
    contrast: float
    freq: float
    octaves: int
    ridged: bool = False


# per-class texture parameters; all palettes are desaturated
TEXTURES = {
    0: TextureParams(base=(0.60, 0.57, 0.53), contrast=0.06, freq=0.7, octaves=2),
    1: TextureParams(base=(0.52, 0.50, 0.47), contrast=0.22, freq=2.5, octaves=3),
    2: TextureParams(base=(0.70, 0.68, 0.64), contrast=0.14, freq=1.2, octaves=3, ridged=True),
    3: TextureParams(base=(0.37, 0.36, 0.35), contrast=0.08, freq=0.9, octaves=2),
}
_TINT = np.array([1.0, 0.96, 0.9])

# saturated color pairs that never occur on terrain
UNFAMILIAR_PALETTES = (
    ((0.92, 0.10, 0.10), (0.95, 0.85, 0.10)),
    ((0.10, 0.20, 0.90), (0.95, 0.95, 0.95)),
    ((0.10, 0.80, 0.20), (0.85, 0.10, 0.80)),
    ((0.98, 0.50, 0.05), (0.05, 0.85, 0.90)),
    ((0.55, 0.10, 0.85), (0.70, 0.95, 0.10)),
)


def _mix_seed(*parts):
    h = 0x243F6A8885A308D3
    for p in parts:
        h = (h ^ (int(p) & 0xFFFFFFFFFFFFFFFF)) * 0x100000001B3 & 0xFFFFFFFFFFFFFFFF
        h ^= h >> 29
    return h & 0x3FFFFFFFFFFFFFFF


def check_class(class_id):
    if not isinstance(class_id, (int, np.integer)) or not 0 <= class_id < len(TERRAIN_CLASSES):
        raise DomainError(f"unknown terrain class id {class_id!r}")
    return int(class_id)


def terrain_texture(class_id, xs, ys, seed, illumination=1.0):
    """RGB terrain colors of class ``class_id`` at ground points."""
    p = TEXTURES[check_class(class_id)]
    n = _kernels.value_noise(xs, ys, _mix_seed(seed, class_id), p.freq, p.octaves)
    if p.ridged:
        n = 1.0 - np.abs(2.0 * n - 1.0)
    shade = p.contrast * (2.0 * n - 1.0)
    rgb = np.asarray(p.base) * illumination + shade[..., None] * _TINT
    return np.clip(rgb, 0.0, 1.0)


# ---------------------------------------------------------------------------
# obstacles


def _polygon_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass(frozen=True, eq=False)
class Obstacle:
    """Convex footprint painted with a familiar or unfamiliar texture."""

    footprint: np.ndarray
    texture_kind: str = "unfamiliar"
    texture_seed: int = 0

    def __post_init__(self):
        poly = np.asarray(self.footprint, dtype=float).reshape(-1, 2)
        if poly.shape[0] < 3:
            raise DomainError("obstacle footprint needs at least 3 vertices")
        area = _polygon_area(poly)
        if abs(area) <= 0:
            raise DomainError("obstacle footprint is degenerate")
        if area < 0:
            poly = poly[::-1].copy()
        e = np.roll(poly, -1, axis=0) - poly
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.any(cross < -1e-12):
            raise DomainError("obstacle footprint must be convex")
        if self.texture_kind not in ("familiar", "unfamiliar"):
            raise DomainError(f"texture_kind must be familiar|unfamiliar, got {self.texture_kind!r}")
        poly.setflags(write=False)
        object.__setattr__(self, "footprint", poly)
        center = poly.mean(axis=0)
        object.__setattr__(self, "_circle", (float(center[0]), float(center[1]), float(np.max(np.hypot(*(poly - center).T)))))

    def near(self, x, y, radius):
        """Cheap bounding-circle test; False means no contact is possible."""
        cx, cy, r = self._circle
        return math.hypot(x - cx, y - cy) <= r + radius

    @property
    def area(self):
        return _polygon_area(self.footprint)

    def contains(self, xs, ys):
        """Closed point-in-polygon test (boundary counts as inside)."""
        inside = np.ones(np.shape(xs), dtype=bool)
        poly = self.footprint
        for a, b in zip(poly, np.roll(poly, -1, axis=0)):
            inside &= (b[0] - a[0]) * (ys - a[1]) - (b[1] - a[1]) * (xs - a[0]) >= 0
        return inside

    def texture(self, xs, ys, world_seed=0):
        if self.texture_kind == "familiar":
            cls = self.texture_seed % len(TERRAIN_CLASSES)
            return terrain_texture(cls, xs, ys, _mix_seed(world_seed, self.texture_seed, 7))
        rng = np.random.default_rng(self.texture_seed)
        pal = np.asarray(UNFAMILIAR_PALETTES[rng.integers(len(UNFAMILIAR_PALETTES))])
        checker = rng.random() < 0.5
        period = rng.uniform(0.2, 0.45)
        ang = rng.uniform(0.0, math.pi)
        s = xs * math.cos(ang) + ys * math.sin(ang)
        t = -xs * math.sin(ang) + ys * math.cos(ang)
        idx = np.floor(s / period).astype(np.int64)
        if checker:
            idx = idx + np.floor(t / period).astype(np.int64)
        return pal[idx % 2]


def box_obstacle(cx, cy, length, width, heading=0.0, texture_kind="unfamiliar", texture_seed=0):
    """Rectangular obstacle centered at ``(cx, cy)``."""
    return Obstacle(rectangle(cx, cy, heading, length, width), texture_kind, texture_seed)


# ---------------------------------------------------------------------------
# world


@dataclass(frozen=True, eq=False)
class World:
    """Rectangular world with a seed-determined terrain class field.

    The class field is a jittered Voronoi partition with cells of roughly
    ``terrain_scale`` meters; ``uniform_class`` pins a single class.
    """

    extent: tuple = (-50.0, 50.0, -50.0, 50.0)
    seed: int = 0
    obstacles: tuple = ()
    terrain_scale: float = 15.0
    classes: tuple = (0, 1, 2, 3)
    uniform_class: int | None = None
    illumination: float = 1.0

    def __post_init__(self):
        x0, x1, y0, y1 = self.extent
        if not (x1 > x0 and y1 > y0):
            raise DomainError("world extent must be a non-empty rectangle")
        if self.uniform_class is not None:
            check_class(self.uniform_class)
        for c in self.classes:
            check_class(c)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def contains(self, x, y):
        x0, x1, y0, y1 = self.extent
        return x0 <= x <= x1 and y0 <= y <= y1

    def terrain_class_at(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if self.uniform_class is not None:
            return np.full(xs.shape, self.uniform_class, dtype=np.int64)
        sc = self.terrain_scale
        cx = np.floor(xs / sc)
        cy = np.floor(ys / sc)
        best = np.full(xs.shape, np.inf)
        label = np.zeros(xs.shape, dtype=np.int64)
        s1 = _mix_seed(self.seed, 1)
        s2 = _mix_seed(self.seed, 2)
        s3 = _mix_seed(self.seed, 3)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                gx = (cx + dx).astype(np.int64)
                gy = (cy + dy).astype(np.int64)
                px = (gx + _kernels._hash01_numpy(gx, gy, s1)) * sc
                py = (gy + _kernels._hash01_numpy(gx, gy, s2)) * sc
                d = (px - xs) ** 2 + (py - ys) ** 2
                pick = d < best
                best = np.where(pick, d, best)
                cls_idx = (_kernels._hash01_numpy(gx, gy, s3) * len(self.classes)).astype(np.int64)
                label = np.where(pick, np.asarray(self.classes)[cls_idx], label)
        return label

    def terrain_color(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        labels = self.terrain_class_at(xs, ys)
        out = np.empty(xs.shape + (3,))
        for c in np.unique(labels):
            m = labels == c
            out[m] = terrain_texture(int(c), xs[m], ys[m], self.seed, self.illumination)
        return out


# ---------------------------------------------------------------------------
# camera geometry


def _pose(state):
    s = np.asarray(state, dtype=float).ravel()
    return s[0], s[1], s[2]


def camera_frame(cam: CameraModel, state):
    """Camera center in world coordinates and the world-to-camera rotation.

    Rows of the rotation are the camera right, down and forward axes.
    """
    x, y, th = _pose(state)
    c, s = math.cos(th), math.sin(th)
    cp, sp = math.cos(cam.pitch), math.sin(cam.pitch)
    fwd = np.array([c * cp, s * cp, -sp])
    right = np.array([s, -c, 0.0])
    down = np.cross(fwd, right)
    origin = np.array([x + cam.mount_offset * c, y + cam.mount_offset * s, cam.height_above_ground])
    return origin, np.stack([right, down, fwd])


@lru_cache(maxsize=32)
def _pixel_rays(cam: CameraModel):
    """Camera-frame ray directions for every pixel center, shape (H, W, 3)."""
    u = np.arange(cam.image_width) + 0.5
    v = np.arange(cam.image_height) + 0.5
    uu, vv = np.meshgrid(u, v)
    d = np.stack(
        [
            (uu - 0.5 * cam.image_width) / cam.fx,
            (vv - 0.5 * cam.image_height) / cam.fy,
            np.ones_like(uu),
        ],
        axis=-1,
    )
    d.setflags(write=False)
    return d


def _cast(cam, state, dirs_cam):
    origin, rot = camera_frame(cam, state)
    dw = dirs_cam @ rot
    dz = dw[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(dz < 0, -origin[2] / dz, np.inf)
    gx = origin[0] + t * dw[..., 0]
    gy = origin[1] + t * dw[..., 1]
    dist = np.hypot(gx - origin[0], gy - origin[1])
    valid = (dz < 0) & (dist <= cam.max_view_distance)
    return np.stack([gx, gy], axis=-1), valid


def ground_points(cam: CameraModel, state):
    """Ground hit point of every pixel ray and the mask of rays that hit."""
    return _cast(cam, state, _pixel_rays(cam))


@lru_cache(maxsize=32)
def sky_mask(cam: CameraModel):
    """Pixels whose ray misses the ground within view distance (pose independent)."""
    _, valid = _cast(cam, (0.0, 0.0, 0.0), _pixel_rays(cam))
    m = ~valid
    m.setflags(write=False)
    return m


def pixel_to_ground(cam: CameraModel, state, u, v):
    """Ground point seen at continuous pixel coordinate ``(u, v)``, or None."""
    d = np.array([(u - 0.5 * cam.image_width) / cam.fx, (v - 0.5 * cam.image_height) / cam.fy, 1.0])
    pts, valid = _cast(cam, state, d[None, :])
    if not valid[0]:
        return None
    return float(pts[0, 0]), float(pts[0, 1])


def project_ground_points(cam: CameraModel, state, pts):
    """Vectorized pinhole projection of ground points.

    Returns ``(uv, in_view)`` with ``uv`` of shape (n, 2); entries of ``uv``
    are NaN where the point is behind the camera.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    origin, rot = camera_frame(cam, state)
    rel = np.column_stack([pts - origin[:2], np.full(len(pts), -origin[2])])
    pc = rel @ rot.T
    z = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(z > 0, 0.5 * cam.image_width + cam.fx * pc[:, 0] / z, np.nan)
        v = np.where(z > 0, 0.5 * cam.image_height + cam.fy * pc[:, 1] / z, np.nan)
    dist = np.hypot(rel[:, 0], rel[:, 1])
    in_view = (
        (z > 0)
        & (u >= 0)
        & (u < cam.image_width)
        & (v >= 0)
        & (v < cam.image_height)
        & (dist <= cam.max_view_distance)
    )
    return np.column_stack([u, v]), in_view


def project_ground_point(cam: CameraModel, state, p):
    """Pixel coordinates ``(u, v)`` of ground point ``p``, or None when out of view."""
    uv, ok = project_ground_points(cam, state, [p])
    if not ok[0]:
        return None
    return float(uv[0, 0]), float(uv[0, 1])


# ---------------------------------------------------------------------------
# rendering


def render_labels(world: World, state, cam: CameraModel):
    """Per-pixel label: obstacle index, ``TERRAIN`` or ``SKY``."""
    pts, valid = ground_points(cam, state)
    labels = np.full(valid.shape, SKY, dtype=np.int64)
    labels[valid] = TERRAIN
    gx, gy = pts[..., 0][valid], pts[..., 1][valid]
    sub = labels[valid]
    for i, ob in enumerate(world.obstacles):
        sub[ob.contains(gx, gy)] = i
    labels[valid] = sub
    return labels


def render_camera(world: World, state, cam: CameraModel):
    """Ray-cast the camera view to an (H, W, 3) float image in [0, 1]."""
    pts, valid = ground_points(cam, state)
    img = np.empty(valid.shape + (3,))
    img[:] = SKY_COLOR
    gx, gy = pts[..., 0][valid], pts[..., 1][valid]
    colors = world.terrain_color(gx, gy)
    for ob in world.obstacles:
        hit = ob.contains(gx, gy)
        if hit.any():
            colors[hit] = ob.texture(gx[hit], gy[hit], world.seed)
    img[valid] = colors
    return img


def generate_tile(class_id, seed, size=64, cam: CameraModel | None = None, majority=0.9, terrain_scale=16.0):
    """Camera view dominated by one terrain class; the training unit for perception.

    The view is taken over a multi-class terrain field from a seed-determined
    pose at which at least ``majority`` of the ground pixels show
    ``class_id``, so some tiles include a class boundary.
    """
    class_id = check_class(class_id)
    if size <= 0:
        raise DomainError("tile size must be positive")
    cam = cam or CameraModel()
    cam = replace(cam, image_width=int(size), image_height=int(size))
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, class_id, 0x711E])
    world = World(
        extent=(-1e4, 1e4, -1e4, 1e4),
        seed=_mix_seed(seed, class_id, 0x711E),
        terrain_scale=terrain_scale,
        illumination=float(rng.uniform(0.85, 1.15)),
    )
    for _ in range(500):
        state = (rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-math.pi, math.pi))
        pts, valid = ground_points(cam, state)
        cls = world.terrain_class_at(pts[..., 0][valid], pts[..., 1][valid])
        if np.mean(cls == class_id) >= majority:
            break
    else:  # pragma: no cover - practically unreachable with four classes
        world = replace(world, uniform_class=class_id)
    return render_camera(world, state, cam)


# ---------------------------------------------------------------------------
# collisions


def rectangle(cx, cy, heading, length, width):
    """Corners (CCW) of a rectangle centered at (cx, cy), long axis along heading."""
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = 0.5 * length, 0.5 * width
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([cx, cy])


def vehicle_polygon(state, footprint):
    length, width = footprint
    if length <= 0 or width <= 0:
        raise DomainError("footprint dimensions must be positive")
    x, y, th = _pose(state)
    return rectangle(x, y, th, length, width)


def _axes(poly):
    e = np.roll(poly, -1, axis=0) - poly
    n = np.column_stack([-e[:, 1], e[:, 0]])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def penetration_vector(a, b):
    """Minimum translation moving convex polygon ``a`` out of ``b``.

    Returns None when the polygons are separated. Touching polygons count as
    intersecting and yield a zero-length vector.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    best, best_axis = np.inf, None
    for axis in np.vstack([_axes(a), _axes(b)]):
        pa = a @ axis
        pb = b @ axis
        overlap = min(pa.max(), pb.max()) - max(pa.min(), pb.min())
        if overlap < 0:
            return None
        if overlap < best:
            sign = 1.0 if pa.mean() >= pb.mean() else -1.0
            best, best_axis = overlap, sign * axis
    return best * best_axis


def polygons_intersect(a, b):
    """Separating-axis test for two convex polygons (closed sets)."""
    return penetration_vector(a, b) is not None


def collision_query(world: World, state, footprint):
    poly = vehicle_polygon(state, footprint)
    x, y, _ = _pose(state)
    reach = 0.5 * math.hypot(*footprint)
    return any(ob.near(x, y, reach) and polygons_intersect(poly, ob.footprint) for ob in world.obstacles)
