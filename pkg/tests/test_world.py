import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from parce.config import CameraModel
from parce.errors import DomainError
from parce.world import (
    SKY,
    SKY_COLOR,
    TERRAIN,
    Obstacle,
    World,
    box_obstacle,
    collision_query,
    generate_tile,
    penetration_vector,
    pixel_to_ground,
    polygons_intersect,
    project_ground_point,
    project_ground_points,
    rectangle,
    render_camera,
    render_labels,
    sky_mask,
    terrain_texture,
)

CAM = CameraModel()


def pinhole_oracle(cam, state, p):
    """Hand-derived flat-ground pinhole projection in the vehicle frame."""
    x, y, th = state
    cx = x + cam.mount_offset * math.cos(th)
    cy = y + cam.mount_offset * math.sin(th)
    dx, dy = p[0] - cx, p[1] - cy
    fwd = math.cos(th) * dx + math.sin(th) * dy
    left = -math.sin(th) * dx + math.cos(th) * dy
    h, ph = cam.height_above_ground, cam.pitch
    zc = fwd * math.cos(ph) + h * math.sin(ph)
    xc = -left
    yc = -fwd * math.sin(ph) + h * math.cos(ph)
    return 0.5 * cam.image_width + cam.fx * xc / zc, 0.5 * cam.image_height + cam.fy * yc / zc


# ---------------------------------------------------------------------------
# tiles


def test_tile_is_deterministic():
    a = generate_tile(0, 7, 64)
    b = generate_tile(0, 7, 64)
    assert a.shape == (64, 64, 3)
    assert np.array_equal(a, b)


def test_tile_seed_changes_image():
    a = generate_tile(0, 7, 64)
    b = generate_tile(0, 8, 64)
    assert not np.array_equal(a, b)
    assert abs(a.mean() - b.mean()) < 0.1


def test_tile_values_in_unit_range():
    for c in range(4):
        t = generate_tile(c, 3, 32)
        assert np.all(np.isfinite(t)) and t.min() >= 0 and t.max() <= 1


def test_tile_rejects_unknown_class_and_bad_size():
    with pytest.raises(DomainError):
        generate_tile(9, 0)
    with pytest.raises(DomainError):
        generate_tile(-1, 0)
    with pytest.raises(DomainError):
        generate_tile(0, 0, size=0)


def _grad(img):
    g = img.mean(axis=2)
    gy, gx = np.gradient(g)
    return float(np.mean(np.hypot(gx, gy)[~sky_mask(CAM)]))


def test_bumpy_tiles_have_more_texture_than_smooth():
    smooth = [_grad(generate_tile(0, s)) for s in range(30)]
    bumpy = [_grad(generate_tile(1, s)) for s in range(30)]
    assert np.mean(smooth) < np.mean(bumpy)
    assert np.median(smooth) < np.median(bumpy)


def test_terrain_texture_is_pure():
    xs = np.linspace(-3, 3, 50)
    ys = np.linspace(2, 9, 50)
    assert np.array_equal(terrain_texture(2, xs, ys, 11), terrain_texture(2, xs, ys, 11))


# ---------------------------------------------------------------------------
# camera geometry


def test_projection_matches_hand_derived_pinhole():
    rng = np.random.default_rng(1)
    for _ in range(100):
        state = (rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-math.pi, math.pi))
        fwd, lat = rng.uniform(1.0, 6.0), rng.uniform(-1.0, 1.0)
        th = state[2]
        p = (state[0] + fwd * math.cos(th) - lat * math.sin(th), state[1] + fwd * math.sin(th) + lat * math.cos(th))
        uv, _ = project_ground_points(CAM, state, [p])
        exp = pinhole_oracle(CAM, state, p)
        assert uv[0, 0] == pytest.approx(exp[0], abs=1e-9)
        assert uv[0, 1] == pytest.approx(exp[1], abs=1e-9)


def test_round_trip_pixel_to_ground():
    rng = np.random.default_rng(2)
    hits = 0
    while hits < 100:
        state = (rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-math.pi, math.pi))
        u, v = rng.uniform(0, CAM.image_width), rng.uniform(0, CAM.image_height)
        g = pixel_to_ground(CAM, state, u, v)
        if g is None:
            continue
        uv = project_ground_point(CAM, state, g)
        assert uv is not None
        back = pixel_to_ground(CAM, state, *uv)
        assert math.hypot(back[0] - g[0], back[1] - g[1]) < 1e-6
        assert uv == pytest.approx((u, v), abs=1e-6)
        hits += 1


def test_optical_axis_hits_image_center():
    d = CAM.height_above_ground / math.tan(CAM.pitch)
    p = (CAM.mount_offset + d, 0.0)
    u, v = project_ground_point(CAM, (0.0, 0.0, 0.0), p)
    assert abs(u - CAM.image_width / 2) <= 0.5
    assert abs(v - CAM.image_height / 2) <= 0.5


def test_points_beside_or_behind_are_out_of_view():
    assert project_ground_point(CAM, (0.0, 0.0, 0.0), (CAM.mount_offset, 3.0)) is None
    assert project_ground_point(CAM, (0.0, 0.0, 0.0), (-5.0, 0.0)) is None
    uv, ok = project_ground_points(CAM, (0, 0, 0), [(-5.0, 0.0)])
    assert not ok[0] and np.isnan(uv[0, 0])


def test_far_points_beyond_view_distance_are_out():
    assert project_ground_point(CAM, (0.0, 0.0, 0.0), (CAM.max_view_distance + 5.0, 0.0)) is None


def test_sky_mask_is_pose_independent():
    w = World(uniform_class=1)
    for state in [(0, 0, 0), (3, -2, 1.2), (-7, 4, -2.5)]:
        labels = render_labels(w, state, CAM)
        assert np.array_equal(labels == SKY, sky_mask(CAM))


# ---------------------------------------------------------------------------
# rendering


def test_uniform_world_render_matches_texture():
    w = World(uniform_class=0, seed=5)
    state = (1.0, 2.0, 0.3)
    img = render_camera(w, state, CAM)
    sky = sky_mask(CAM)
    assert np.all(img[sky] == SKY_COLOR)
    rows, cols = np.nonzero(~sky)
    for r, c in list(zip(rows, cols))[::97]:
        g = pixel_to_ground(CAM, state, c + 0.5, r + 0.5)
        exp = terrain_texture(0, np.array([g[0]]), np.array([g[1]]), 5)[0]
        assert np.allclose(img[r, c], exp, atol=1e-9)


def test_render_is_deterministic():
    w = World(seed=3, obstacles=(box_obstacle(4, 0, 1, 1),))
    assert np.array_equal(render_camera(w, (0, 0, 0), CAM), render_camera(w, (0, 0, 0), CAM))


def test_obstacle_ahead_is_contiguous_and_centered():
    ob = box_obstacle(3.0, 0.0, 1.0, 1.0, 0.0, "unfamiliar", 4)
    w = World(uniform_class=0, obstacles=(ob,))
    labels = render_labels(w, (0, 0, 0), CAM)
    mask = labels == 0
    assert mask.sum() > 20
    _, n = ndimage.label(mask)
    assert n == 1
    # analytic bounds from the projected footprint corners
    corners = np.array([pinhole_oracle(CAM, (0, 0, 0), p) for p in ob.footprint])
    cols = np.nonzero(mask.any(axis=0))[0]
    rows = np.nonzero(mask.any(axis=1))[0]
    assert cols.min() + 0.5 >= corners[:, 0].min() - 1e-9
    assert cols.max() + 0.5 <= corners[:, 0].max() + 1e-9
    assert rows.min() + 0.5 >= corners[:, 1].min() - 1e-9
    assert rows.max() + 0.5 <= corners[:, 1].max() + 1e-9
    centroid = np.mean(np.nonzero(mask)[1]) + 0.5
    assert abs(centroid - CAM.image_width / 2) <= 1.0


def test_projection_agrees_with_ray_caster():
    ob = box_obstacle(4.0, 0.5, 1.5, 1.5, 0.4, "unfamiliar", 2)
    w = World(uniform_class=1, obstacles=(ob,))
    state = (0.2, -0.1, 0.1)
    labels = render_labels(w, state, CAM)
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(200):
        p = ob.footprint.mean(axis=0) + rng.uniform(-0.5, 0.5, 2)
        uv = project_ground_point(CAM, state, p)
        if uv is None:
            continue
        r, c = int(uv[1]), int(uv[0])
        win = labels[max(r - 1, 0) : r + 2, max(c - 1, 0) : c + 2]
        assert (win == 0).any()
        checked += 1
    assert checked > 100
    assert (labels == TERRAIN).any()


# ---------------------------------------------------------------------------
# obstacles and collisions


def test_obstacle_validation():
    with pytest.raises(DomainError):
        Obstacle(np.array([[0, 0], [1, 0], [2, 0]]))
    with pytest.raises(DomainError):
        Obstacle(np.array([[0, 0], [2, 0], [1, 0.2], [1, 2]]))  # reflex vertex
    with pytest.raises(DomainError):
        Obstacle(np.array([[0, 0], [1, 0], [0, 1]]), "shiny")
    cw = Obstacle(np.array([[0, 0], [0, 1], [1, 0]]))
    assert cw.area > 0


def test_collision_examples():
    w = World(obstacles=(box_obstacle(0, 0, 1, 1),))
    assert not collision_query(w, (10.0, 0.0, 0.0), (0.9, 0.6))
    assert collision_query(w, (0.1, 0.1, 0.7), (0.9, 0.6))


def test_edge_touching_counts_as_collision():
    veh = rectangle(0, 0, 0, 2, 1)  # x in [-1, 1]
    touching = np.array([[1, -0.2], [2, -0.2], [2, 0.2], [1, 0.2]], dtype=float)
    apart = touching + [1e-9, 0]
    corner = np.array([[1, 0.5], [2, 0.5], [2, 1.5], [1, 1.5]], dtype=float)
    assert polygons_intersect(veh, touching)
    assert polygons_intersect(veh, corner)
    assert not polygons_intersect(veh, apart)
    assert np.allclose(penetration_vector(veh, touching), 0.0)


def test_penetration_vector_separates():
    a = rectangle(0, 0, 0.3, 2, 1)
    b = rectangle(0.8, 0.3, -0.2, 1, 1)
    mtv = penetration_vector(a, b)
    assert mtv is not None and np.linalg.norm(mtv) > 0
    # still touching just short of the push, separated just past it
    assert polygons_intersect(a + mtv * (1 - 1e-6), b)
    assert not polygons_intersect(a + mtv * (1 + 1e-6), b)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(-3, 3), st.floats(-3, 3), st.floats(-math.pi, math.pi),
    st.floats(-20, 20), st.floats(-20, 20), st.floats(-math.pi, math.pi),
)
def test_collision_is_invariant_under_rigid_motion(vx, vy, vth, tx, ty, rot):
    ob = box_obstacle(0.4, -0.3, 1.2, 0.8, 0.5)
    fp = (0.9, 0.6)
    before = collision_query(World(obstacles=(ob,)), (vx, vy, vth), fp)
    c, s = math.cos(rot), math.sin(rot)
    R = np.array([[c, -s], [s, c]])
    moved_ob = Obstacle(ob.footprint @ R.T + [tx, ty])
    p = R @ [vx, vy] + [tx, ty]
    after = collision_query(World(obstacles=(moved_ob,)), (p[0], p[1], vth + rot), fp)
    # skip numerically borderline contacts
    grown = polygons_intersect(rectangle(vx, vy, vth, fp[0] + 1e-7, fp[1] + 1e-7), ob.footprint)
    shrunk = polygons_intersect(rectangle(vx, vy, vth, fp[0] - 1e-7, fp[1] - 1e-7), ob.footprint)
    if grown != shrunk:
        return
    assert before == after


def test_world_validation():
    with pytest.raises(DomainError):
        World(extent=(1, 0, 0, 1))
    with pytest.raises(DomainError):
        World(uniform_class=7)
