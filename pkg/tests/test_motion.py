"""Lattice planner tests.

The heavy checks compare the planners against plain reference searches that
share nothing but the exact collision predicates: a Dijkstra over the full
lattice whose every edge is validated by dense sampling, with none of the
clearance shortcuts, component pruning, or endpoint snapping the real
planners use.  Anything those shortcuts get wrong shows up as a reachability
or cost disagreement, or as a collision during replay.
"""

import heapq
import math

import numpy as np
import pytest

from regrasp.geometry import (
    CONTACT_TOL,
    Box,
    ConvexPolygon,
    Disc,
    Pose2,
    Rect,
)
from regrasp.grasp import GraspAnchor, GraspSet
from regrasp.motion import (
    SQRT2,
    _XY_STEPS,
    TransferPlanner,
    TransitPlanner,
    _bounds_margin,
    coverage_discs,
    label_components,
    transfer_goal_pose,
    transfer_goal_region,
    wrap_angle,
)
from regrasp.scene import GoalRegion, Scene, goal_satisfied
from regrasp.world import make_world

STICK = Box(0.18, 0.035)
AGENT_R = 0.075


def make_scene(obstacles, name="m", bounds=None, start=None, agent=(0.4, 0.4), goal=None):
    bounds = bounds or Rect(0, 0, 3, 3)
    return Scene(
        name=name,
        bounds=bounds,
        obstacles=tuple(obstacles),
        object_shape=STICK,
        object_start=start or Pose2(0.9, 0.9, 0.0),
        agent_radius=AGENT_R,
        agent_start=agent,
        goal=goal or GoalRegion(rect=Rect(bounds.xmax - 0.8, bounds.ymax - 0.8,
                                          bounds.xmax - 0.2, bounds.ymax - 0.2)),
    )


def stick_grasps(anchors):
    return GraspSet(
        agent_radius=AGENT_R,
        object_shape=STICK,
        anchors=tuple(GraspAnchor(id=i, rel_pose=p) for i, p in enumerate(anchors)),
    )


REAR = Pose2(-0.255, 0.0, 0.0)
FRONT = Pose2(0.255, 0.0, math.pi)
SIDE = Pose2(0.0, 0.11, -math.pi / 2)


# ---------------------------------------------------------------------------
# replay helpers: resample returned paths with the exact predicates


def replay_transit(world, path, object_pose):
    step = world.esdf.cell / 4.0
    for a, b in zip(path, path[1:]):
        n = max(2, int(math.ceil(math.hypot(b[0] - a[0], b[1] - a[1]) / step)) + 1)
        ts = np.linspace(0, 1, n)
        pts = np.outer(1 - ts, a) + np.outer(ts, b)
        assert np.all(world.agent_free_many(pts))
        assert np.all(world.agent_object_gap(pts, object_pose) >= -CONTACT_TOL)


def compound_ok(world, grasps, gid, pose):
    if not world.object_free(pose):
        return False
    a = pose.compose(grasps.anchors[gid].rel_pose)
    return world.agent_free(a.x, a.y)


def replay_transfer(world, grasps, gid, poses, rot_r):
    step = world.esdf.cell / 4.0
    for a, b in zip(poses, poses[1:]):
        dth = wrap_angle(b.theta - a.theta)
        arc = math.hypot(b.x - a.x, b.y - a.y) + abs(dth) * rot_r
        n = max(2, int(math.ceil(arc / step)) + 1)
        for t in np.linspace(0, 1, n):
            p = Pose2(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.theta + t * dth)
            assert compound_ok(world, grasps, gid, p)


def polyline_len(path):
    return sum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(path, path[1:]))


def transfer_cost(poses, rot_r):
    return sum(
        math.hypot(b.x - a.x, b.y - a.y) + abs(wrap_angle(b.theta - a.theta)) * rot_r
        for a, b in zip(poses, poses[1:])
    )


# ---------------------------------------------------------------------------
# coverage discs and bounds margins


def test_coverage_discs_cover_the_box():
    centers, rho = coverage_discs(STICK, spacing=0.05)
    rng = np.random.default_rng(0)
    pts = np.column_stack(
        [rng.uniform(-STICK.half_w, STICK.half_w, 4000),
         rng.uniform(-STICK.half_h, STICK.half_h, 4000)]
    )
    pts = np.vstack([pts, STICK.corners()])
    d = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2) - rho[None, :]
    assert np.all(d.min(axis=1) <= 1e-9)


def test_coverage_fallback_disc_covers_polygon():
    tri = ConvexPolygon(((0.2, 0.0), (-0.1, 0.15), (-0.1, -0.15)))
    centers, rho = coverage_discs(tri)
    assert centers.shape == (1, 2)
    v = np.asarray(tri.vertices)
    assert np.all(np.linalg.norm(v - centers[0], axis=1) <= rho[0] + 1e-12)


@pytest.mark.parametrize("shape", [STICK, Disc(0.11), ConvexPolygon(((0.15, 0.0), (0.0, 0.1), (-0.12, -0.05)))])
def test_bounds_margin_matches_boundary_sampling(shape):
    bounds = Rect(0, 0, 2, 2)
    rng = np.random.default_rng(3)
    # dense points on the shape boundary, in the shape frame
    if isinstance(shape, Disc):
        ang = np.linspace(0, 2 * math.pi, 720, endpoint=False)
        boundary = shape.radius * np.column_stack([np.cos(ang), np.sin(ang)])
        step = 2 * math.pi * shape.radius / 720
    else:
        v = STICK.corners() if isinstance(shape, Box) else np.asarray(shape.vertices)
        segs = []
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            ts = np.linspace(0, 1, 300, endpoint=False)[:, None]
            segs.append(a[None, :] * (1 - ts) + b[None, :] * ts)
        boundary = np.vstack(segs)
        per = sum(np.linalg.norm(b - a) for a, b in zip(v, np.roll(v, -1, axis=0)))
        step = per / len(boundary)
    for _ in range(20):
        x, y = rng.uniform(0.3, 1.7, 2)
        th = rng.uniform(-math.pi, math.pi)
        c, s = math.cos(th), math.sin(th)
        got = float(_bounds_margin(shape, np.array([[x, y]]), c, s, bounds)[0])
        rot = np.array([[c, -s], [s, c]])
        pts = boundary @ rot.T + np.array([x, y])
        ref = np.minimum(
            np.minimum(pts[:, 0] - bounds.xmin, bounds.xmax - pts[:, 0]),
            np.minimum(pts[:, 1] - bounds.ymin, bounds.ymax - pts[:, 1]),
        ).min()
        assert got <= ref + 1e-9
        assert got >= ref - step - 1e-9


# ---------------------------------------------------------------------------
# component labels vs union-find


class _UF:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, i):
        while self.p[i] != i:
            self.p[i] = self.p[self.p[i]]
            i = self.p[i]
        return i

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.p[ra] = rb


def oracle_labels(arr):
    nt, ny, nx = arr.shape
    uf = _UF(arr.size)

    def lin(it, iy, ix):
        return (it * ny + iy) * nx + ix

    for it in range(nt):
        for iy in range(ny):
            for ix in range(nx):
                if not arr[it, iy, ix]:
                    continue
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        jy, jx = iy + dy, ix + dx
                        if (dy or dx) and 0 <= jy < ny and 0 <= jx < nx and arr[it, jy, jx]:
                            uf.union(lin(it, iy, ix), lin(it, jy, jx))
                if nt > 1:
                    for jt in {(it + 1) % nt, (it - 1) % nt}:
                        if arr[jt, iy, ix]:
                            uf.union(lin(it, iy, ix), lin(jt, iy, ix))
    roots = {}
    out = np.full(arr.shape, -1, dtype=int)
    for it in range(ny * 0 + nt):
        for iy in range(ny):
            for ix in range(nx):
                if arr[it, iy, ix]:
                    r = uf.find(lin(it, iy, ix))
                    out[it, iy, ix] = roots.setdefault(r, len(roots))
    return out


def partitions_equal(a, b, mask):
    pa = {}
    pb = {}
    for idx in map(tuple, np.argwhere(mask)):
        pa.setdefault(a[idx], set()).add(idx)
        pb.setdefault(b[idx], set()).add(idx)
    return sorted(map(sorted, pa.values())) == sorted(map(sorted, pb.values()))


def test_label_components_match_union_find_2d():
    rng = np.random.default_rng(11)
    for _ in range(120):
        mask = rng.random((6, 7)) < rng.uniform(0.3, 0.8)
        got = label_components(mask)
        ref = oracle_labels(mask[None, :, :])[0]
        assert partitions_equal(got, ref, mask)
        assert np.all((got >= 0) == mask)


@pytest.mark.parametrize("nt", [2, 3, 4])
def test_label_components_match_union_find_3d_wrap(nt):
    rng = np.random.default_rng(13 + nt)
    for _ in range(40):
        mask = rng.random((nt, 5, 5)) < rng.uniform(0.3, 0.8)
        got = label_components(mask)
        ref = oracle_labels(mask)
        assert partitions_equal(got, ref, mask)


def test_label_wrap_connects_first_and_last_bin():
    mask = np.zeros((4, 3, 3), dtype=bool)
    mask[0, 1, 1] = True
    mask[3, 1, 1] = True
    got = label_components(mask)
    assert got[0, 1, 1] == got[3, 1, 1]


# ---------------------------------------------------------------------------
# transit planner


def test_transit_direct_shot_is_straight():
    scene = make_scene([], bounds=Rect(0, 0, 4, 4), start=Pose2(1.0, 1.0, 0.0))
    world = make_world(scene)
    tp = TransitPlanner(world)
    path = tp.path((0.5, 3.5), (3.5, 3.5), scene.object_start)
    assert path is not None and len(path) == 2
    assert polyline_len(path) == pytest.approx(3.0)


def test_transit_detours_around_parked_object():
    scene = make_scene([], bounds=Rect(0, 0, 4, 4), start=Pose2(2.0, 2.0, 0.0))
    world = make_world(scene)
    tp = TransitPlanner(world)
    start, goal = (1.0, 2.0), (3.0, 2.0)
    path = tp.path(start, goal, scene.object_start)
    assert path is not None
    assert polyline_len(path) > 2.0 + 0.05
    replay_transit(world, path, scene.object_start)


def door_scene(opening):
    lo, hi = 1.0, 1.0 + opening
    walls = [
        (Box(0.04, lo / 2), Pose2(1.5, lo / 2, 0.0)),
        (Box(0.04, (3.0 - hi) / 2), Pose2(1.5, (3.0 + hi) / 2, 0.0)),
    ]
    return make_scene(walls, start=Pose2(0.4, 2.5, 0.0), agent=(0.5, 0.5))


def test_transit_agent_door_passable():
    scene = door_scene(0.22)
    world = make_world(scene)
    tp = TransitPlanner(world)
    path = tp.path((0.5, 0.5), (2.5, 2.5), scene.object_start)
    assert path is not None
    replay_transit(world, path, scene.object_start)
    xs = np.asarray(path)
    crossing = xs[np.abs(xs[:, 0] - 1.5) < 0.08]
    assert crossing.size and np.all((crossing[:, 1] > 1.0) & (crossing[:, 1] < 1.21))


def test_transit_thin_slot_blocked():
    scene = door_scene(0.13)
    world = make_world(scene)
    tp = TransitPlanner(world)
    assert tp.path((0.5, 0.5), (2.5, 2.5), scene.object_start) is None


def transit_reference(world, object_pose, start_cell, goal_cell, free):
    """Dijkstra over the whole lattice, every edge densely sampled."""
    lat_cell = world.esdf.cell
    ny, nx = free.shape
    b = world.bounds

    def center(ix, iy):
        return (b.xmin + (ix + 0.5) * lat_cell, b.ymin + (iy + 0.5) * lat_cell)

    def seg_ok(p, q):
        n = max(2, int(math.ceil(math.hypot(q[0] - p[0], q[1] - p[1]) / (lat_cell / 4))) + 1)
        ts = np.linspace(0, 1, n)
        pts = np.outer(1 - ts, p) + np.outer(ts, q)
        return np.all(world.agent_free_many(pts)) and np.all(
            world.agent_object_gap(pts, object_pose) >= -CONTACT_TOL
        )

    if not (free[start_cell[1], start_cell[0]] and free[goal_cell[1], goal_cell[0]]):
        return None
    dist = {start_cell: 0.0}
    heap = [(0.0, start_cell)]
    done = set()
    cache = {}
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        if node == goal_cell:
            return d
        done.add(node)
        ix, iy = node
        for dx, dy, w in _XY_STEPS:
            jx, jy = ix + dx, iy + dy
            if not (0 <= jx < nx and 0 <= jy < ny) or not free[jy, jx]:
                continue
            key = (node, (jx, jy)) if node < (jx, jy) else ((jx, jy), node)
            ok = cache.get(key)
            if ok is None:
                ok = seg_ok(center(ix, iy), center(jx, jy))
                cache[key] = ok
            if not ok:
                continue
            nd = d + w * lat_cell
            if nd < dist.get((jx, jy), math.inf) - 1e-12:
                dist[(jx, jy)] = nd
                heapq.heappush(heap, (nd, (jx, jy)))
    return None


def random_transit_scene(seed):
    rng = np.random.default_rng(seed)
    bounds = Rect(0, 0, 2.2, 2.2)
    while True:
        obstacles = []
        for _ in range(int(rng.integers(1, 4))):
            if rng.random() < 0.5:
                shape = Box(float(rng.uniform(0.08, 0.3)), float(rng.uniform(0.08, 0.3)))
            else:
                shape = Disc(float(rng.uniform(0.08, 0.25)))
            obstacles.append(
                (shape, Pose2(float(rng.uniform(0.2, 2.0)), float(rng.uniform(0.2, 2.0)),
                              float(rng.uniform(-math.pi, math.pi))))
            )
        try:
            return make_scene(
                obstacles,
                bounds=bounds,
                start=Pose2(float(rng.uniform(0.3, 1.9)), float(rng.uniform(0.3, 1.9)),
                            float(rng.uniform(-math.pi, math.pi))),
                agent=(float(rng.uniform(0.15, 2.05)), float(rng.uniform(0.15, 2.05))),
                goal=GoalRegion(rect=Rect(1.6, 1.6, 2.1, 2.1)),
            )
        except Exception:
            continue


def test_transit_matches_reference_search_on_random_scenes():
    mismatches = []
    for seed in range(6):
        scene = random_transit_scene(seed)
        world = make_world(scene)
        tp = TransitPlanner(world)
        lat = tp.lat
        gap = world.agent_object_gap(lat.centers, scene.object_start).reshape(lat.ny, lat.nx)
        free = tp.static_free & (gap >= -CONTACT_TOL)
        idx = np.argwhere(free)
        rng = np.random.default_rng(100 + seed)
        for _ in range(3):
            (sy, sx), (gy, gx) = idx[rng.choice(len(idx), 2, replace=False)]
            start = lat.center(sx, sy)
            goal = lat.center(gx, gy)
            ref = transit_reference(world, scene.object_start, (sx, sy), (gx, gy), free)
            path = tp.path(start, goal, scene.object_start)
            if (ref is None) != (path is None):
                mismatches.append((seed, start, goal, ref, path is not None))
                continue
            if path is not None:
                replay_transit(world, path, scene.object_start)
                cost = polyline_len(path)
                assert cost <= ref + 3 * SQRT2 * lat.cell + 1e-6
                assert cost >= math.hypot(goal[0] - start[0], goal[1] - start[1]) - 1e-6
    assert mismatches == []


def test_transit_deterministic():
    scene = door_scene(0.22)
    world = make_world(scene)
    p1 = TransitPlanner(world).path((0.5, 0.5), (2.5, 2.5), scene.object_start)
    p2 = TransitPlanner(world).path((0.5, 0.5), (2.5, 2.5), scene.object_start)
    assert np.array_equal(p1, p2)


# ---------------------------------------------------------------------------
# transfer planner


def slot_scene():
    walls = [
        (Box(0.04, 0.715), Pose2(2.25, 0.715, 0.0)),
        (Box(0.04, 0.715), Pose2(2.25, 2.285, 0.0)),
    ]
    return make_scene(
        walls,
        bounds=Rect(0, 0, 4.5, 3.0),
        start=Pose2(0.9, 1.5075, 0.0),
        agent=(0.5, 0.5),
        goal=GoalRegion(rect=Rect(3.2, 1.0, 4.0, 2.0)),
    )


def rotation_door_scene():
    walls = [
        (Box(0.04, 0.45), Pose2(1.1, 0.45, 0.0)),
        (Box(0.04, 0.55), Pose2(1.1, 1.65, 0.0)),
    ]
    return make_scene(
        walls,
        bounds=Rect(0, 0, 2.2, 2.2),
        start=Pose2(0.55, 1.0, math.pi / 2),
        agent=(0.2, 0.2),
        goal=GoalRegion(rect=Rect(1.5, 0.7, 2.1, 1.3)),
    )


def test_transfer_masks_match_exact_predicate():
    cases = [
        (slot_scene(), stick_grasps([REAR, FRONT, SIDE]), 1),
        (rotation_door_scene(), stick_grasps([REAR]), 4),
    ]
    for scene, grasps, nt in cases:
        world = make_world(scene)
        xp = TransferPlanner(world, grasps, n_theta=nt, theta0=0.0)
        lat = xp.lat
        for gid in range(grasps.k):
            for it in range(nt):
                layer = xp._layer(gid, it)
                th = xp.bin_theta(it)
                for iy in range(lat.ny):
                    for ix in range(lat.nx):
                        x, y = lat.center(ix, iy)
                        want = compound_ok(world, grasps, gid, Pose2(x, y, th))
                        assert layer.free[iy, ix] == want, (scene.name, gid, it, ix, iy)


def test_transfer_fast_accept_edges_pass_exact_sweep():
    scene = slot_scene()
    world = make_world(scene)
    grasps = stick_grasps([REAR, FRONT, SIDE])
    xp = TransferPlanner(world, grasps, n_theta=1, theta0=0.0)
    lat = xp.lat
    rng = np.random.default_rng(5)
    fwd = ((1, 0, 1.0), (0, 1, 1.0), (1, 1, SQRT2), (1, -1, SQRT2))
    for gid in range(grasps.k):
        layer = xp._layer(gid, 0)
        fast = []
        for iy in range(lat.ny):
            for ix in range(lat.nx):
                if not layer.free[iy, ix]:
                    continue
                for dx, dy, w in fwd:
                    jx, jy = ix + dx, iy + dy
                    if (
                        0 <= jx < lat.nx
                        and 0 <= jy < lat.ny
                        and layer.free[jy, jx]
                        and min(layer.slack[iy, ix], layer.slack[jy, jx])
                        >= 0.5 * w * lat.cell
                    ):
                        fast.append(((ix, iy), (jx, jy)))
        take = rng.choice(len(fast), min(150, len(fast)), replace=False)
        for t in take:
            (ix, iy), (jx, jy) = fast[int(t)]
            pa = xp._node_pose(ix, iy, 0)
            pb = xp._node_pose(jx, jy, 0)
            assert xp._sweep_ok(pa, pb, gid), (gid, ix, iy, jx, jy)


def test_transfer_direct_shot_same_bin():
    scene = make_scene([], bounds=Rect(0, 0, 4, 4), start=Pose2(1.0, 1.0, 0.0))
    world = make_world(scene)
    grasps = stick_grasps([REAR])
    xp = TransferPlanner(world, grasps, n_theta=1, theta0=0.0)
    path = xp.path(0, Pose2(1.0, 1.0, 0.0), transfer_goal_pose(Pose2(3.2, 2.6, 0.0)))
    assert path is not None and len(path) == 2
    replay_transfer(world, grasps, 0, path, xp.rot_radius(0))


def test_transfer_through_slot_only_with_trailing_anchor():
    scene = slot_scene()
    world = make_world(scene)
    grasps = stick_grasps([REAR, FRONT, SIDE])
    xp = TransferPlanner(world, grasps, n_theta=1, theta0=0.0)
    start = scene.object_start
    near_goal = transfer_goal_region(GoalRegion(rect=Rect(2.32, 1.44, 2.44, 1.56)))
    far_goal = transfer_goal_region(GoalRegion(rect=Rect(2.8, 1.44, 3.2, 1.56)))

    path = xp.path(0, start, near_goal)
    assert path is not None
    replay_transfer(world, grasps, 0, path, xp.rot_radius(0))
    end = path[-1]
    assert 2.32 <= end.x <= 2.44 and 1.44 <= end.y <= 1.56

    assert xp.path(1, start, near_goal) is None
    assert xp.path(2, start, near_goal) is None
    for gid in range(3):
        assert xp.path(gid, start, far_goal) is None


def test_transfer_rotation_through_low_door():
    scene = rotation_door_scene()
    world = make_world(scene)
    grasps = stick_grasps([REAR])
    xp = TransferPlanner(world, grasps, n_theta=4, theta0=0.0)
    goal = transfer_goal_pose(Pose2(1.7, 1.0, math.pi / 2))
    path = xp.path(0, scene.object_start, goal)
    assert path is not None
    replay_transfer(world, grasps, 0, path, xp.rot_radius(0))
    assert abs(wrap_angle(path[-1].theta - math.pi / 2)) < 1e-9
    assert any(abs(wrap_angle(p.theta - scene.object_start.theta)) > 0.1 for p in path)
    for p in path:
        # this close to the wall no vertical pose is collision free
        if abs(p.x - 1.1) < 0.07:
            assert min(abs(wrap_angle(p.theta)), abs(wrap_angle(p.theta - math.pi))) < 1e-9


def transfer_reference(world, grasps, gid, nt, theta0, start_node, goal_node, rot_r):
    """Dijkstra over the full (x, y, theta) lattice with sampled edges."""
    cell = world.esdf.cell
    b = world.bounds
    ny, nx = world.esdf.dist.shape
    step_t = 2 * math.pi / nt

    def pose(n):
        ix, iy, it = n
        return Pose2(b.xmin + (ix + 0.5) * cell, b.ymin + (iy + 0.5) * cell,
                     wrap_angle(theta0 + it * step_t))

    def node_ok(n):
        return compound_ok(world, grasps, gid, pose(n))

    def sweep(na, nb):
        pa, pb = pose(na), pose(nb)
        dth = wrap_angle(pb.theta - pa.theta)
        arc = math.hypot(pb.x - pa.x, pb.y - pa.y) + abs(dth) * rot_r
        n = max(2, int(math.ceil(arc / (cell / 4))) + 1)
        return all(
            compound_ok(
                world, grasps, gid,
                Pose2(pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y), pa.theta + t * dth),
            )
            for t in np.linspace(0, 1, n)
        )

    if not (node_ok(start_node) and node_ok(goal_node)):
        return None
    dist = {start_node: 0.0}
    heap = [(0.0, start_node)]
    done = set()
    free_cache = {start_node: True, goal_node: True}
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        if node == goal_node:
            return d
        done.add(node)
        ix, iy, it = node
        nbrs = [((ix + dx, iy + dy, it), w * cell) for dx, dy, w in _XY_STEPS]
        if nt == 2:
            nbrs.append(((ix, iy, 1 - it), step_t * rot_r))
        elif nt > 2:
            nbrs.append(((ix, iy, (it + 1) % nt), step_t * rot_r))
            nbrs.append(((ix, iy, (it - 1) % nt), step_t * rot_r))
        for nb, w in nbrs:
            jx, jy, jt = nb
            if not (0 <= jx < nx and 0 <= jy < ny):
                continue
            ok = free_cache.get(nb)
            if ok is None:
                ok = node_ok(nb)
                free_cache[nb] = ok
            if not ok or not sweep(node, nb):
                continue
            nd = d + w
            if nd < dist.get(nb, math.inf) - 1e-12:
                dist[nb] = nd
                heapq.heappush(heap, (nd, nb))
    return None


def test_transfer_matches_reference_search():
    scene = rotation_door_scene()
    world = make_world(scene, cell=0.09)
    grasps = stick_grasps([REAR])
    xp = TransferPlanner(world, grasps, n_theta=4, theta0=0.0)
    rot_r = xp.rot_radius(0)
    cases = [
        ((5, 11, 1), (18, 11, 1)),   # through the door, rotate twice
        ((5, 11, 1), (5, 4, 3)),     # same room, opposite heading
        ((5, 11, 1), (20, 20, 0)),   # far corner
    ]
    for sn, gn in cases:
        start = xp._node_pose(*sn)
        goalp = xp._node_pose(*gn)
        ref = transfer_reference(world, grasps, 0, 4, 0.0, sn, gn, rot_r)
        path = xp.path(0, start, transfer_goal_pose(goalp))
        assert (ref is None) == (path is None), (sn, gn)
        if path is None:
            continue
        replay_transfer(world, grasps, 0, path, rot_r)
        cost = transfer_cost(path, rot_r)
        assert cost <= ref + 3 * SQRT2 * world.esdf.cell + 1e-6
        lower = math.hypot(goalp.x - start.x, goalp.y - start.y)
        assert cost >= lower - 1e-6


def test_transfer_region_theta_constraint():
    scene = make_scene([], bounds=Rect(0, 0, 2, 2), start=Pose2(0.5, 0.5, 0.0),
                       agent=(0.2, 1.8))
    world = make_world(scene)
    grasps = stick_grasps([REAR])
    xp = TransferPlanner(world, grasps, n_theta=8, theta0=0.0)
    region = GoalRegion(rect=Rect(1.3, 1.3, 1.8, 1.8), theta=math.pi / 2, theta_tol=0.2)
    path = xp.path(0, scene.object_start, transfer_goal_region(region))
    assert path is not None
    end = path[-1]
    assert goal_satisfied(region, end)
    assert abs(wrap_angle(end.theta - math.pi / 2)) < 1e-9
    replay_transfer(world, grasps, 0, path, xp.rot_radius(0))


def test_transfer_off_lattice_theta_returns_none():
    scene = make_scene([], bounds=Rect(0, 0, 2, 2), start=Pose2(0.5, 0.5, 0.1),
                       agent=(0.2, 1.8))
    world = make_world(scene)
    xp = TransferPlanner(world, stick_grasps([REAR]), n_theta=8, theta0=0.0)
    assert xp.path(0, Pose2(0.5, 0.5, 0.1), transfer_goal_pose(Pose2(1.5, 1.5, 0.0))) is None


def test_transfer_deterministic():
    scene = slot_scene()
    world = make_world(scene)
    grasps = stick_grasps([REAR, FRONT, SIDE])
    goal = transfer_goal_region(GoalRegion(rect=Rect(2.32, 1.44, 2.44, 1.56)))
    p1 = TransferPlanner(world, grasps, 1, 0.0).path(0, scene.object_start, goal)
    p2 = TransferPlanner(world, grasps, 1, 0.0).path(0, scene.object_start, goal)
    assert p1 == p2
