"""Lattice motion planning for the agent disc and the agent+object compound.

Both searches run A* on the distance-field lattice (8-connected in x, y;
transfers add rotation steps between orientation bins).  Cell and edge
feasibility use two tiers: a vectorized conservative clearance bound accepts
or rejects the easy majority, and anything inside the uncertainty band falls
back to the exact predicates in module world, sampled at quarter-cell spacing
along edges.  Failed queries are cheap: a component labeling of the free mask
answers unreachable start/goal pairs without expanding the search.

Everything here is deterministic: no sampling, fixed neighbor order, and
heap ties broken by node index.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    CONTACT_TOL,
    Box,
    Disc,
    Pose2,
    Shape,
    interpolate_many,
    signed_dist,
)
from .grasp import GraspSet
from .scene import GoalRegion, goal_satisfied
from .world import World

SQRT2 = math.sqrt(2.0)
_XY_STEPS = (
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT2),
    (1, -1, SQRT2),
    (-1, 1, SQRT2),
    (-1, -1, SQRT2),
)


def wrap_angle(t: float) -> float:
    return (t + math.pi) % (2.0 * math.pi) - math.pi


def compound_rot_radius(shape: Shape, rel_pose: Pose2, agent_radius: float) -> float:
    """Radius of the disc swept by the grasped compound rotating about the
    object center; bounds how far any of its points moves per radian."""
    return max(shape.circumradius, math.hypot(rel_pose.x, rel_pose.y) + agent_radius)


# ---------------------------------------------------------------------------
# Shape coverage: a set of discs whose union contains the shape.  Clearance
# of every disc center beyond its radius proves the whole shape clear, which
# is the fast tier for object collision masks.


def coverage_discs(shape: Shape, spacing: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Disc centers (in the shape frame) and radii covering the shape.

    Boxes get a proper grid; other shapes fall back to one circumscribed
    disc, which stays correct but pushes more cells to the exact tier.
    """
    if isinstance(shape, Box):
        nx = max(1, int(math.ceil(2.0 * shape.half_w / spacing)))
        ny = max(1, int(math.ceil(2.0 * shape.half_h / spacing)))
        sx = 2.0 * shape.half_w / nx
        sy = 2.0 * shape.half_h / ny
        xs = -shape.half_w + (np.arange(nx) + 0.5) * sx
        ys = -shape.half_h + (np.arange(ny) + 0.5) * sy
        gx, gy = np.meshgrid(xs, ys)
        centers = np.column_stack([gx.ravel(), gy.ravel()])
        rho = np.full(centers.shape[0], 0.5 * math.hypot(sx, sy))
        return centers, rho
    return np.zeros((1, 2)), np.array([shape.circumradius])


def _bounds_margin(shape: Shape, poses_xy: np.ndarray, cos_t: float, sin_t: float, bounds):
    """Exact distance from the placed shape to the workspace edge (may be < 0)."""
    if isinstance(shape, Disc):
        pts = poses_xy
        reach = shape.radius
    else:
        if isinstance(shape, Box):
            local = np.array(
                [
                    [shape.half_w, shape.half_h],
                    [shape.half_w, -shape.half_h],
                    [-shape.half_w, shape.half_h],
                    [-shape.half_w, -shape.half_h],
                ]
            )
        else:
            local = np.asarray(shape.vertices, dtype=float)
        rot = np.array([[cos_t, -sin_t], [sin_t, cos_t]])
        world = local @ rot.T
        pts = poses_xy[:, None, :] + world[None, :, :]
        reach = 0.0
    m = np.minimum(
        np.minimum(pts[..., 0] - bounds.xmin, bounds.xmax - pts[..., 0]),
        np.minimum(pts[..., 1] - bounds.ymin, bounds.ymax - pts[..., 1]),
    )
    if m.ndim == 2:
        m = m.min(axis=1)
    return m - reach


# ---------------------------------------------------------------------------
# Lattice bookkeeping shared by both planners


class Lattice:
    """Cell geometry aligned with the world's distance-field grid."""

    def __init__(self, world: World):
        self.world = world
        self.cell = world.esdf.cell
        b = world.bounds
        self.nx = world.esdf.dist.shape[1]
        self.ny = world.esdf.dist.shape[0]
        xs = b.xmin + (np.arange(self.nx) + 0.5) * self.cell
        ys = b.ymin + (np.arange(self.ny) + 0.5) * self.cell
        gx, gy = np.meshgrid(xs, ys)
        self.centers = np.column_stack([gx.ravel(), gy.ravel()])  # (ny*nx, 2)
        self.xs = xs
        self.ys = ys

    def cell_of(self, x: float, y: float) -> tuple[int, int] | None:
        b = self.world.bounds
        ix = int(math.floor((x - b.xmin) / self.cell))
        iy = int(math.floor((y - b.ymin) / self.cell))
        if 0 <= ix < self.nx and 0 <= iy < self.ny:
            return ix, iy
        return None

    def center(self, ix: int, iy: int) -> tuple[float, float]:
        return float(self.xs[ix]), float(self.ys[iy])

    def snap_candidates(self, x: float, y: float, free: np.ndarray, ring: int = 2):
        """Free cells near (x, y), closest first."""
        at = self.cell_of(x, y)
        if at is None:
            return
        ix0, iy0 = at
        cands = []
        for dx in range(-ring, ring + 1):
            for dy in range(-ring, ring + 1):
                ix, iy = ix0 + dx, iy0 + dy
                if 0 <= ix < self.nx and 0 <= iy < self.ny and free[iy, ix]:
                    cx, cy = self.center(ix, iy)
                    cands.append((math.hypot(cx - x, cy - y), ix, iy))
        cands.sort()
        for _, ix, iy in cands:
            yield ix, iy


def label_components(free: np.ndarray) -> np.ndarray:
    """8-connected component labels (theta wrap on axis 0 for 3D input).

    A superset of lattice passability: edges may still fail exact checks, so
    labels are only used to reject queries, never to accept them.
    """
    arr = free if free.ndim == 3 else free[None, :, :]
    nt = arr.shape[0]
    labels = np.full(arr.shape, -1, dtype=int)
    todo = arr.copy()
    cur = 0
    while True:
        seeds = np.argwhere(todo)
        if seeds.shape[0] == 0:
            break
        comp = np.zeros_like(arr)
        comp[tuple(seeds[0])] = True
        frontier = comp.copy()
        while frontier.any():
            grown = np.zeros_like(arr)
            f = frontier
            grown[:, 1:, :] |= f[:, :-1, :]
            grown[:, :-1, :] |= f[:, 1:, :]
            grown[:, :, 1:] |= f[:, :, :-1]
            grown[:, :, :-1] |= f[:, :, 1:]
            grown[:, 1:, 1:] |= f[:, :-1, :-1]
            grown[:, 1:, :-1] |= f[:, :-1, 1:]
            grown[:, :-1, 1:] |= f[:, 1:, :-1]
            grown[:, :-1, :-1] |= f[:, 1:, 1:]
            if nt == 2:
                grown[0] |= f[1]
                grown[1] |= f[0]
            elif nt > 2:
                grown |= np.roll(f, 1, axis=0)
                grown |= np.roll(f, -1, axis=0)
            frontier = grown & todo & ~comp
            comp |= frontier
        labels[comp] = cur
        todo &= ~comp
        cur += 1
    return labels if free.ndim == 3 else labels[0]


# ---------------------------------------------------------------------------
# Agent transit


class TransitPlanner:
    """Plans the detached agent around obstacles and the parked object."""

    def __init__(self, world: World):
        self.world = world
        self.lat = Lattice(world)
        self.static_free = world.agent_free_many(self.lat.centers).reshape(
            self.lat.ny, self.lat.nx
        )
        r = world.scene.agent_radius
        clear = interpolate_many(world.esdf, self.lat.centers).reshape(self.lat.ny, self.lat.nx)
        self.static_slack = np.minimum(
            clear - r - world.band,
            _bounds_margin(Disc(r), self.lat.centers, 1.0, 0.0, world.bounds).reshape(
                self.lat.ny, self.lat.nx
            ),
        )

    def _segment_ok(self, p, q, object_pose: Pose2) -> bool:
        step = self.lat.cell / 4.0
        n = max(2, int(math.ceil(math.hypot(q[0] - p[0], q[1] - p[1]) / step)) + 1)
        ts = np.linspace(0.0, 1.0, n)
        pts = np.outer(1 - ts, p) + np.outer(ts, q)
        if not np.all(self.world.agent_free_many(pts)):
            return False
        return bool(np.all(self.world.agent_object_gap(pts, object_pose) >= -CONTACT_TOL))

    def path(self, start, goal, object_pose: Pose2) -> np.ndarray | None:
        """Polyline from start to goal, or None.  Endpoints may be off-lattice."""
        start = (float(start[0]), float(start[1]))
        goal = (float(goal[0]), float(goal[1]))
        if self._segment_ok(start, goal, object_pose):
            return np.array([start, goal])
        lat = self.lat
        gap = self.world.agent_object_gap(lat.centers, object_pose).reshape(lat.ny, lat.nx)
        free = self.static_free & (gap >= -CONTACT_TOL)
        slack = np.minimum(self.static_slack, gap)
        labels = label_components(free)

        s = None
        for ix, iy in lat.snap_candidates(*start, free):
            if self._segment_ok(start, lat.center(ix, iy), object_pose):
                s = (ix, iy)
                break
        if s is None:
            return None
        goal_set = {
            (ix, iy)
            for ix, iy in lat.snap_candidates(*goal, free)
            if labels[iy, ix] == labels[s[1], s[0]]
            and self._segment_ok(lat.center(ix, iy), goal, object_pose)
        }
        if not goal_set:
            return None

        came, end = self._astar(s, goal_set, free, slack, object_pose)
        if end is None:
            return None
        cells = [end]
        while cells[-1] != s:
            cells.append(came[cells[-1]])
        cells.reverse()
        pts = [start] + [lat.center(ix, iy) for ix, iy in cells] + [goal]
        return np.array(pts)

    def _astar(self, s, goal_set, free, slack, object_pose):
        lat = self.lat
        gxys = [lat.center(ix, iy) for ix, iy in goal_set]

        def h(ix, iy):
            cx, cy = lat.center(ix, iy)
            return min(math.hypot(cx - gx, cy - gy) for gx, gy in gxys)

        dist = {s: 0.0}
        came = {}
        heap = [(h(*s), s)]
        closed = set()
        while heap:
            _, node = heapq.heappop(heap)
            if node in closed:
                continue
            if node in goal_set:
                return came, node
            closed.add(node)
            ix, iy = node
            for dx, dy, w in _XY_STEPS:
                jx, jy = ix + dx, iy + dy
                if not (0 <= jx < lat.nx and 0 <= jy < lat.ny):
                    continue
                if not free[jy, jx] or (jx, jy) in closed:
                    continue
                half = 0.5 * w * lat.cell
                if min(slack[iy, ix], slack[jy, jx]) < half:
                    if not self._segment_ok(lat.center(ix, iy), lat.center(jx, jy), object_pose):
                        continue
                nd = dist[node] + w * lat.cell
                if nd < dist.get((jx, jy), math.inf) - 1e-12:
                    dist[(jx, jy)] = nd
                    came[(jx, jy)] = node
                    heapq.heappush(heap, (nd + h(jx, jy), (jx, jy)))
        return came, None


# ---------------------------------------------------------------------------
# Compound transfer


@dataclass(frozen=True)
class TransferGoal:
    """Either an exact placement pose or a goal region."""

    pose: Pose2 | None = None
    region: GoalRegion | None = None

    def __post_init__(self):
        if (self.pose is None) == (self.region is None):
            raise ValueError("specify exactly one of pose or region")


class _Layer:
    __slots__ = ("free", "slack", "theta")

    def __init__(self, free, slack, theta):
        self.free = free
        self.slack = slack
        self.theta = theta


class TransferPlanner:
    """Plans the rigid agent+object compound, one mask per (grasp, theta bin).

    Masks and component labels are cached per instance, so repeated attempts
    in the refinement loop cost one vectorized build each at most.
    """

    def __init__(self, world: World, grasps: GraspSet, n_theta: int = 1, theta0: float = 0.0):
        self.world = world
        self.grasps = grasps
        self.n_theta = n_theta
        self.theta0 = theta0
        self.lat = Lattice(world)
        self.cover, self.rho = coverage_discs(world.scene.object_shape)
        # fast-block reasoning needs samples that truly lie inside the object
        self.cover_inside = signed_dist(
            world.scene.object_shape, Pose2(), self.cover
        ) < -1e-9
        shape = world.scene.object_shape
        if isinstance(shape, Box):
            self._obj_verts = shape.corners()
        elif isinstance(shape, Disc):
            self._obj_verts = None
        else:
            self._obj_verts = np.asarray(shape.vertices, dtype=float)
        self._layers: dict[tuple[int, int], _Layer] = {}
        self._labels: dict[int, np.ndarray] = {}
        self._edges: dict[tuple, bool] = {}

    @property
    def theta_step(self) -> float:
        return 2.0 * math.pi / self.n_theta

    def bin_theta(self, it: int) -> float:
        return wrap_angle(self.theta0 + it * self.theta_step)

    def theta_index(self, theta: float) -> int:
        return int(round((theta - self.theta0) / self.theta_step)) % self.n_theta

    def rot_radius(self, grasp_id: int) -> float:
        return compound_rot_radius(
            self.world.scene.object_shape,
            self.grasps.anchors[grasp_id].rel_pose,
            self.world.scene.agent_radius,
        )

    def _pose_ok(self, pose: Pose2, grasp_id: int) -> bool:
        """Exact compound feasibility at one pose."""
        if not self.world.object_free(pose):
            return False
        a = pose.compose(self.grasps.anchors[grasp_id].rel_pose)
        return self.world.agent_free(a.x, a.y)

    def _layer(self, grasp_id: int, it: int) -> _Layer:
        key = (grasp_id, it)
        if key in self._layers:
            return self._layers[key]
        world = self.world
        lat = self.lat
        theta = self.bin_theta(it)
        c, s = math.cos(theta), math.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        band = world.band

        # object tier: coverage discs against the distance field
        offs = self.cover @ rot.T  # (M, 2)
        pts = lat.centers[:, None, :] + offs[None, :, :]
        d = interpolate_many(world.esdf, pts.reshape(-1, 2)).reshape(len(lat.centers), -1)
        obj_lb = (d - self.rho[None, :]).min(axis=1) - band
        obj_blocked = ((d + band < 0.0) & self.cover_inside[None, :]).any(axis=1)
        obj_bounds = _bounds_margin(world.scene.object_shape, lat.centers, c, s, world.bounds)

        # agent tier: one disc at the anchor offset
        rel = self.grasps.anchors[grasp_id].rel_pose
        axy = lat.centers + np.array([rel.x, rel.y]) @ rot.T
        r = world.scene.agent_radius
        ad = interpolate_many(world.esdf, axy)
        agent_lb = ad - r - band
        agent_bounds = _bounds_margin(Disc(r), axy, 1.0, 0.0, world.bounds)

        slack = np.minimum.reduce([obj_lb, obj_bounds, agent_lb, agent_bounds])
        free = slack > 0.0
        blocked = obj_blocked | (ad + band < r) | (obj_bounds < 0.0) | (agent_bounds < 0.0)
        unsure = np.flatnonzero(~free & ~blocked)
        if unsure.size:
            poses = np.column_stack(
                [lat.centers[unsure], np.full(unsure.size, theta)]
            )
            ok = world.object_free_many(poses)
            sub = unsure[ok]
            if sub.size:
                free[sub] = world.agent_free_many(axy[sub])
        slack = np.where(free & (slack < 0.0), 0.0, slack)
        layer = _Layer(
            free.reshape(lat.ny, lat.nx), slack.reshape(lat.ny, lat.nx), theta
        )
        self._layers[key] = layer
        return layer

    def labels(self, grasp_id: int) -> np.ndarray:
        if grasp_id not in self._labels:
            stack = np.stack(
                [self._layer(grasp_id, it).free for it in range(self.n_theta)], axis=0
            )
            self._labels[grasp_id] = label_components(stack)
        return self._labels[grasp_id]

    # -- edge validation ----------------------------------------------------

    def _poses_free(self, xs, ys, ths, grasp_id: int) -> bool:
        """All sampled compound poses collision free.

        Batched version of _pose_ok: conservative distance-field bounds settle
        most samples in a few array ops; only the unsure remainder pays for
        exact geometry.
        """
        world = self.world
        b = world.bounds
        band = world.band
        c, s = np.cos(ths), np.sin(ths)

        if self._obj_verts is None:
            reach = world.scene.object_shape.circumradius
            obj_margin = (
                np.minimum(np.minimum(xs - b.xmin, b.xmax - xs),
                           np.minimum(ys - b.ymin, b.ymax - ys))
                - reach
            )
        else:
            vx, vy = self._obj_verts[:, 0], self._obj_verts[:, 1]
            wx = xs[:, None] + vx[None, :] * c[:, None] - vy[None, :] * s[:, None]
            wy = ys[:, None] + vx[None, :] * s[:, None] + vy[None, :] * c[:, None]
            obj_margin = np.minimum(
                np.minimum(wx - b.xmin, b.xmax - wx),
                np.minimum(wy - b.ymin, b.ymax - wy),
            ).min(axis=1)
        if np.any(obj_margin < 0.0):
            return False

        cx, cy = self.cover[:, 0], self.cover[:, 1]
        px = xs[:, None] + cx[None, :] * c[:, None] - cy[None, :] * s[:, None]
        py = ys[:, None] + cx[None, :] * s[:, None] + cy[None, :] * c[:, None]
        d = interpolate_many(
            world.esdf, np.column_stack([px.ravel(), py.ravel()])
        ).reshape(px.shape)
        if np.any((d + band < 0.0) & self.cover_inside[None, :]):
            return False
        obj_clear = (d - self.rho[None, :]).min(axis=1) - band > 0.0

        rel = self.grasps.anchors[grasp_id].rel_pose
        ax = xs + rel.x * c - rel.y * s
        ay = ys + rel.x * s + rel.y * c
        r = world.scene.agent_radius
        agent_margin = (
            np.minimum(np.minimum(ax - b.xmin, b.xmax - ax),
                       np.minimum(ay - b.ymin, b.ymax - ay))
            - r
        )
        if np.any(agent_margin < 0.0):
            return False
        ad = interpolate_many(world.esdf, np.column_stack([ax, ay]))
        if np.any(ad + band < r):
            return False
        agent_clear = ad - r - band > 0.0

        rest = np.flatnonzero(~(obj_clear & agent_clear))
        if rest.size == 0:
            return True
        if not self.world.object_free_many(
            np.column_stack([xs[rest], ys[rest], ths[rest]])
        ).all():
            return False
        return bool(self.world.agent_free_many(np.column_stack([ax[rest], ay[rest]])).all())

    def _sweep_ok(self, pa: Pose2, pb: Pose2, grasp_id: int) -> bool:
        """Sample the interpolated motion at quarter-cell spacing, exactly."""
        dth = wrap_angle(pb.theta - pa.theta)
        arc = math.hypot(pb.x - pa.x, pb.y - pa.y) + abs(dth) * self.rot_radius(grasp_id)
        n = max(2, int(math.ceil(arc / (self.lat.cell / 4.0))) + 1)
        ts = np.linspace(0.0, 1.0, n)
        return self._poses_free(
            pa.x + ts * (pb.x - pa.x),
            pa.y + ts * (pb.y - pa.y),
            pa.theta + ts * dth,
            grasp_id,
        )

    def _edge_ok(self, grasp_id: int, na, nb) -> bool:
        """Cached node-to-node sweep; survives across queries on one instance."""
        key = (grasp_id, na, nb) if na <= nb else (grasp_id, nb, na)
        got = self._edges.get(key)
        if got is None:
            got = self._sweep_ok(self._node_pose(*na), self._node_pose(*nb), grasp_id)
            self._edges[key] = got
        return got

    def path(self, grasp_id: int, start: Pose2, goal: TransferGoal) -> list[Pose2] | None:
        """Pose polyline from start to the goal, or None.

        The start and an exact goal pose may sit off-lattice; their theta must
        lie on the orientation lattice (placements always do).
        """
        lat = self.lat
        it0 = self.theta_index(start.theta)
        if abs(wrap_angle(start.theta - self.bin_theta(it0))) > 1e-6:
            return None
        if goal.pose is not None:
            itg = self.theta_index(goal.pose.theta)
            if abs(wrap_angle(goal.pose.theta - self.bin_theta(itg))) > 1e-6:
                return None
            if it0 == itg and self._sweep_ok(start, goal.pose, grasp_id):
                return [start, goal.pose]

        layer0 = self._layer(grasp_id, it0)
        s = None
        for ix, iy in lat.snap_candidates(start.x, start.y, layer0.free):
            if self._sweep_ok(start, self._node_pose(ix, iy, it0), grasp_id):
                s = (ix, iy, it0)
                break
        if s is None:
            return None

        goal_nodes: dict[tuple[int, int, int], Pose2 | None] = {}
        if goal.pose is not None:
            itg = self.theta_index(goal.pose.theta)
            layer_g = self._layer(grasp_id, itg)
            for ix, iy in lat.snap_candidates(goal.pose.x, goal.pose.y, layer_g.free):
                if self._sweep_ok(self._node_pose(ix, iy, itg), goal.pose, grasp_id):
                    goal_nodes[(ix, iy, itg)] = goal.pose
            # goal nodes sit within the snap ring of the target point
            slack = 3.0 * SQRT2 * lat.cell
            hx, hy = goal.pose.x, goal.pose.y

            def h(ix, iy):
                cx, cy = lat.center(ix, iy)
                return max(0.0, math.hypot(cx - hx, cy - hy) - slack)

        else:
            reg = goal.region
            for it in range(self.n_theta):
                layer = self._layer(grasp_id, it)
                th = layer.theta
                if reg.theta is not None and abs(wrap_angle(th - reg.theta)) > reg.theta_tol:
                    continue
                inside = (
                    (lat.centers[:, 0] >= reg.rect.xmin)
                    & (lat.centers[:, 0] <= reg.rect.xmax)
                    & (lat.centers[:, 1] >= reg.rect.ymin)
                    & (lat.centers[:, 1] <= reg.rect.ymax)
                ).reshape(lat.ny, lat.nx)
                for iy, ix in np.argwhere(inside & layer.free):
                    goal_nodes[(int(ix), int(iy), it)] = None
            rect = reg.rect

            def h(ix, iy):
                cx, cy = lat.center(ix, iy)
                dx = max(rect.xmin - cx, 0.0, cx - rect.xmax)
                dy = max(rect.ymin - cy, 0.0, cy - rect.ymax)
                return math.hypot(dx, dy)

        if not goal_nodes:
            return None

        labels = self.labels(grasp_id)
        lab_s = labels[s[2], s[1], s[0]]
        goal_nodes = {
            n: tail for n, tail in goal_nodes.items() if labels[n[2], n[1], n[0]] == lab_s
        }
        if not goal_nodes:
            return None

        came, end = self._astar(grasp_id, s, set(goal_nodes), h)
        if end is None:
            return None
        cells = [end]
        while cells[-1] != s:
            cells.append(came[cells[-1]])
        cells.reverse()
        poses = [start] + [self._node_pose(*n) for n in cells]
        tail = goal_nodes[end]
        if tail is not None:
            poses.append(tail)
        return poses

    def _node_pose(self, ix: int, iy: int, it: int) -> Pose2:
        x, y = self.lat.center(ix, iy)
        return Pose2(x, y, self.bin_theta(it))

    def _astar(self, grasp_id, s, goal_set, h):
        lat = self.lat
        rotr = self.rot_radius(grasp_id)
        rot_cost = self.theta_step * rotr
        layers = {it: self._layer(grasp_id, it) for it in range(self.n_theta)}

        def relax(node, other, w):
            nd = dist[node] + w
            if nd < dist.get(other, math.inf) - 1e-12:
                dist[other] = nd
                came[other] = node
                heapq.heappush(heap, (nd + h(other[0], other[1]), other))

        dist = {s: 0.0}
        came = {}
        heap = [(h(s[0], s[1]), s)]
        closed = set()
        while heap:
            _, node = heapq.heappop(heap)
            if node in closed:
                continue
            if node in goal_set:
                return came, node
            closed.add(node)
            ix, iy, it = node
            layer = layers[it]
            for dx, dy, w in _XY_STEPS:
                jx, jy = ix + dx, iy + dy
                if not (0 <= jx < lat.nx and 0 <= jy < lat.ny):
                    continue
                if not layer.free[jy, jx] or (jx, jy, it) in closed:
                    continue
                half = 0.5 * w * lat.cell
                if min(layer.slack[iy, ix], layer.slack[jy, jx]) < half:
                    if not self._edge_ok(grasp_id, node, (jx, jy, it)):
                        continue
                relax(node, (jx, jy, it), w * lat.cell)
            if self.n_theta > 1:
                steps = (1,) if self.n_theta == 2 else (1, self.n_theta - 1)
                for dt in steps:
                    jt = (it + dt) % self.n_theta
                    other = layers[jt]
                    if not other.free[iy, ix] or (ix, iy, jt) in closed:
                        continue
                    need = 0.5 * self.theta_step * rotr
                    if min(layer.slack[iy, ix], other.slack[iy, ix]) < need:
                        if not self._edge_ok(grasp_id, node, (ix, iy, jt)):
                            continue
                    relax(node, (ix, iy, jt), rot_cost)
        return came, None


def transfer_goal_pose(pose: Pose2) -> TransferGoal:
    return TransferGoal(pose=pose)


def transfer_goal_region(region: GoalRegion) -> TransferGoal:
    return TransferGoal(region=region)
