"""Collision predicates shared by grasp scoring, motion search, and replay.

The distance field gives a fast broad phase; whenever an interpolated
clearance is within the field's error bound of a decision threshold, the
query falls back to the exact per-primitive test.  That keeps every predicate
exact while staying cheap away from obstacle boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    CONTACT_TOL,
    Box,
    Disc,
    EsdfGrid,
    Pose2,
    Rect,
    Shape,
    build_esdf,
    collide,
    contained,
    interpolate_many,
    polygon_verts,
    signed_dist,
)
from .scene import Scene


@dataclass
class World:
    """A scene plus its distance field and cached query helpers."""

    scene: Scene
    esdf: EsdfGrid
    _obs_centers: np.ndarray = field(init=False, repr=False)
    _obs_reach: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.scene.obstacles:
            self._obs_centers = np.array([[p.x, p.y] for _, p in self.scene.obstacles])
            self._obs_reach = np.array([s.circumradius for s, _ in self.scene.obstacles])
        else:
            self._obs_centers = np.zeros((0, 2))
            self._obs_reach = np.zeros(0)

    @property
    def band(self) -> float:
        return self.esdf.cell * math.sqrt(2.0)

    @property
    def bounds(self) -> Rect:
        return self.scene.bounds

    def _near_obstacles(self, center: np.ndarray, reach: float):
        """Indices of obstacles whose bounding circle can touch the query circle."""
        if self._obs_centers.shape[0] == 0:
            return ()
        d = np.linalg.norm(self._obs_centers - center, axis=1)
        return np.flatnonzero(d <= self._obs_reach + reach)

    def agent_free_many(self, pts: np.ndarray) -> np.ndarray:
        """Agent-vs-static test for (N, 2) centers, exact at the margins."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = self.scene.agent_radius
        ok = (
            (pts[:, 0] >= self.bounds.xmin + r)
            & (pts[:, 0] <= self.bounds.xmax - r)
            & (pts[:, 1] >= self.bounds.ymin + r)
            & (pts[:, 1] <= self.bounds.ymax - r)
        )
        if not self.scene.obstacles:
            return ok
        clear = interpolate_many(self.esdf, pts)
        free = ok & (clear > r + self.band)
        unsure = ok & ~free & (clear > r - self.band)
        if np.any(unsure):
            sub = pts[unsure]
            exact = np.full(sub.shape[0], np.inf)
            for shape, pose in self.scene.obstacles:
                exact = np.minimum(exact, signed_dist(shape, pose, sub))
            free[unsure] = exact > r
        return free

    def agent_free(self, x: float, y: float) -> bool:
        return bool(self.agent_free_many(np.array([[x, y]]))[0])

    def object_free(self, pose: Pose2) -> bool:
        """Object-vs-static test at a pose; touching counts as collision."""
        shape = self.scene.object_shape
        if not contained(shape, pose, self.bounds):
            return False
        if self.scene.obstacles:
            if self.bounds.contains_point(pose.x, pose.y):
                clear = float(interpolate_many(self.esdf, np.array([[pose.x, pose.y]]))[0])
                if clear - self.band > shape.circumradius:
                    return True
                if clear + self.band < shape.inradius:
                    return False
            center = np.array([pose.x, pose.y])
            for i in self._near_obstacles(center, shape.circumradius):
                obs_shape, obs_pose = self.scene.obstacles[i]
                if collide(shape, pose, obs_shape, obs_pose):
                    return False
        return True

    def object_free_many(self, poses: np.ndarray) -> np.ndarray:
        """Object-vs-static test for (N, 3) rows of (x, y, theta); exact.

        Vectorized twin of object_free for batch callers: containment from
        rotated extents, the distance-field gate for the bulk, and a
        separating-axis pass per nearby obstacle for the band the field
        cannot settle.  Boundary contact counts as collision, like
        everywhere else.
        """
        poses = np.atleast_2d(np.asarray(poses, dtype=float))
        xs, ys, ths = poses[:, 0], poses[:, 1], poses[:, 2]
        shape = self.scene.object_shape
        b = self.bounds
        c, s = np.cos(ths), np.sin(ths)

        if isinstance(shape, Disc):
            exlo = exhi = eylo = eyhi = shape.radius
        elif isinstance(shape, Box):
            exlo = exhi = shape.half_w * np.abs(c) + shape.half_h * np.abs(s)
            eylo = eyhi = shape.half_w * np.abs(s) + shape.half_h * np.abs(c)
        else:
            # polygons may be asymmetric about their origin, so the extents
            # on each side differ
            vx, vy = shape.verts[:, 0], shape.verts[:, 1]
            wx = vx[None, :] * c[:, None] - vy[None, :] * s[:, None]
            wy = vx[None, :] * s[:, None] + vy[None, :] * c[:, None]
            exlo, exhi = -wx.min(axis=1), wx.max(axis=1)
            eylo, eyhi = -wy.min(axis=1), wy.max(axis=1)
        free = (
            (xs - exlo >= b.xmin)
            & (xs + exhi <= b.xmax)
            & (ys - eylo >= b.ymin)
            & (ys + eyhi <= b.ymax)
        )
        if not self.scene.obstacles or not free.any():
            return free

        clear = interpolate_many(self.esdf, np.column_stack([xs, ys]))
        settled = free & (clear - self.band > shape.circumradius)
        free &= clear + self.band >= shape.inradius
        rest = np.flatnonzero(free & ~settled)
        if rest.size == 0:
            return free
        if not isinstance(shape, Box):
            for i in rest:
                pose = Pose2(float(xs[i]), float(ys[i]), float(ths[i]))
                if not self.object_free(pose):
                    free[i] = False
            return free

        # box object: one separating-axis pass per obstacle, all poses at once
        centers = np.column_stack([xs[rest], ys[rest]])
        ux = np.column_stack([c[rest], s[rest]])  # object long axis per pose
        uy = np.column_stack([-s[rest], c[rest]])
        corners = shape.corners()  # (4, 2) in the object frame
        wcx = xs[rest, None] + corners[None, :, 0] * c[rest, None] - corners[None, :, 1] * s[rest, None]
        wcy = ys[rest, None] + corners[None, :, 0] * s[rest, None] + corners[None, :, 1] * c[rest, None]
        hit = np.zeros(rest.size, dtype=bool)
        for i in self._near_obstacles_many(centers, shape.circumradius):
            obs_shape, obs_pose = self.scene.obstacles[i]
            near = ~hit
            near &= (
                np.linalg.norm(centers - self._obs_centers[i], axis=1)
                <= self._obs_reach[i] + shape.circumradius
            )
            sub = np.flatnonzero(near)
            if sub.size == 0:
                continue
            if isinstance(obs_shape, Disc):
                rel = self._obs_centers[i] - centers[sub]
                lx = np.abs(np.einsum("ij,ij->i", rel, ux[sub]))
                ly = np.abs(np.einsum("ij,ij->i", rel, uy[sub]))
                dx = np.maximum(lx - shape.half_w, 0.0)
                dy = np.maximum(ly - shape.half_h, 0.0)
                inside = np.minimum(
                    np.maximum(lx - shape.half_w, ly - shape.half_h), 0.0
                )
                hit[sub] |= np.hypot(dx, dy) + inside <= obs_shape.radius
                continue
            vb = polygon_verts(obs_shape, obs_pose)  # (M, 2)
            sep = np.zeros(sub.size, dtype=bool)
            # axes of the obstacle polygon: fixed intervals for it, rotated
            # extents for the object
            edges = np.roll(vb, -1, axis=0) - vb
            axes = np.column_stack([-edges[:, 1], edges[:, 0]])
            pb = vb @ axes.T  # (M, M): obstacle corners on its own axes
            po_c = centers[sub] @ axes.T  # (K, M)
            po_e = shape.half_w * np.abs(ux[sub] @ axes.T) + shape.half_h * np.abs(
                uy[sub] @ axes.T
            )
            sep |= (
                (po_c + po_e < pb.min(axis=0)[None, :])
                | (po_c - po_e > pb.max(axis=0)[None, :])
            ).any(axis=1)
            # axes of the object box: own extents are its half sizes, the
            # obstacle projects through its corners
            for axis, half in ((ux, shape.half_w), (uy, shape.half_h)):
                a = axis[sub]
                po_c = np.einsum("ij,ij->i", centers[sub], a)
                pbv = a @ vb.T  # (K, M)
                sep |= (pbv.min(axis=1) > po_c + half) | (pbv.max(axis=1) < po_c - half)
            hit[sub] |= ~sep
        free[rest] &= ~hit
        return free

    def _near_obstacles_many(self, centers: np.ndarray, reach: float):
        """Obstacle indices whose bounding circle can touch any query circle."""
        if self._obs_centers.shape[0] == 0:
            return ()
        lo = centers.min(axis=0)
        hi = centers.max(axis=0)
        mid = 0.5 * (lo + hi)
        spread = 0.5 * float(np.linalg.norm(hi - lo))
        d = np.linalg.norm(self._obs_centers - mid, axis=1)
        return np.flatnonzero(d <= self._obs_reach + reach + spread)

    def agent_object_gap(self, pts: np.ndarray, object_pose: Pose2) -> np.ndarray:
        """signed_dist(agent center, object) - radius for (N, 2) centers.

        Values below -CONTACT_TOL mean the agent penetrates the object beyond
        the allowed contact depth.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = signed_dist(self.scene.object_shape, object_pose, pts)
        return d - self.scene.agent_radius

    def agent_placement_ok(self, x: float, y: float, object_pose: Pose2) -> bool:
        """Full agent test while detached: static clearance plus object contact rule."""
        if not self.agent_free(x, y):
            return False
        gap = float(self.agent_object_gap(np.array([[x, y]]), object_pose)[0])
        return gap >= -CONTACT_TOL


DEFAULT_CELL = 0.045


def make_world(scene: Scene, cell: float = DEFAULT_CELL) -> World:
    return World(scene=scene, esdf=build_esdf(list(scene.obstacles), scene.bounds, cell))


def anchor_world_xy(object_pose: Pose2, rel_pose: Pose2) -> tuple[float, float]:
    """World position of the agent center for a grasp anchor at an object pose."""
    w = object_pose.compose(rel_pose)
    return (w.x, w.y)
