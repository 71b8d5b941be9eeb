"""Planar geometry: rigid poses, convex shapes, collision tests, distance fields.

Conventions used across the package: lengths in meters, angles in radians,
poses act on points as p_world = R(theta) @ p_local + t.  Shapes are closed
sets, so touching counts as a collision.  Signed distances are measured to the
shape boundary and are negative inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Distance reported by a field with no obstacles in range.  Large enough to
# pass any clearance test while staying comfortably inside float64.
FREE_SPACE_DIST = 1.0e6

# Allowed penetration between the agent disc and the manipulated object while
# in (or establishing) contact.
CONTACT_TOL = 1.0e-3


def normalize_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


def angle_diff(a: float, b: float) -> float:
    """Smallest signed difference a - b on the circle."""
    return normalize_angle(a - b)


@dataclass(frozen=True)
class Pose2:
    """Rigid transform of the plane (rotation by theta, then translation)."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def compose(self, other: "Pose2") -> "Pose2":
        """self applied after other, i.e. the transform mapping p -> self(other(p))."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(-(c * self.x + s * self.y), -(-s * self.x + c * self.y), -self.theta)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (2,) or many points (N, 2) into the parent frame."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation().T + np.array([self.x, self.y])

    def apply_inverse(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return (pts - np.array([self.x, self.y])) @ self.rotation()

    def almost_equal(self, other: "Pose2", tol: float = 1e-9) -> bool:
        return (
            abs(self.x - other.x) <= tol
            and abs(self.y - other.y) <= tol
            and abs(angle_diff(self.theta, other.theta)) <= tol
        )


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, used for workspace bounds and goal regions."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(f"degenerate rect: {self}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0])

    def contains_point(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def as_list(self) -> list[float]:
        return [self.xmin, self.ymin, self.xmax, self.ymax]


# ---------------------------------------------------------------------------
# Shapes


@dataclass(frozen=True)
class Disc:
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("disc radius must be positive")

    @property
    def circumradius(self) -> float:
        return self.radius

    @property
    def inradius(self) -> float:
        return self.radius


@dataclass(frozen=True)
class Box:
    half_w: float
    half_h: float

    def __post_init__(self):
        if self.half_w <= 0 or self.half_h <= 0:
            raise ValueError("box half extents must be positive")

    @property
    def circumradius(self) -> float:
        return math.hypot(self.half_w, self.half_h)

    @property
    def inradius(self) -> float:
        return min(self.half_w, self.half_h)

    def corners(self) -> np.ndarray:
        w, h = self.half_w, self.half_h
        return np.array([[w, h], [-w, h], [-w, -h], [w, -h]])


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon given by CCW vertices in its own frame."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.shape[0] < 3:
            raise ValueError("polygon needs at least 3 vertices")
        rolled = np.roll(verts, -1, axis=0)
        edges = rolled - verts
        nxt = np.roll(edges, -1, axis=0)
        cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if np.any(cross < -1e-12):
            raise ValueError("polygon vertices must be convex and CCW")
        area = 0.5 * np.sum(verts[:, 0] * rolled[:, 1] - verts[:, 1] * rolled[:, 0])
        if area <= 1e-12:
            raise ValueError("polygon must have positive area (CCW order)")
        object.__setattr__(self, "vertices", tuple(map(tuple, verts)))

    @property
    def verts(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @property
    def circumradius(self) -> float:
        return float(np.max(np.linalg.norm(self.verts, axis=1)))

    @property
    def inradius(self) -> float:
        # Distance from the local origin to the nearest edge; only meaningful
        # when the origin is interior, which holds for all shapes we build.
        v = self.verts
        w = np.roll(v, -1, axis=0)
        edge = w - v
        length = np.linalg.norm(edge, axis=1)
        d = (edge[:, 0] * -v[:, 1] - edge[:, 1] * -v[:, 0]) / np.maximum(length, 1e-300)
        return float(np.min(d)) if np.all(d > 0) else 0.0


Shape = Disc | Box | ConvexPolygon


def polygon_verts(shape: Shape, pose: Pose2) -> np.ndarray | None:
    if isinstance(shape, Box):
        return pose.apply(shape.corners())
    if isinstance(shape, ConvexPolygon):
        return pose.apply(shape.verts)
    return None


def _segment_point_dist(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-300:
        return np.linalg.norm(pts - a, axis=-1)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.linalg.norm(pts - proj, axis=-1)


def _poly_signed_dist(verts: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Signed distance from points (N, 2) to a CCW polygon given in world frame."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n = verts.shape[0]
    dmin = np.full(pts.shape[0], np.inf)
    inside = np.ones(pts.shape[0], dtype=bool)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        dmin = np.minimum(dmin, _segment_point_dist(pts, a, b))
        edge = b - a
        inside &= edge[0] * (pts[:, 1] - a[1]) - edge[1] * (pts[:, 0] - a[0]) >= 0.0
    return np.where(inside, -dmin, dmin)


def _box_signed_dist(box: Box, pose: Pose2, pts: np.ndarray) -> np.ndarray:
    local = np.abs(pose.apply_inverse(pts))
    dx = local[:, 0] - box.half_w
    dy = local[:, 1] - box.half_h
    outside = np.hypot(np.maximum(dx, 0.0), np.maximum(dy, 0.0))
    inside = np.minimum(np.maximum(dx, dy), 0.0)
    return outside + inside


def signed_dist(shape: Shape, pose: Pose2, points: np.ndarray) -> np.ndarray:
    """Signed distance from world points (N, 2) to the posed shape boundary.

    Negative inside the shape, zero on it, positive outside.  Exact for all
    shape types; this is the primitive both the distance field and the
    narrow-phase confirmation are built on.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(shape, Disc):
        return np.linalg.norm(pts - pose.xy, axis=1) - shape.radius
    if isinstance(shape, Box):
        return _box_signed_dist(shape, pose, pts)
    verts = polygon_verts(shape, pose)
    return _poly_signed_dist(verts, pts)


def signed_dist_one(shape: Shape, pose: Pose2, x: float, y: float) -> float:
    return float(signed_dist(shape, pose, np.array([[x, y]]))[0])


def _sat_separated(va: np.ndarray, vb: np.ndarray) -> bool:
    """True when some edge normal of va strictly separates the two hulls."""
    n = va.shape[0]
    for i in range(n):
        edge = va[(i + 1) % n] - va[i]
        axis = np.array([-edge[1], edge[0]])
        pa = va @ axis
        pb = vb @ axis
        if pa.max() < pb.min() or pb.max() < pa.min():
            return True
    return False


def collide(shape_a: Shape, pose_a: Pose2, shape_b: Shape, pose_b: Pose2) -> bool:
    """Exact narrow-phase test between two posed shapes.

    Shapes are treated as closed sets: boundary contact is a collision.
    """
    if isinstance(shape_a, Disc) and isinstance(shape_b, Disc):
        gap = math.hypot(pose_a.x - pose_b.x, pose_a.y - pose_b.y)
        return gap <= shape_a.radius + shape_b.radius
    if isinstance(shape_a, Disc):
        d = signed_dist_one(shape_b, pose_b, pose_a.x, pose_a.y)
        return d <= shape_a.radius
    if isinstance(shape_b, Disc):
        d = signed_dist_one(shape_a, pose_a, pose_b.x, pose_b.y)
        return d <= shape_b.radius
    va = polygon_verts(shape_a, pose_a)
    vb = polygon_verts(shape_b, pose_b)
    return not (_sat_separated(va, vb) or _sat_separated(vb, va))


def contained(shape: Shape, pose: Pose2, rect: Rect) -> bool:
    """True when the posed shape lies entirely inside the rectangle."""
    if isinstance(shape, Disc):
        r = shape.radius
        return (
            rect.xmin <= pose.x - r
            and pose.x + r <= rect.xmax
            and rect.ymin <= pose.y - r
            and pose.y + r <= rect.ymax
        )
    verts = polygon_verts(shape, pose)
    return bool(
        np.all(verts[:, 0] >= rect.xmin)
        and np.all(verts[:, 0] <= rect.xmax)
        and np.all(verts[:, 1] >= rect.ymin)
        and np.all(verts[:, 1] <= rect.ymax)
    )


# ---------------------------------------------------------------------------
# Euclidean signed distance field


class OutOfBoundsError(Exception):
    """Raised for clearance queries outside the grid's workspace."""


@dataclass(frozen=True)
class EsdfGrid:
    """Signed distance sampled at cell centers of a regular grid.

    dist[iy, ix] holds the exact signed distance from the center of cell
    (ix, iy) to the nearest obstacle boundary.  Positive is free space.
    """

    origin: tuple[float, float]
    cell: float
    dist: np.ndarray = field(repr=False)
    bounds: Rect

    @property
    def nx(self) -> int:
        return self.dist.shape[1]

    @property
    def ny(self) -> int:
        return self.dist.shape[0]

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        ox, oy = self.origin
        xs = ox + (np.arange(self.nx) + 0.5) * self.cell
        ys = oy + (np.arange(self.ny) + 0.5) * self.cell
        return xs, ys

    def cell_index(self, x: float, y: float) -> tuple[int, int]:
        ox, oy = self.origin
        ix = int(np.clip(math.floor((x - ox) / self.cell), 0, self.nx - 1))
        iy = int(np.clip(math.floor((y - oy) / self.cell), 0, self.ny - 1))
        return ix, iy

    def center_of(self, ix: int, iy: int) -> tuple[float, float]:
        ox, oy = self.origin
        return ox + (ix + 0.5) * self.cell, oy + (iy + 0.5) * self.cell


def build_esdf(obstacles: list[tuple[Shape, Pose2]], bounds: Rect, cell: float) -> EsdfGrid:
    """Sample the exact signed distance to the obstacle union on a grid.

    Distances are computed analytically per primitive and minimized, so values
    at cell centers carry no discretization error; only interpolated queries
    between centers do.  With no obstacles every cell reads FREE_SPACE_DIST.
    """
    if cell <= 0:
        raise ValueError("cell size must be positive")
    nx = max(1, int(math.ceil(bounds.width / cell - 1e-9)))
    ny = max(1, int(math.ceil(bounds.height / cell - 1e-9)))
    xs = bounds.xmin + (np.arange(nx) + 0.5) * cell
    ys = bounds.ymin + (np.arange(ny) + 0.5) * cell
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    dist = np.full(pts.shape[0], FREE_SPACE_DIST)
    for shape, pose in obstacles:
        dist = np.minimum(dist, signed_dist(shape, pose, pts))
    grid = dist.reshape(ny, nx)
    grid.flags.writeable = False
    return EsdfGrid(origin=(bounds.xmin, bounds.ymin), cell=cell, dist=grid, bounds=bounds)


def interpolate_many(grid: EsdfGrid, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of the distance field at (N, 2) points.

    Points are clamped to the cell-center lattice, which extends constant
    values into the half-cell margin along the workspace edge.  No bounds
    check; callers that need one go through clearance().
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    ox, oy = grid.origin
    u = (pts[:, 0] - ox) / grid.cell - 0.5
    v = (pts[:, 1] - oy) / grid.cell - 0.5
    u = np.clip(u, 0.0, grid.nx - 1.0)
    v = np.clip(v, 0.0, grid.ny - 1.0)
    i0 = np.clip(np.floor(u).astype(int), 0, max(grid.nx - 2, 0))
    j0 = np.clip(np.floor(v).astype(int), 0, max(grid.ny - 2, 0))
    i1 = np.minimum(i0 + 1, grid.nx - 1)
    j1 = np.minimum(j0 + 1, grid.ny - 1)
    fu = u - i0
    fv = v - j0
    d = grid.dist
    return (
        d[j0, i0] * (1 - fu) * (1 - fv)
        + d[j0, i1] * fu * (1 - fv)
        + d[j1, i0] * (1 - fu) * fv
        + d[j1, i1] * fu * fv
    )


def clearance(grid: EsdfGrid, x: float, y: float) -> float:
    """Interpolated obstacle clearance at a point inside the workspace.

    Raises OutOfBoundsError for queries outside the bounds rect, which keeps
    "outside the map" distinct from "in collision" (a negative return).
    """
    if not grid.bounds.contains_point(x, y):
        raise OutOfBoundsError(f"clearance query ({x:.3f}, {y:.3f}) outside {grid.bounds}")
    return float(interpolate_many(grid, np.array([[x, y]]))[0])
