"""Grasp anchor synthesis and perturbation-based feasibility scoring.

An anchor is an agent-center pose in the object frame whose disc touches the
object boundary.  Feasibility of a grasp at an object pose is the fraction of
B perturbed agent placements around the anchor that are collision free; a
grasp signature thresholds that score per anchor into a bit vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import CONTACT_TOL, Pose2, Shape, signed_dist
from .rng import derive_rng
from .scene import _shape_from_json, _shape_to_json
from .world import World

MAX_GRASPS = 24


class GraspError(Exception):
    """Grasp generation could not satisfy its contract."""


class GraspFormatError(Exception):
    """Malformed grasp-set JSON."""


@dataclass(frozen=True)
class GraspAnchor:
    """Agent center pose in the object frame; theta faces the object center."""

    id: int
    rel_pose: Pose2


@dataclass(frozen=True)
class GraspSet:
    agent_radius: float
    object_shape: Shape
    anchors: tuple[GraspAnchor, ...]

    @property
    def k(self) -> int:
        return len(self.anchors)


@dataclass(frozen=True)
class FeasibilityParams:
    """Knobs for the perturbation score.

    b: perturbation samples per evaluation.
    eps_pert: positional perturbation radius (meters).
    alpha: signature threshold on the score.
    rng_seed: root seed; every evaluation derives its own stream from
        (rng_seed, context, anchor id) so results are order independent.
    """

    b: int = 16
    eps_pert: float = 0.035
    alpha: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.b < 1:
            raise ValueError("need at least one perturbation sample")
        if self.eps_pert < 0:
            raise ValueError("perturbation radius cannot be negative")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")


def default_feasibility(agent_radius: float, rng_seed: int = 0) -> FeasibilityParams:
    return FeasibilityParams(eps_pert=0.5 * agent_radius, rng_seed=rng_seed)


# ---------------------------------------------------------------------------
# Anchor generation


def _contact_distances(shape: Shape, dirs: np.ndarray, agent_radius: float) -> np.ndarray:
    """Per-ray distance from the shape origin where the agent disc touches.

    Bisection on the signed distance along each ray, run for all rays at once.
    """
    n = dirs.shape[0]
    lo = np.zeros(n)
    hi = np.full(n, shape.circumradius + agent_radius + 1.0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        d = signed_dist(shape, Pose2(), mid[:, None] * dirs)
        below = d < agent_radius
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _kmeans_once(points: np.ndarray, k: int, rng: np.random.Generator, iters: int):
    n = points.shape[0]
    # k-means++ seeding
    centers = np.empty((k, 2))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[c] = points[rng.integers(n)]
        else:
            centers[c] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((points - centers[c]) ** 2).sum(axis=1))
    assign = np.full(n, -1)
    for _ in range(iters):
        dist = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = dist.argmin(axis=1)
        for c in range(k):
            members = points[new_assign == c]
            if members.shape[0] == 0:
                # Re-seed a starved cluster at the point worst served by the
                # others so Lloyd's can keep making progress.
                far = int(np.argmax(dist.min(axis=1)))
                centers[c] = points[far]
                new_assign[far] = c
            else:
                centers[c] = members.mean(axis=0)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    dist = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = dist.argmin(axis=1)
    sse = float(dist[np.arange(n), assign].sum())
    return sse, centers, assign


def _kmeans(points: np.ndarray, k: int, rng: np.random.Generator, iters: int = 100, restarts: int = 8):
    """Lloyd's with k-means++ seeding; keeps the best of a few seeded restarts."""
    best = None
    for _ in range(restarts):
        sse, centers, assign = _kmeans_once(points, k, rng, iters)
        if best is None or sse < best[0]:
            best = (sse, centers, assign)
    return best[1], best[2]


def generate_grasps(
    object_shape: Shape,
    k: int,
    seed: int,
    agent_radius: float,
    n_samples: int | None = None,
) -> GraspSet:
    """Synthesize k grasp anchors spread around the object boundary.

    Directions are sampled uniformly on an annulus around the object, pushed
    radially to the contact surface (agent disc just touching the boundary),
    clustered with k-means, and each cluster is represented by its sample
    nearest the centroid.  Anchors are sorted by polar angle and renumbered,
    which makes ids stable for a fixed (shape, k, seed).
    """
    if k < 1:
        raise GraspError("need at least one grasp")
    if k > MAX_GRASPS:
        raise GraspError(f"at most {MAX_GRASPS} grasps supported, asked for {k}")
    if agent_radius <= 0:
        raise GraspError("agent radius must be positive")
    n = n_samples if n_samples is not None else max(1024, 64 * k)
    rng = derive_rng(seed, 0)
    ang = rng.uniform(0.0, 2.0 * math.pi, size=n)
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    contacts = _contact_distances(object_shape, dirs, agent_radius)[:, None] * dirs
    distinct = np.unique(np.round(contacts, 9), axis=0)
    if distinct.shape[0] < k:
        raise GraspError(
            f"insufficient grasp diversity: {distinct.shape[0]} distinct contacts for k={k}"
        )
    centers, assign = _kmeans(contacts, k, rng)
    reps = []
    for c in range(k):
        members = np.flatnonzero(assign == c)
        if members.size == 0:
            raise GraspError("k-means produced an empty cluster")
        d = np.linalg.norm(contacts[members] - centers[c], axis=1)
        reps.append(contacts[members[int(np.argmin(d))]])
    reps = np.array(reps)
    if np.unique(np.round(reps, 9), axis=0).shape[0] < k:
        raise GraspError("insufficient grasp diversity: duplicate cluster representatives")
    order = np.argsort(np.arctan2(reps[:, 1], reps[:, 0]))
    anchors = []
    for new_id, idx in enumerate(order):
        x, y = reps[idx]
        theta = math.atan2(-y, -x)
        anchors.append(GraspAnchor(id=new_id, rel_pose=Pose2(float(x), float(y), theta)))
    return GraspSet(agent_radius=agent_radius, object_shape=object_shape, anchors=tuple(anchors))


# ---------------------------------------------------------------------------
# Feasibility score and signatures


def _push_to_contact(
    shape: Shape, pose: Pose2, pts: np.ndarray, target: float
) -> np.ndarray:
    """Move points along the distance gradient until signed_dist == target."""
    pts = pts.copy()
    h = 1e-6
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    for _ in range(3):
        d = signed_dist(shape, pose, pts)
        need = target - d
        if np.all(np.abs(need) < 1e-9):
            break
        gx = (signed_dist(shape, pose, pts + ex) - signed_dist(shape, pose, pts - ex)) / (2 * h)
        gy = (signed_dist(shape, pose, pts + ey) - signed_dist(shape, pose, pts - ey)) / (2 * h)
        norm = np.maximum(np.hypot(gx, gy), 1e-12)
        pts[:, 0] += need * gx / norm
        pts[:, 1] += need * gy / norm
    return pts


def _perturbation_samples(
    object_pose: Pose2, anchor: GraspAnchor, params: FeasibilityParams, context: int
) -> np.ndarray:
    w = object_pose.compose(anchor.rel_pose)
    u = np.array([w.x, w.y])
    if params.eps_pert <= 0:
        return np.tile(u, (params.b, 1))
    rng = derive_rng(params.rng_seed, context, anchor.id)
    rad = params.eps_pert * np.sqrt(rng.uniform(size=params.b))
    ang = rng.uniform(0.0, 2.0 * math.pi, size=params.b)
    return u[None, :] + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


def _free_fraction(pts: np.ndarray, object_pose: Pose2, world: World) -> np.ndarray:
    """Per-sample pass/fail for agent placements near a grasp on the object.

    Samples sunk into the held object are slid back to the contact surface
    first; they then only fail if the environment (or the workspace edge)
    blocks them.
    """
    shape = world.scene.object_shape
    r = world.scene.agent_radius
    gap = world.agent_object_gap(pts, object_pose)
    pen = gap < -CONTACT_TOL
    if np.any(pen):
        pts = pts.copy()
        pts[pen] = _push_to_contact(shape, object_pose, pts[pen], target=r)
        gap = gap.copy()
        gap[pen] = world.agent_object_gap(pts[pen], object_pose)
    ok = world.agent_free_many(pts)
    ok &= gap >= -CONTACT_TOL
    return ok


def grasp_free(
    object_pose: Pose2,
    anchor: GraspAnchor,
    world: World,
    params: FeasibilityParams,
    context: int = 0,
) -> float:
    """Fraction of perturbed agent placements around the anchor that are free.

    With eps_pert == 0 and b == 1 this reduces to the exact collision
    predicate at the anchor pose.
    """
    pts = _perturbation_samples(object_pose, anchor, params, context)
    ok = _free_fraction(pts, object_pose, world)
    return float(np.count_nonzero(ok)) / float(params.b)


@dataclass(frozen=True)
class SignatureResult:
    bits: int
    phi: np.ndarray = field(repr=False)
    occupied: bool

    def has(self, grasp_id: int) -> bool:
        return bool(self.bits >> grasp_id & 1)


def signature(
    object_pose: Pose2,
    grasps: GraspSet,
    world: World,
    params: FeasibilityParams,
    context: int = 0,
) -> SignatureResult:
    """Per-grasp feasibility bits at one object pose.

    An object pose in collision (or out of bounds) is flagged occupied and
    carries the all-zero signature.
    """
    k = grasps.k
    if not world.object_free(object_pose):
        return SignatureResult(bits=0, phi=np.zeros(k), occupied=True)
    b = params.b
    pts = np.empty((k * b, 2))
    for i, anchor in enumerate(grasps.anchors):
        pts[i * b : (i + 1) * b] = _perturbation_samples(object_pose, anchor, params, context)
    ok = _free_fraction(pts, object_pose, world)
    phi = ok.reshape(k, b).mean(axis=1)
    bits = 0
    for i in range(k):
        if phi[i] >= params.alpha:
            bits |= 1 << i
    return SignatureResult(bits=bits, phi=phi, occupied=False)


# ---------------------------------------------------------------------------
# Serialization


def grasps_to_json(grasps: GraspSet) -> dict:
    return {
        "version": 1,
        "agent_radius": grasps.agent_radius,
        "k": grasps.k,
        "object_shape": _shape_to_json(grasps.object_shape),
        "anchors": [
            {"id": a.id, "pose": [a.rel_pose.x, a.rel_pose.y, a.rel_pose.theta]}
            for a in grasps.anchors
        ],
    }


def grasps_from_json(data: dict) -> GraspSet:
    if not isinstance(data, dict):
        raise GraspFormatError("grasps: expected a JSON object")
    for key in ("version", "agent_radius", "k", "object_shape", "anchors"):
        if key not in data:
            raise GraspFormatError(f"grasps.{key}: missing required field")
    if data["version"] != 1:
        raise GraspFormatError(f"grasps.version: unsupported version {data['version']!r}")
    try:
        shape = _shape_from_json(data["object_shape"], "grasps.object_shape")
    except Exception as e:
        raise GraspFormatError(str(e)) from e
    radius = data["agent_radius"]
    if not isinstance(radius, (int, float)) or radius <= 0:
        raise GraspFormatError("grasps.agent_radius: must be a positive number")
    anchors = []
    raw = data["anchors"]
    if not isinstance(raw, list) or len(raw) != data["k"]:
        raise GraspFormatError("grasps.anchors: length must equal k")
    for i, entry in enumerate(raw):
        ctx = f"grasps.anchors[{i}]"
        if not isinstance(entry, dict) or "id" not in entry or "pose" not in entry:
            raise GraspFormatError(f"{ctx}: expected an object with id and pose")
        pose = entry["pose"]
        if not isinstance(pose, list) or len(pose) != 3:
            raise GraspFormatError(f"{ctx}.pose: expected [x, y, theta]")
        anchor = GraspAnchor(id=int(entry["id"]), rel_pose=Pose2(*map(float, pose)))
        d = float(signed_dist(shape, Pose2(), np.array([[anchor.rel_pose.x, anchor.rel_pose.y]]))[0])
        if abs(d - radius) > CONTACT_TOL:
            raise GraspFormatError(f"{ctx}: anchor is not in contact with the object boundary")
        anchors.append(anchor)
    return GraspSet(agent_radius=float(radius), object_shape=shape, anchors=tuple(anchors))


def save_grasps(grasps: GraspSet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(grasps_to_json(grasps), indent=2) + "\n")


def load_grasps(path: str | Path) -> GraspSet:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise GraspFormatError(f"cannot read grasp file {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise GraspFormatError(f"grasp file {path} is not valid JSON: {e}") from e
    return grasps_from_json(data)
