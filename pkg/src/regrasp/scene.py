"""Scene model and JSON serialization.

A scene is a rectangular workspace with static convex obstacles, one movable
stick-like object, a disc agent, and a goal region for the object's center.
Scenes validate their own invariants on construction, so a loaded scene is
always usable by the planners.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .geometry import (
    CONTACT_TOL,
    Box,
    ConvexPolygon,
    Disc,
    Pose2,
    Rect,
    Shape,
    collide,
    contained,
    signed_dist_one,
)

SCHEMA_VERSION = 1


class SceneError(Exception):
    """A structurally valid scene that violates a planning invariant."""


class SceneFormatError(Exception):
    """Malformed scene JSON; the message names the offending field."""


@dataclass(frozen=True)
class GoalRegion:
    """Target set for the object: center inside rect, optional orientation."""

    rect: Rect
    theta: float | None = None
    theta_tol: float = 0.2


def goal_satisfied(goal: GoalRegion, object_pose: Pose2) -> bool:
    if not goal.rect.contains_point(object_pose.x, object_pose.y):
        return False
    if goal.theta is None:
        return True
    d = (object_pose.theta - goal.theta + math.pi) % (2.0 * math.pi) - math.pi
    return abs(d) <= goal.theta_tol


@dataclass(frozen=True)
class Configuration:
    """World state: agent center, object pose, id of the held grasp if any."""

    agent: tuple[float, float]
    object_pose: Pose2
    grasp: int | None = None


@dataclass(frozen=True)
class Scene:
    name: str
    bounds: Rect
    obstacles: tuple[tuple[Shape, Pose2], ...]
    object_shape: Shape
    object_start: Pose2
    agent_radius: float
    agent_start: tuple[float, float]
    goal: GoalRegion

    def __post_init__(self):
        validate_scene(self)

    @property
    def agent_shape(self) -> Disc:
        return Disc(self.agent_radius)

    def start_configuration(self) -> Configuration:
        return Configuration(agent=self.agent_start, object_pose=self.object_start, grasp=None)


def agent_object_overlap(scene: Scene, agent_xy: tuple[float, float], object_pose: Pose2) -> float:
    """Penetration depth of the agent disc into the object; <= 0 means apart."""
    d = signed_dist_one(scene.object_shape, object_pose, agent_xy[0], agent_xy[1])
    return scene.agent_radius - d


def validate_scene(scene: Scene) -> None:
    if scene.agent_radius <= 0:
        raise SceneError("agent radius must be positive")
    b = scene.bounds
    g = scene.goal.rect
    if g.xmax < b.xmin or g.xmin > b.xmax or g.ymax < b.ymin or g.ymin > b.ymax:
        raise SceneError("goal region lies outside the workspace bounds")
    if not contained(scene.object_shape, scene.object_start, b):
        raise SceneError("object start pose extends outside the workspace bounds")
    ax, ay = scene.agent_start
    if not contained(Disc(scene.agent_radius), Pose2(ax, ay), b):
        raise SceneError("agent start extends outside the workspace bounds")
    agent = Disc(scene.agent_radius)
    agent_pose = Pose2(ax, ay)
    for i, (shape, pose) in enumerate(scene.obstacles):
        if collide(scene.object_shape, scene.object_start, shape, pose):
            raise SceneError(f"object start pose collides with obstacle {i}")
        if collide(agent, agent_pose, shape, pose):
            raise SceneError(f"agent start collides with obstacle {i}")
    if agent_object_overlap(scene, scene.agent_start, scene.object_start) > CONTACT_TOL:
        raise SceneError("agent start overlaps the object start pose")


# ---------------------------------------------------------------------------
# JSON encoding


def _shape_to_json(shape: Shape) -> dict:
    if isinstance(shape, Disc):
        return {"type": "disc", "radius": shape.radius}
    if isinstance(shape, Box):
        return {"type": "box", "half_w": shape.half_w, "half_h": shape.half_h}
    return {"type": "polygon", "vertices": [list(v) for v in shape.vertices]}


def _require(d: dict, key: str, ctx: str):
    if key not in d:
        raise SceneFormatError(f"{ctx}.{key}: missing required field")
    return d[key]


def _number(value, ctx: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise SceneFormatError(f"{ctx}: expected a finite number, got {value!r}")
    return float(value)


def _positive(value, ctx: str) -> float:
    v = _number(value, ctx)
    if v <= 0:
        raise SceneFormatError(f"{ctx}: must be positive, got {v}")
    return v


def _vec(value, n: int, ctx: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise SceneFormatError(f"{ctx}: expected a list of {n} numbers")
    return [_number(v, f"{ctx}[{i}]") for i, v in enumerate(value)]


def _shape_from_json(d, ctx: str) -> Shape:
    if not isinstance(d, dict):
        raise SceneFormatError(f"{ctx}: expected an object")
    kind = _require(d, "type", ctx)
    try:
        if kind == "disc":
            return Disc(_positive(_require(d, "radius", ctx), f"{ctx}.radius"))
        if kind == "box":
            return Box(
                _positive(_require(d, "half_w", ctx), f"{ctx}.half_w"),
                _positive(_require(d, "half_h", ctx), f"{ctx}.half_h"),
            )
        if kind == "polygon":
            raw = _require(d, "vertices", ctx)
            if not isinstance(raw, list) or len(raw) < 3:
                raise SceneFormatError(f"{ctx}.vertices: expected >= 3 vertex pairs")
            verts = tuple(tuple(_vec(v, 2, f"{ctx}.vertices[{i}]")) for i, v in enumerate(raw))
            return ConvexPolygon(verts)
    except ValueError as e:
        raise SceneFormatError(f"{ctx}: {e}") from e
    raise SceneFormatError(f"{ctx}.type: unknown shape type {kind!r}")


def _rect_from_json(value, ctx: str) -> Rect:
    v = _vec(value, 4, ctx)
    try:
        return Rect(*v)
    except ValueError as e:
        raise SceneFormatError(f"{ctx}: {e}") from e


def scene_to_json(scene: Scene) -> dict:
    out = {
        "version": SCHEMA_VERSION,
        "name": scene.name,
        "bounds": scene.bounds.as_list(),
        "obstacles": [
            {"shape": _shape_to_json(s), "pose": [p.x, p.y, p.theta]} for s, p in scene.obstacles
        ],
        "object": {
            "shape": _shape_to_json(scene.object_shape),
            "start": [scene.object_start.x, scene.object_start.y, scene.object_start.theta],
        },
        "agent": {"radius": scene.agent_radius, "start": list(scene.agent_start)},
        "goal": {"rect": scene.goal.rect.as_list()},
    }
    if scene.goal.theta is not None:
        out["goal"]["theta"] = [scene.goal.theta, scene.goal.theta_tol]
    return out


def scene_from_json(data: dict) -> Scene:
    if not isinstance(data, dict):
        raise SceneFormatError("scene: expected a JSON object")
    version = _require(data, "version", "scene")
    if version != SCHEMA_VERSION:
        raise SceneFormatError(f"scene.version: unsupported version {version!r}")
    name = _require(data, "name", "scene")
    if not isinstance(name, str) or not name:
        raise SceneFormatError("scene.name: expected a non-empty string")
    bounds = _rect_from_json(_require(data, "bounds", "scene"), "scene.bounds")
    raw_obs = _require(data, "obstacles", "scene")
    if not isinstance(raw_obs, list):
        raise SceneFormatError("scene.obstacles: expected a list")
    obstacles = []
    for i, entry in enumerate(raw_obs):
        ctx = f"scene.obstacles[{i}]"
        if not isinstance(entry, dict):
            raise SceneFormatError(f"{ctx}: expected an object")
        shape = _shape_from_json(_require(entry, "shape", ctx), f"{ctx}.shape")
        px, py, pt = _vec(_require(entry, "pose", ctx), 3, f"{ctx}.pose")
        obstacles.append((shape, Pose2(px, py, pt)))
    obj = _require(data, "object", "scene")
    obj_shape = _shape_from_json(_require(obj, "shape", "scene.object"), "scene.object.shape")
    sx, sy, st_ = _vec(_require(obj, "start", "scene.object"), 3, "scene.object.start")
    agent = _require(data, "agent", "scene")
    radius = _positive(_require(agent, "radius", "scene.agent"), "scene.agent.radius")
    axy = _vec(_require(agent, "start", "scene.agent"), 2, "scene.agent.start")
    goal_raw = _require(data, "goal", "scene")
    rect = _rect_from_json(_require(goal_raw, "rect", "scene.goal"), "scene.goal.rect")
    theta = None
    theta_tol = 0.2
    if "theta" in goal_raw:
        tv = _vec(goal_raw["theta"], 2, "scene.goal.theta")
        theta, theta_tol = tv[0], tv[1]
        if theta_tol <= 0:
            raise SceneFormatError("scene.goal.theta[1]: tolerance must be positive")
    return Scene(
        name=name,
        bounds=bounds,
        obstacles=tuple(obstacles),
        object_shape=obj_shape,
        object_start=Pose2(sx, sy, st_),
        agent_radius=radius,
        agent_start=(axy[0], axy[1]),
        goal=GoalRegion(rect=rect, theta=theta, theta_tol=theta_tol),
    )


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_json(scene), indent=2) + "\n")


def load_scene(path: str | Path) -> Scene:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise SceneFormatError(f"cannot read scene file {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"scene file {path} is not valid JSON: {e}") from e
    return scene_from_json(data)


FIXTURE_NAMES = ("cage_small", "cage", "tunnel", "maze1", "narrowpass", "reroute")


def fixture_path(name: str) -> Path:
    p = resources.files("regrasp").joinpath("fixtures", f"{name}.json")
    return Path(str(p))


def load_fixture(name: str) -> Scene:
    if name not in FIXTURE_NAMES:
        raise SceneFormatError(f"unknown fixture {name!r}; choices: {', '.join(FIXTURE_NAMES)}")
    return load_scene(fixture_path(name))
