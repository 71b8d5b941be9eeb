"""Plan representation: alternating transit/transfer phases with pick/place
switches, plus serialization and an exact replay validator.

A plan is the refined output of the planner.  Transit phases move the bare
agent along a polyline while the object stays parked; transfer phases move
the object (with the agent attached at a grasp anchor) along a pose polyline.
The k-th transfer is bracketed by switches[2k] (a Pick with the same grasp)
and switches[2k+1] (a Place at its final pose).  An empty plan is valid and
means the object already satisfied the goal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CONTACT_TOL, Pose2
from .grasp import GraspSet
from .motion import compound_rot_radius
from .scene import GoalRegion, Scene, goal_satisfied
from .world import World, make_world


class PlanFormatError(Exception):
    pass


@dataclass(frozen=True)
class TransitPhase:
    path: tuple[tuple[float, float], ...]

    def length(self) -> float:
        return sum(
            math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(self.path, self.path[1:])
        )


@dataclass(frozen=True)
class TransferPhase:
    grasp: int
    poses: tuple[Pose2, ...]

    def length(self) -> float:
        return sum(
            math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(self.poses, self.poses[1:])
        )


@dataclass(frozen=True)
class Pick:
    grasp: int
    object_pose: Pose2


@dataclass(frozen=True)
class Place:
    object_pose: Pose2


@dataclass(frozen=True)
class Plan:
    phases: tuple = ()
    switches: tuple = ()

    @property
    def transfers(self) -> tuple[TransferPhase, ...]:
        return tuple(p for p in self.phases if isinstance(p, TransferPhase))

    @property
    def picks(self) -> int:
        return sum(1 for s in self.switches if isinstance(s, Pick))

    @property
    def regrasps(self) -> int:
        return max(0, self.picks - 1)

    @property
    def cost(self) -> float:
        return sum(p.length() for p in self.phases)

    def terminal_object_pose(self, start: Pose2) -> Pose2:
        pose = start
        for p in self.phases:
            if isinstance(p, TransferPhase):
                pose = p.poses[-1]
        return pose


class PlanBuilder:
    """Accumulates fragments in execution order, enforcing alternation."""

    def __init__(self):
        self._phases: list = []
        self._switches: list = []

    def add_transit(self, path) -> "PlanBuilder":
        pts = tuple((float(p[0]), float(p[1])) for p in path)
        if self._phases and isinstance(self._phases[-1], TransitPhase):
            # merge back-to-back transits (fragment seams)
            prev = self._phases.pop()
            pts = prev.path + pts[1:]
        self._phases.append(TransitPhase(path=pts))
        return self

    def add_transfer(self, grasp: int, poses) -> "PlanBuilder":
        poses = tuple(poses)
        if not self._phases or not isinstance(self._phases[-1], TransitPhase):
            raise ValueError("transfer must follow a transit phase")
        self._switches.append(Pick(grasp=grasp, object_pose=poses[0]))
        self._phases.append(TransferPhase(grasp=grasp, poses=poses))
        self._switches.append(Place(object_pose=poses[-1]))
        return self

    def extend(self, other: Plan) -> "PlanBuilder":
        for phase in other.phases:
            if isinstance(phase, TransitPhase):
                self.add_transit(phase.path)
            else:
                self.add_transfer(phase.grasp, phase.poses)
        return self

    def build(self) -> Plan:
        return Plan(phases=tuple(self._phases), switches=tuple(self._switches))


# ---------------------------------------------------------------------------
# Validation


def _close(a, b, tol=1e-6):
    return abs(a - b) <= tol


def _pose_close(a: Pose2, b: Pose2, tol=1e-6):
    dth = (a.theta - b.theta + math.pi) % (2 * math.pi) - math.pi
    return _close(a.x, b.x, tol) and _close(a.y, b.y, tol) and abs(dth) <= tol


def validate_plan(
    plan: Plan,
    scene: Scene,
    grasps: GraspSet,
    goal: GoalRegion | None = None,
    world: World | None = None,
    step: float | None = None,
) -> list[str]:
    """Replay the plan against the scene; returns human-readable violations.

    Collision checks sample every movement at quarter-cell spacing (or the
    given step) with the exact predicates, independent of how the plan was
    found.  An empty return value means the plan is valid.
    """
    if world is None:
        world = make_world(scene)
    if step is None:
        step = world.esdf.cell / 4.0
    goal = goal if goal is not None else scene.goal
    errs: list[str] = []

    transfers = [p for p in plan.phases if isinstance(p, TransferPhase)]
    for i, phase in enumerate(plan.phases):
        want_transit = i % 2 == 0
        if want_transit != isinstance(phase, TransitPhase):
            errs.append(f"phase {i}: expected {'transit' if want_transit else 'transfer'}")
    if len(plan.switches) != 2 * len(transfers):
        errs.append("switch count does not bracket every transfer")
    for k, t in enumerate(transfers):
        if 2 * k + 1 < len(plan.switches):
            pick, place = plan.switches[2 * k], plan.switches[2 * k + 1]
            if not isinstance(pick, Pick) or not isinstance(place, Place):
                errs.append(f"transfer {k}: switches out of order")
                continue
            if pick.grasp != t.grasp:
                errs.append(f"transfer {k}: pick grasp {pick.grasp} != {t.grasp}")
            if not _pose_close(pick.object_pose, t.poses[0]):
                errs.append(f"transfer {k}: pick pose mismatch")
            if not _pose_close(place.object_pose, t.poses[-1]):
                errs.append(f"transfer {k}: place pose mismatch")
    if errs:
        return errs

    agent = np.array(scene.agent_start, dtype=float)
    obj = scene.object_start
    r = scene.agent_radius

    for i, phase in enumerate(plan.phases):
        if isinstance(phase, TransitPhase):
            path = phase.path
            if not path:
                errs.append(f"phase {i}: empty transit")
                break
            if not (_close(path[0][0], agent[0]) and _close(path[0][1], agent[1])):
                errs.append(f"phase {i}: transit starts away from the agent")
            for a, b in zip(path, path[1:]):
                seg = math.hypot(b[0] - a[0], b[1] - a[1])
                n = max(2, int(math.ceil(seg / step)) + 1)
                ts = np.linspace(0.0, 1.0, n)
                pts = np.outer(1 - ts, a) + np.outer(ts, b)
                if not np.all(world.agent_free_many(pts)):
                    errs.append(f"phase {i}: transit collides with the scene")
                    break
                if np.any(world.agent_object_gap(pts, obj) < -CONTACT_TOL):
                    errs.append(f"phase {i}: transit pushes into the object")
                    break
            agent = np.array(path[-1], dtype=float)
        else:
            anchor = grasps.anchors[phase.grasp].rel_pose
            want = phase.poses[0].compose(anchor)
            if not (_close(want.x, agent[0]) and _close(want.y, agent[1])):
                errs.append(f"phase {i}: pick without the agent at the anchor")
            if not _pose_close(phase.poses[0], obj):
                errs.append(f"phase {i}: transfer starts away from the object")
            rot_r = compound_rot_radius(world.scene.object_shape, anchor, r)
            for a, b in zip(phase.poses, phase.poses[1:]):
                dth = (b.theta - a.theta + math.pi) % (2 * math.pi) - math.pi
                arc = math.hypot(b.x - a.x, b.y - a.y) + abs(dth) * rot_r
                n = max(2, int(math.ceil(arc / step)) + 1)
                bad = False
                for t in np.linspace(0.0, 1.0, n):
                    pose = Pose2(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.theta + t * dth)
                    if not world.object_free(pose):
                        errs.append(f"phase {i}: transfer drives the object into the scene")
                        bad = True
                        break
                    w = pose.compose(anchor)
                    if not world.agent_free(w.x, w.y):
                        errs.append(f"phase {i}: transfer drives the agent into the scene")
                        bad = True
                        break
                if bad:
                    break
            obj = phase.poses[-1]
            w = obj.compose(anchor)
            agent = np.array([w.x, w.y])
        if errs:
            break

    if not errs and not goal_satisfied(goal, obj):
        errs.append("terminal object pose misses the goal")
    return errs


# ---------------------------------------------------------------------------
# Serialization


def plan_to_json(plan: Plan) -> dict:
    phases = []
    for p in plan.phases:
        if isinstance(p, TransitPhase):
            phases.append({"kind": "transit", "path": [[x, y] for x, y in p.path]})
        else:
            phases.append(
                {
                    "kind": "transfer",
                    "grasp": p.grasp,
                    "poses": [[q.x, q.y, q.theta] for q in p.poses],
                }
            )
    switches = []
    for s in plan.switches:
        if isinstance(s, Pick):
            switches.append(
                {
                    "kind": "pick",
                    "grasp": s.grasp,
                    "pose": [s.object_pose.x, s.object_pose.y, s.object_pose.theta],
                }
            )
        else:
            switches.append(
                {"kind": "place", "pose": [s.object_pose.x, s.object_pose.y, s.object_pose.theta]}
            )
    return {
        "version": 1,
        "phases": phases,
        "switches": switches,
        "cost": plan.cost,
        "regrasps": plan.regrasps,
    }


def _pose_from(v, ctx: str) -> Pose2:
    if not (isinstance(v, list) and len(v) == 3):
        raise PlanFormatError(f"{ctx}: expected [x, y, theta]")
    try:
        return Pose2(float(v[0]), float(v[1]), float(v[2]))
    except (TypeError, ValueError) as e:
        raise PlanFormatError(f"{ctx}: {e}") from e


def plan_from_json(data: dict) -> Plan:
    if not isinstance(data, dict):
        raise PlanFormatError("plan document must be an object")
    if data.get("version") != 1:
        raise PlanFormatError(f"unsupported plan version {data.get('version')!r}")
    phases = []
    for i, p in enumerate(data.get("phases", ())):
        kind = p.get("kind") if isinstance(p, dict) else None
        if kind == "transit":
            pts = p.get("path")
            if not isinstance(pts, list) or any(len(q) != 2 for q in pts):
                raise PlanFormatError(f"phases[{i}].path: expected [x, y] pairs")
            phases.append(TransitPhase(path=tuple((float(x), float(y)) for x, y in pts)))
        elif kind == "transfer":
            poses = p.get("poses")
            if not isinstance(poses, list) or not poses:
                raise PlanFormatError(f"phases[{i}].poses: expected a pose list")
            phases.append(
                TransferPhase(
                    grasp=int(p["grasp"]),
                    poses=tuple(_pose_from(q, f"phases[{i}].poses") for q in poses),
                )
            )
        else:
            raise PlanFormatError(f"phases[{i}]: unknown phase kind {kind!r}")
    switches = []
    for i, s in enumerate(data.get("switches", ())):
        kind = s.get("kind") if isinstance(s, dict) else None
        if kind == "pick":
            switches.append(
                Pick(grasp=int(s["grasp"]), object_pose=_pose_from(s["pose"], f"switches[{i}]"))
            )
        elif kind == "place":
            switches.append(Place(object_pose=_pose_from(s["pose"], f"switches[{i}]")))
        else:
            raise PlanFormatError(f"switches[{i}]: unknown switch kind {kind!r}")
    return Plan(phases=tuple(phases), switches=tuple(switches))
