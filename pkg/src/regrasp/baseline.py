"""Comparison planners that search forward over random intermediate placements.

Both grow a tree of reached placements.  Each iteration draws a collision-free
object subgoal, extends the nearest tree node toward it with a pick-and-carry
using whatever grasp works, and succeeds once a tree node lands in the goal
region.  Neither planner knows anything about the regrasp map; the heuristic
variant only filters samples by straight-line visibility and by having at
least one usable grasp.  Budget counts extension attempts, the same unit the
map-guided refiner charges per step, so head-to-head runs spend comparable
solver effort.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2
from .grasp import FeasibilityParams, GraspSet, default_feasibility, signature
from .motion import TransferPlanner, TransitPlanner, transfer_goal_pose, wrap_angle
from .plan import Plan, PlanBuilder
from .rng import derive_rng
from .scene import Configuration, GoalRegion, Scene, goal_satisfied
from .world import World, anchor_world_xy, make_world

# rejection-sampling cap per extension attempt; a draw is cheap next to a
# lattice search, so this only guards scenes where almost nothing is valid
MAX_DRAWS = 64


@dataclass(frozen=True)
class SubgoalSample:
    """A subgoal that survived filtering and got an extension attempt."""

    pose: Pose2
    grasp: int | None  # grasp the successful extension used, None if it failed
    provenance: str  # "random" | "visibility-filtered"
    seen_from: tuple[float, float]  # object position of the node extended from


@dataclass(frozen=True)
class BaselineResult:
    plan: Plan | None
    status: str  # "success" | "budget_exceeded"
    attempts: int
    samples: int
    subgoals: tuple[SubgoalSample, ...] = ()


@dataclass
class _TreeNode:
    config: Configuration
    parent: int | None
    fragment: Plan | None


def segment_visible(world: World, a: tuple[float, float], b: tuple[float, float]) -> bool:
    """True when the straight segment from a to b keeps agent-radius clearance."""
    ax, ay = a
    bx, by = b
    length = math.hypot(bx - ax, by - ay)
    n = max(2, int(math.ceil(length / (world.esdf.cell * 0.5))) + 1)
    ts = np.linspace(0.0, 1.0, n)
    pts = np.column_stack((ax + ts * (bx - ax), ay + ts * (by - ay)))
    return bool(np.all(world.agent_free_many(pts)))


def _sample_pose(rng: np.random.Generator, world: World, n_theta: int, theta0: float) -> Pose2:
    b = world.bounds
    x = rng.uniform(b.xmin, b.xmax)
    y = rng.uniform(b.ymin, b.ymax)
    theta = theta0 + (2.0 * math.pi / n_theta) * rng.integers(n_theta)
    return Pose2(x, y, wrap_angle(theta))


def _nearest(nodes: list[_TreeNode], target: Pose2, rot_radius: float) -> int:
    def gap(node: _TreeNode) -> float:
        p = node.config.object_pose
        return math.hypot(target.x - p.x, target.y - p.y) + abs(
            wrap_angle(target.theta - p.theta)
        ) * rot_radius

    return min(range(len(nodes)), key=lambda i: (gap(nodes[i]), i))


def _extend(
    node: _TreeNode,
    subgoal: Pose2,
    rng: np.random.Generator,
    grasps: GraspSet,
    world: World,
    params: FeasibilityParams,
    transit: TransitPlanner,
    transfer: TransferPlanner,
) -> tuple[Plan | None, Configuration | None, int | None]:
    """One pick-and-carry try from a tree node to the subgoal pose."""
    obj = node.config.object_pose
    sig = signature(obj, grasps, world, params)
    options = [g for g in range(grasps.k) if sig.has(g)]
    rng.shuffle(options)
    for g in options:
        rel = grasps.anchors[g].rel_pose
        walk = transit.path(node.config.agent, anchor_world_xy(obj, rel), obj)
        if walk is None:
            continue
        carry = transfer.path(g, obj, transfer_goal_pose(subgoal))
        if carry is None:
            continue
        frag = PlanBuilder().add_transit(walk).add_transfer(g, carry).build()
        end = Configuration(
            agent=anchor_world_xy(subgoal, rel), object_pose=subgoal, grasp=None
        )
        return frag, end, g
    return None, None, None


def _assemble(nodes: list[_TreeNode], leaf: int) -> Plan:
    chain = []
    at: int | None = leaf
    while at is not None:
        node = nodes[at]
        if node.fragment is not None:
            chain.append(node.fragment)
        at = node.parent
    builder = PlanBuilder()
    for frag in reversed(chain):
        builder.extend(frag)
    return builder.build()


def _plan_random(
    scene: Scene,
    grasps: GraspSet,
    budget: int,
    seed: int,
    filtered: bool,
    goal: GoalRegion | None,
    n_theta: int,
    params: FeasibilityParams | None,
    world: World | None,
) -> BaselineResult:
    if budget <= 0:
        raise ValueError("budget must be positive")
    goal = goal if goal is not None else scene.goal
    if world is None:
        world = make_world(scene)
    if params is None:
        params = default_feasibility(scene.agent_radius)
    if goal_satisfied(goal, scene.object_start):
        return BaselineResult(plan=Plan(), status="success", attempts=0, samples=0)

    rng = derive_rng(seed, 0x5D)
    theta0 = scene.object_start.theta
    transit = TransitPlanner(world)
    transfer = TransferPlanner(world, grasps, n_theta=n_theta, theta0=theta0)
    rot_radius = scene.object_shape.circumradius
    gx = 0.5 * (goal.rect.xmin + goal.rect.xmax)
    gy = 0.5 * (goal.rect.ymin + goal.rect.ymax)
    provenance = "visibility-filtered" if filtered else "random"

    nodes = [_TreeNode(config=scene.start_configuration(), parent=None, fragment=None)]
    samples = 0
    accepted: list[SubgoalSample] = []
    for attempt in range(1, budget + 1):
        subgoal = None
        near = None
        for _ in range(MAX_DRAWS):
            cand = _sample_pose(rng, world, n_theta, theta0)
            samples += 1
            if not world.object_free(cand):
                continue
            near = _nearest(nodes, cand, rot_radius)
            if filtered:
                if not signature(cand, grasps, world, params).bits:
                    continue
                here = nodes[near].config.object_pose
                if not (
                    segment_visible(world, (cand.x, cand.y), (here.x, here.y))
                    or segment_visible(world, (cand.x, cand.y), (gx, gy))
                ):
                    continue
            subgoal = cand
            break
        if subgoal is None:
            continue  # the attempt is spent even when no draw qualified
        here = nodes[near].config.object_pose
        frag, end, used = _extend(
            nodes[near], subgoal, rng, grasps, world, params, transit, transfer
        )
        accepted.append(
            SubgoalSample(
                pose=subgoal, grasp=used, provenance=provenance, seen_from=(here.x, here.y)
            )
        )
        if frag is None:
            continue
        nodes.append(_TreeNode(config=end, parent=near, fragment=frag))
        if goal_satisfied(goal, end.object_pose):
            return BaselineResult(
                plan=_assemble(nodes, len(nodes) - 1),
                status="success",
                attempts=attempt,
                samples=samples,
                subgoals=tuple(accepted),
            )
    return BaselineResult(
        plan=None,
        status="budget_exceeded",
        attempts=budget,
        samples=samples,
        subgoals=tuple(accepted),
    )


def plan_rnd(
    scene: Scene,
    grasps: GraspSet,
    budget: int = 200,
    seed: int = 0,
    goal: GoalRegion | None = None,
    n_theta: int = 1,
    params: FeasibilityParams | None = None,
    world: World | None = None,
) -> BaselineResult:
    """Forward tree over uniform random placements, no goal bias at all."""
    return _plan_random(scene, grasps, budget, seed, False, goal, n_theta, params, world)


def plan_rndh(
    scene: Scene,
    grasps: GraspSet,
    budget: int = 200,
    seed: int = 0,
    goal: GoalRegion | None = None,
    n_theta: int = 1,
    params: FeasibilityParams | None = None,
    world: World | None = None,
) -> BaselineResult:
    """Like plan_rnd, but a sample must be straight-line visible from the
    extension node's object position or from the goal center, and must admit
    at least one grasp where it lands."""
    return _plan_random(scene, grasps, budget, seed, True, goal, n_theta, params, world)
