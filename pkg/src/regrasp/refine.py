"""Refinement loop: turn the regrasp map's guidance into an executable plan.

The loop keeps a queue of reached placements (object parked, agent detached).
Each round it selects the placement whose mapped grasp state is closest to the
goal, tries to finish directly (transit to an anchor, transfer into the goal
region), and if that fails executes one pick-and-place step toward the next
grasp state suggested by the map.  The outcome of every step feeds back into
the map: edge feasibilities are halved on failure and recover on success, and
goal distances are recomputed so the next selection sees the corrected costs.
Placements discovered along the way enter the queue with their plan fragment,
so the final plan is assembled by walking the parent chain.

Sub-problems are deterministic: from a fixed parked configuration the same
pick or carry query always returns the same answer, so repeating one is
provably futile.  The loop therefore memoizes per entry which step targets
and which pick grasps have failed, and keeps one global record of every
(placement pose, carried grasp) pair already banked, so a retried step
explores the next placement candidate instead of recreating a known state.

Termination is guaranteed even without the attempt budget: placements are
drawn from finite voxel lists, every successful step banks a new pose-grasp
pair, failed step targets are never retried by the same entry, and entries
whose forward options run out are dropped for good.  The budget (each goal
attempt and each pick-and-place step costs one) is the knob benchmarks
equalize across planners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2
from .grasp import GraspSet
from .motion import TransferPlanner, TransitPlanner, transfer_goal_pose, transfer_goal_region
from .plan import Plan, PlanBuilder
from .rmap import PHI_FLOOR, MapNode, RegraspMap, goal_node_ids, recompute_distances, wrap_angle
from .scene import Configuration, GoalRegion, Scene, goal_satisfied
from .world import World, anchor_world_xy, make_world


@dataclass(frozen=True)
class RefineConfig:
    """Knobs of the refinement loop.

    update_weights=False freezes the map (no feedback, no re-enabling of
    parked queue entries), which makes dead ends fail fast instead of being
    rerouted around.  constrain_grasp=False lets a pick use any grasp feasible
    in the current area rather than the one named by the map edge.
    """

    budget: int = 200
    update_weights: bool = True
    constrain_grasp: bool = True
    max_placements: int = 5

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.max_placements < 1:
            raise ValueError("need at least one placement candidate")


@dataclass(frozen=True)
class Attempt:
    """One logged sub-problem: what was tried from where, and how it ended.

    "exhausted" marks a step whose every remaining option was skipped as
    already banked or already known to fail, without any new motion query.
    """

    kind: str  # "goal" | "use_grasp" | "dead_end"
    node: int  # best mapped node at selection time, -1 if the pose is unmapped
    target: int  # target node of a pick-and-place step, else -1
    outcome: str  # "ok" | "fail" | "transit_fail" | "transfer_fail" | "exhausted" | "dropped"


@dataclass(frozen=True)
class RefineResult:
    plan: Plan | None
    status: str  # "success" | "queue_exhausted" | "budget_exceeded"
    attempts: int
    updates: int
    log: tuple[Attempt, ...] = ()


@dataclass
class QueueEntry:
    """A reached placement plus the fragment that produced it.

    disabled parks the entry after selection; a distance-changing weight
    update lifts that.  dropped is permanent (map dead end).  The failed_*
    sets memoize sub-problems that cannot succeed from this configuration:
    step targets whose pick-and-place failed, and grasps whose pick transit
    failed.  goal_tried records that the one-shot goal attempt ran (its
    outcome cannot change, so it never runs twice).
    """

    config: Configuration
    parent: "QueueEntry | None"
    fragment: Plan | None
    order: int
    area: int
    node_ids: tuple[int, ...]
    disabled: bool = False
    dropped: bool = False
    goal_tried: bool = False
    failed_targets: set[int] = field(default_factory=set)
    failed_grasps: set[int] = field(default_factory=set)


def _make_entry(
    rmap: RegraspMap,
    config: Configuration,
    parent: QueueEntry | None,
    fragment: Plan | None,
    order: int,
) -> QueueEntry:
    area = rmap.area_at(config.object_pose)
    ids = tuple(n.id for n in rmap.nodes_of_area(area)) if area >= 0 else ()
    return QueueEntry(
        config=config, parent=parent, fragment=fragment, order=order, area=area, node_ids=ids
    )


def _best_node(rmap: RegraspMap, entry: QueueEntry) -> int | None:
    """Mapped node of the entry with the smallest goal distance, or None."""
    if not entry.node_ids:
        return None
    return min(entry.node_ids, key=lambda i: (float(rmap.dist_to_goal[i]), i))


def select_node(queue: list[QueueEntry], rmap: RegraspMap) -> QueueEntry | None:
    """Pick the live entry whose best mapped node is closest to the goal.

    Ties go to the earlier-inserted entry.  The winner is parked (disabled)
    so the loop moves on until a weight update re-enables it.
    """
    best: QueueEntry | None = None
    best_key = (math.inf, math.inf)
    for e in queue:
        if e.disabled or e.dropped:
            continue
        node = _best_node(rmap, e)
        prio = float(rmap.dist_to_goal[node]) if node is not None else math.inf
        key = (prio, e.order)
        if best is None or key < best_key:
            best, best_key = e, key
    if best is not None:
        best.disabled = True
    return best


def next_state(rmap: RegraspMap, node_id: int) -> tuple[int, int] | None:
    """Map neighbor one edge away that minimizes edge weight + goal distance.

    Returns (edge id, neighbor node id), or None when every neighbor is
    unreachable from the goal: that is a dead end and the caller drops the
    queue entry.
    """
    best = None
    best_key = (math.inf, math.inf)
    for edge_id, other in rmap.adj[node_id]:
        d = float(rmap.dist_to_goal[other])
        if not math.isfinite(d):
            continue
        key = (rmap.weight(edge_id) + d, other)
        if key < best_key:
            best, best_key = (edge_id, other), key
    return best


def propose_step(
    rmap: RegraspMap,
    node_ids: tuple[int, ...],
    failed_targets: frozenset[int] | set[int] = frozenset(),
    failed_grasps: frozenset[int] | set[int] = frozenset(),
) -> tuple[int, int] | None:
    """Forward map step for a parked entry, or None when none is left.

    Candidate edges leave any node of the entry's area, must make progress
    toward the goal (a side or backward hop only becomes attractive after
    weight updates reroute the distances, not by local wandering), and skip
    targets and pick grasps this entry has already failed.  The cheapest
    candidate by edge weight plus remaining distance is then stretched along
    the goalward predecessor chain while the edges keep transporting with the
    same grip, so a run of transport hops collapses into one pick-and-carry.

    Returns (edge id of the first hop, node id of the final target).  The
    first hop is what the caller feeds back into the map on failure.
    """
    best = None
    best_key = (math.inf, math.inf)
    for nid in node_ids:
        here = float(rmap.dist_to_goal[nid])
        for edge_id, other in rmap.adj[nid]:
            if other in failed_targets or rmap.nodes[other].grasp in failed_grasps:
                continue
            d = float(rmap.dist_to_goal[other])
            if not math.isfinite(d) or d >= here:
                continue
            key = (rmap.weight(edge_id) + d, other)
            if key < best_key:
                best, best_key = (edge_id, other), key
    if best is None:
        return None
    edge_id, target = best
    while True:
        nxt = int(rmap.pred[target])
        if nxt < 0 or nxt in failed_targets:
            break
        link = next((e for e, o in rmap.adj[target] if o == nxt), None)
        if link is None or rmap.edges[link].regrasp:
            break
        if rmap.nodes[nxt].grasp != rmap.nodes[target].grasp:
            break
        target = nxt
    return edge_id, target


def solve_goal_attempt(
    config: Configuration,
    rmap: RegraspMap,
    grasps: GraspSet,
    goal: GoalRegion,
    transit: TransitPlanner,
    transfer: TransferPlanner,
) -> Plan | None:
    """Try to finish in one step: pick somewhere, carry into the goal region.

    Grasps feasible at the current pose are tried in order of their node's
    goal distance.  Returns the fragment of the first success, None if every
    grasp is blocked.
    """
    obj = config.object_pose
    area = rmap.area_at(obj)
    if area >= 0:
        sig = rmap.areas[area].signature
        cands = [g for g in range(grasps.k) if sig >> g & 1]
    else:
        cands = list(range(grasps.k))

    def key(g: int):
        nid = rmap.node_index.get((area, g))
        return (float(rmap.dist_to_goal[nid]) if nid is not None else math.inf, g)

    for g in sorted(cands, key=key):
        axy = anchor_world_xy(obj, grasps.anchors[g].rel_pose)
        walk = transit.path(config.agent, axy, obj)
        if walk is None:
            continue
        carry = transfer.path(g, obj, transfer_goal_region(goal))
        if carry is None:
            continue
        return PlanBuilder().add_transit(walk).add_transfer(g, carry).build()
    return None


def _pose_key(pose: Pose2, grasp: int) -> tuple[float, float, float, int]:
    """Identity of a banked state: where the object sits and how it was held.

    The carried grasp matters because it fixes where the agent detaches, and
    a different agent side can open routes the first visit could not.
    """
    return (round(pose.x, 6), round(pose.y, 6), round(pose.theta, 6), grasp)


def _placements(
    rmap: RegraspMap, target: MapNode, obj: Pose2, carried: int, rot_radius: float, cap: int
) -> list[Pose2]:
    """Up to cap placement poses in the target area, best first.

    Rank: feasibility of the carried grasp at the voxel, then how far the
    object has to move (rotation scaled by the compound radius), then the
    voxel's linear index to keep the order deterministic.
    """
    grid = rmap.grid
    phi_flat = rmap.grid.phi.reshape(grid.n_voxels, -1)
    scored = []
    for lin in rmap.areas[target.area].voxels:
        lin = int(lin)
        pose = grid.center_of(lin)
        move = math.hypot(pose.x - obj.x, pose.y - obj.y)
        move += abs(wrap_angle(pose.theta - obj.theta)) * rot_radius
        scored.append((-float(phi_flat[lin, carried]), move, lin, pose))
    scored.sort(key=lambda t: t[:3])
    return [t[3] for t in scored[:cap]]


def use_grasp(
    config: Configuration,
    rmap: RegraspMap,
    grasps: GraspSet,
    target: int,
    transit: TransitPlanner,
    transfer: TransferPlanner,
    constrain_grasp: bool = True,
    max_placements: int = 5,
    seen: set[tuple] | None = None,
    failed_grasps: set[int] | None = None,
) -> tuple[Plan | None, Configuration | None, str]:
    """One pick-and-place step toward the target node.

    Pick: transit the bare agent to the grasp anchor at the parked object.
    Place: carry the object to a voxel of the target area (same area means a
    change of grip, so the object stays exactly where it is).  Returns the
    fragment, the configuration after placing, and an outcome tag that keeps
    transit failures, transfer failures, and exhaustion apart.

    When seen is given, placements whose resulting state is already banked
    are skipped, so a retried step lands on the next candidate instead of
    duplicating an earlier one.  When failed_grasps is given, grasps whose
    pick already failed from this configuration are skipped up front and
    newly failing ones are recorded into the set.
    """
    node = rmap.nodes[target]
    obj = config.object_pose
    cur_area = rmap.area_at(obj)
    if constrain_grasp:
        options = [node.grasp]
    else:
        if cur_area >= 0:
            sig = rmap.areas[cur_area].signature
            options = [g for g in range(grasps.k) if sig >> g & 1]
        else:
            options = list(range(grasps.k))

        def key(g: int):
            nid = rmap.node_index.get((node.area, g))
            return (float(rmap.dist_to_goal[nid]) if nid is not None else math.inf, g)

        options.sort(key=key)
    if failed_grasps:
        options = [g for g in options if g not in failed_grasps]

    walk_failed = False
    tried_transfer = False
    for g in options:
        rel = grasps.anchors[g].rel_pose
        axy = anchor_world_xy(obj, rel)
        if node.area == cur_area and seen is not None and _pose_key(obj, g) in seen:
            continue
        walk = transit.path(config.agent, axy, obj)
        if walk is None:
            walk_failed = True
            if failed_grasps is not None:
                failed_grasps.add(g)
            continue
        if node.area == cur_area:
            if seen is not None:
                seen.add(_pose_key(obj, g))
            frag = PlanBuilder().add_transit(walk).add_transfer(g, (obj, obj)).build()
            return frag, Configuration(agent=axy, object_pose=obj, grasp=None), "ok"
        for pose in _placements(rmap, node, obj, g, transfer.rot_radius(g), max_placements):
            if seen is not None and _pose_key(pose, g) in seen:
                continue
            tried_transfer = True
            carry = transfer.path(g, obj, transfer_goal_pose(pose))
            if carry is None:
                continue
            if seen is not None:
                seen.add(_pose_key(pose, g))
            frag = PlanBuilder().add_transit(walk).add_transfer(g, carry).build()
            end = Configuration(agent=anchor_world_xy(pose, rel), object_pose=pose, grasp=None)
            return frag, end, "ok"
    if tried_transfer:
        return None, None, "transfer_fail"
    if walk_failed:
        return None, None, "transit_fail"
    return None, None, "exhausted"


def update_edge(rmap: RegraspMap, edge_id: int, succeeded: bool) -> bool:
    """Adjust the attempted edge's feasibilities and refresh goal distances.

    Failure halves both endpoint values (floored); success doubles them back,
    clamped at what the map originally measured for the endpoint areas.
    Returns whether any goal distance changed.
    """
    e = rmap.edges[edge_id]
    na, nb = rmap.nodes[e.a], rmap.nodes[e.b]
    orig_a = float(rmap.areas[na.area].phi_area[na.grasp])
    orig_b = float(rmap.areas[nb.area].phi_area[nb.grasp])
    if succeeded:
        e.phi_a = min(orig_a, 2.0 * e.phi_a)
        e.phi_b = min(orig_b, 2.0 * e.phi_b)
    else:
        e.phi_a = max(PHI_FLOOR, 0.5 * e.phi_a)
        e.phi_b = max(PHI_FLOOR, 0.5 * e.phi_b)
    old = rmap.dist_to_goal.copy()
    recompute_distances(rmap)
    return not np.array_equal(old, rmap.dist_to_goal)


def _assemble(entry: QueueEntry, final: Plan | None) -> Plan:
    fragments = []
    e: QueueEntry | None = entry
    while e is not None:
        if e.fragment is not None:
            fragments.append(e.fragment)
        e = e.parent
    fragments.reverse()
    builder = PlanBuilder()
    for frag in fragments:
        builder.extend(frag)
    if final is not None:
        builder.extend(final)
    return builder.build()


def refine(
    scene: Scene,
    rmap: RegraspMap,
    grasps: GraspSet,
    goal: GoalRegion | None = None,
    config: RefineConfig | None = None,
    world: World | None = None,
) -> RefineResult:
    """Run the refinement loop until the goal is placed or effort runs out."""
    cfg = config if config is not None else RefineConfig()
    goal = goal if goal is not None else scene.goal
    if world is None:
        world = make_world(scene)
    rmap.goal_nodes = goal_node_ids(rmap, goal)
    recompute_distances(rmap)
    if goal_satisfied(goal, scene.object_start):
        return RefineResult(plan=Plan(), status="success", attempts=0, updates=0)

    transit = TransitPlanner(world)
    transfer = TransferPlanner(
        world, grasps, n_theta=rmap.grid.n_theta, theta0=rmap.grid.theta0
    )
    queue = [_make_entry(rmap, scene.start_configuration(), None, None, 0)]
    seen: set[tuple] = set()
    log: list[Attempt] = []
    attempts = 0
    updates = 0

    while True:
        if not any(not e.disabled and not e.dropped for e in queue):
            return RefineResult(None, "queue_exhausted", attempts, updates, tuple(log))
        if attempts >= cfg.budget:
            return RefineResult(None, "budget_exceeded", attempts, updates, tuple(log))
        entry = select_node(queue, rmap)
        node = _best_node(rmap, entry)
        node_id = node if node is not None else -1

        if not entry.goal_tried:
            entry.goal_tried = True
            attempts += 1
            final = solve_goal_attempt(entry.config, rmap, grasps, goal, transit, transfer)
            if final is not None:
                log.append(Attempt("goal", node_id, -1, "ok"))
                plan = _assemble(entry, final)
                return RefineResult(plan, "success", attempts, updates, tuple(log))
            log.append(Attempt("goal", node_id, -1, "fail"))

        step = propose_step(
            rmap,
            entry.node_ids,
            entry.failed_targets,
            entry.failed_grasps if cfg.constrain_grasp else frozenset(),
        )
        if step is None:
            entry.dropped = True
            log.append(Attempt("dead_end", node_id, -1, "dropped"))
            continue
        edge_id, target = step

        if attempts >= cfg.budget:
            return RefineResult(None, "budget_exceeded", attempts, updates, tuple(log))
        attempts += 1
        frag, end, outcome = use_grasp(
            entry.config,
            rmap,
            grasps,
            target,
            transit,
            transfer,
            constrain_grasp=cfg.constrain_grasp,
            max_placements=cfg.max_placements,
            seen=seen,
            failed_grasps=entry.failed_grasps,
        )
        log.append(Attempt("use_grasp", node_id, target, outcome))
        if frag is not None:
            child = _make_entry(rmap, end, entry, frag, len(queue))
            if goal_satisfied(goal, end.object_pose):
                log.append(Attempt("goal", node_id, target, "ok"))
                return RefineResult(
                    _assemble(child, None), "success", attempts, updates, tuple(log)
                )
            queue.append(child)
        else:
            entry.failed_targets.add(target)
        if cfg.update_weights and outcome != "exhausted":
            updates += 1
            if update_edge(rmap, edge_id, frag is not None):
                for e in queue:
                    if e.disabled and not e.dropped:
                        e.disabled = False
