"""Procedural grid mazes whose walls force grasp changes.

Rooms sit on a square grid separated by thin walls, each wall carrying one
opening.  Openings come in two complementary families sized against the
agent and the carried object:

* vertical walls take an ``endgap``, tall enough for the agent riding beside
  the object (an end grasp) but too short for the agent stacked above or
  below it, so east-west crossings demand an end grasp;
* horizontal walls take a ``midgap``, wide enough for the object with the
  agent trailing behind its long side (a side grasp) but narrower than the
  object-plus-agent span of an end grasp, so north-south crossings demand a
  side grasp.

A route whose crossings alternate between the families cannot keep one
grasp, and the number of alternations is the regrasp depth the abstraction
reports.  Routes are carved as a random spanning tree plus optional extra
openings; both gap sizes pass the bare agent, so the free space stays fully
connected for transits.

One leaf room may be rebuilt into a decoy: its side walls get slots the
object can poke through but the agent can never pass, and its remaining
walls close.  Static grasp checks cannot tell that the room's interior is
unreachable, so maps happily route through it; only refinement discovers the
dead transits and has to reroute.  Decoys are what separate planners that
update edge weights from planners that trust the initial map.

Geometry here is deliberately quantized: the room pitch is a multiple of
0.18 so that gap centers land on map-voxel centers (0.09 grid) and within
half a motion cell (0.045 grid) of lattice rows, keeping every intended
crossing realizable and every forbidden one soundly blocked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import Box, Pose2, Rect
from .grasp import (
    FeasibilityParams,
    GraspAnchor,
    GraspSet,
    default_feasibility,
)
from .rmap import build_map, min_regrasp_depth
from .rng import derive_rng
from .scene import GoalRegion, Scene, validate_scene

__all__ = [
    "MazeParams",
    "contact_grasps",
    "maze_grasps",
    "generate_maze",
    "regrasp_depth",
    "stratify_by_regrasps",
]

# Motion lattice cell (world.DEFAULT_CELL) and the map voxel the depth probe
# uses; the pitch constraint below keys off these.
_CELL = 0.045
_VOXEL = 0.09


@dataclass(frozen=True)
class MazeParams:
    """Maze dimensions and carving probabilities.

    All lengths are meters.  Defaults describe the standard disc agent and
    stick object used across the bundled scenes.
    """

    cells: tuple[int, int] = (5, 4)
    pitch: float = 0.90
    wall_half: float = 0.02
    endgap: float = 0.21
    midgap: float = 0.44
    slot: float = 0.14
    agent_radius: float = 0.075
    stick_half_length: float = 0.18
    stick_half_width: float = 0.035
    p_end: float = 0.85
    p_mid: float = 0.85
    p_extra: float = 0.12
    p_decoy: float = 0.25
    min_separation: int = 4

    def __post_init__(self):
        nx, ny = self.cells
        if nx < 2 or ny < 2:
            raise ValueError("maze needs at least 2x2 rooms")
        if self.min_separation < 1 or self.min_separation > (nx - 1) + (ny - 1):
            raise ValueError("min_separation exceeds the grid diameter")
        if self.pitch <= 0 or abs(self.pitch / (2 * _VOXEL) - round(self.pitch / (2 * _VOXEL))) > 1e-9:
            raise ValueError("pitch must be a positive multiple of 0.18")
        if self.wall_half <= 0:
            raise ValueError("walls need positive thickness")
        for p in (self.p_end, self.p_mid, self.p_extra, self.p_decoy):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        r, hl, hw = self.agent_radius, self.stick_half_length, self.stick_half_width
        if r <= 0 or hl <= 0 or hw <= 0 or hw > hl:
            raise ValueError("degenerate agent or object dimensions")
        reach = hl + 2 * r  # object end plus the touching agent
        interior = 0.5 * self.pitch - self.wall_half
        if interior < reach + 0.06:
            raise ValueError("rooms too small: grasps would scrape the walls")
        # endgap: agent-beside compound passes with half a motion cell to
        # spare, agent-above compound stays out
        if self.endgap < 2 * r + _CELL + 0.01:
            raise ValueError("endgap too tight for an end-grasp crossing")
        if self.endgap > 2 * (hw + 2 * r) - 0.005:
            raise ValueError("endgap fails to block side-grasp crossings")
        # midgap: object passes lengthwise with margin, end-grasp span does not
        if self.midgap < 2 * hl + _CELL + 0.01:
            raise ValueError("midgap too tight for a side-grasp crossing")
        if self.midgap > 2 * hl + 2 * r - 0.02:
            raise ValueError("midgap fails to block end-grasp crossings")
        # slot: object pokes through, agent never passes
        if self.slot < 2 * hw + _CELL + 0.005:
            raise ValueError("slot too tight for the object to poke through")
        if self.slot > 2 * r - 0.005:
            raise ValueError("slot fails to block the agent")
        gap = max(self.endgap, self.midgap, self.slot)
        if self._align() - 0.5 * gap + self.wall_half <= 0:
            raise ValueError("gap too long for the wall segment")

    def _align(self) -> float:
        """In-room offset of gap centers and placements from the room corner.

        Half a pitch shifted down one half voxel, which is simultaneously a
        map-voxel center and half a motion cell away from lattice rows.
        """
        return 0.5 * self.pitch - 0.5 * _VOXEL

    def room_center(self, i: int, j: int) -> tuple[float, float]:
        a = self._align()
        return i * self.pitch + a, j * self.pitch + a


def contact_grasps(shape: Box, agent_radius: float) -> GraspSet:
    """Four touching anchors on a box: both ends and both long sides."""
    side = shape.half_w + agent_radius
    vert = shape.half_h + agent_radius
    anchors = (
        GraspAnchor(0, Pose2(-side, 0.0, 0.0)),
        GraspAnchor(1, Pose2(side, 0.0, math.pi)),
        GraspAnchor(2, Pose2(0.0, vert, -0.5 * math.pi)),
        GraspAnchor(3, Pose2(0.0, -vert, 0.5 * math.pi)),
    )
    return GraspSet(agent_radius=agent_radius, object_shape=shape, anchors=anchors)


def maze_grasps(params: MazeParams | None = None) -> GraspSet:
    params = params if params is not None else MazeParams()
    shape = Box(params.stick_half_length, params.stick_half_width)
    return contact_grasps(shape, params.agent_radius)


# ---------------------------------------------------------------------------
# Carving


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def _wall_boxes(params: MazeParams, vertical: bool, plane: float,
                lo: float, hi: float, kind: str) -> list[tuple[Box, Pose2]]:
    """Obstacle boxes for one wall segment with its opening carved out.

    Segments overhang by wall_half at both ends so that crossing walls seal
    their shared corners.
    """
    h = params.wall_half
    if kind == "wide":
        return []
    if kind == "closed":
        spans = [(lo - h, hi + h)]
    else:
        gap = {"endgap": params.endgap, "midgap": params.midgap,
               "slot": params.slot}[kind]
        c = lo + params._align()
        spans = [(lo - h, c - 0.5 * gap), (c + 0.5 * gap, hi + h)]
    boxes = []
    for a, b in spans:
        if b - a <= 1e-9:
            continue
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        if vertical:
            boxes.append((Box(h, half), Pose2(plane, mid, 0.0)))
        else:
            boxes.append((Box(half, h), Pose2(mid, plane, 0.0)))
    return boxes


def _tree_distance(adj: dict[int, set[int]], a: int, b: int) -> int:
    """Hop count between two cells in the carved graph (BFS; -1 unreachable)."""
    if a == b:
        return 0
    seen = {a}
    frontier = [a]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in adj.get(u, ()):
                if v == b:
                    return d
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return -1


def generate_maze(seed: int, params: MazeParams | None = None) -> Scene:
    """Deterministic maze scene for a seed.

    The same seed and params always produce the same scene.  Carving is a
    shuffled-Kruskal spanning tree over the room grid; tree walls open with
    the family-specific gap or fully, a few extra walls open to add cycles,
    and at most one leaf room becomes a sealed decoy.
    """
    params = params if params is not None else MazeParams()
    rng = derive_rng(seed, 0x4D5A)
    nx, ny = params.cells
    P = params.pitch

    def cid(i: int, j: int) -> int:
        return j * nx + i

    # walls[(i, j, 'v'|'h')] = opening kind; 'v' is the wall east of room
    # (i, j), 'h' the wall north of it.
    walls: dict[tuple[int, int, str], str] = {}
    edges = []
    for j in range(ny):
        for i in range(nx):
            if i + 1 < nx:
                edges.append((i, j, "v"))
            if j + 1 < ny:
                edges.append((i, j, "h"))
    for e in edges:
        walls[e] = "closed"

    def endpoints(e):
        i, j, o = e
        return (cid(i, j), cid(i + 1, j)) if o == "v" else (cid(i, j), cid(i, j + 1))

    def opening_for(o: str) -> str:
        if o == "v":
            return "endgap" if rng.random() < params.p_end else "wide"
        return "midgap" if rng.random() < params.p_mid else "wide"

    uf = _UnionFind(nx * ny)
    adj: dict[int, set[int]] = {c: set() for c in range(nx * ny)}
    degree = [0] * (nx * ny)
    order = rng.permutation(len(edges))
    for idx in order:
        e = edges[int(idx)]
        u, v = endpoints(e)
        if uf.union(u, v):
            walls[e] = opening_for(e[2])
            adj[u].add(v)
            adj[v].add(u)
            degree[u] += 1
            degree[v] += 1
    for e in edges:
        if walls[e] == "closed" and rng.random() < params.p_extra:
            walls[e] = opening_for(e[2])
            u, v = endpoints(e)
            adj[u].add(v)
            adj[v].add(u)
            degree[u] += 1
            degree[v] += 1

    # Decoy: a tree leaf with east and west neighbors becomes a sealed room
    # bridging them through two slots.  Prefer the pair whose carved route is
    # longest, since that is the shortcut maps will chase.
    decoy: int | None = None
    if rng.random() < params.p_decoy:
        best = None
        for j in range(ny):
            for i in range(1, nx - 1):
                c = cid(i, j)
                if degree[c] != 1:
                    continue
                u, w = cid(i - 1, j), cid(i + 1, j)
                trimmed = {k: set(vs) for k, vs in adj.items()}
                for v in trimmed.pop(c, ()):  # noqa: B909 - copy
                    trimmed[v].discard(c)
                d = _tree_distance(trimmed, u, w)
                if d >= 4 and (best is None or d > best[0]):
                    best = (d, i, j)
        if best is not None:
            _, i, j = best
            decoy = cid(i, j)
            walls[(i - 1, j, "v")] = "slot"
            walls[(i, j, "v")] = "slot"
            if j > 0:
                walls[(i, j - 1, "h")] = "closed"
            if j + 1 < ny:
                walls[(i, j, "h")] = "closed"
            for v in adj.pop(decoy, set()):
                adj[v].discard(decoy)

    # Start and goal rooms among the connected non-decoy cells.
    open_cells = [c for c in range(nx * ny) if c != decoy]
    manhattan = lambda a, b: abs(a % nx - b % nx) + abs(a // nx - b // nx)
    start_cell = int(open_cells[int(rng.integers(len(open_cells)))])
    far = [c for c in open_cells
           if c != start_cell and manhattan(start_cell, c) >= params.min_separation]
    if not far:
        far = [c for c in open_cells if c != start_cell]
    goal_cell = int(far[int(rng.integers(len(far)))])

    obstacles: list[tuple[Box, Pose2]] = []
    for (i, j, o), kind in sorted(walls.items()):
        if o == "v":
            obstacles.extend(_wall_boxes(
                params, True, (i + 1) * P, j * P, (j + 1) * P, kind))
        else:
            obstacles.extend(_wall_boxes(
                params, False, (j + 1) * P, i * P, (i + 1) * P, kind))

    sx, sy = params.room_center(start_cell % nx, start_cell // nx)
    gx, gy = params.room_center(goal_cell % nx, goal_cell // nx)
    reach = 2 * params.stick_half_length
    scene = Scene(
        name=f"maze-{seed}",
        bounds=Rect(0.0, 0.0, nx * P, ny * P),
        obstacles=tuple(obstacles),
        object_shape=Box(params.stick_half_length, params.stick_half_width),
        object_start=Pose2(sx, sy, 0.0),
        agent_radius=params.agent_radius,
        agent_start=(sx, sy + 6 * _CELL),
        goal=GoalRegion(Rect(gx - 0.5 * reach, gy - 0.5 * reach,
                             gx + 0.5 * reach, gy + 0.5 * reach)),
    )
    validate_scene(scene)
    return scene


# ---------------------------------------------------------------------------
# Stratification


def regrasp_depth(
    scene: Scene,
    grasps: GraspSet | None = None,
    v: float = _VOXEL,
    params: FeasibilityParams | None = None,
    goal: GoalRegion | None = None,
) -> int | None:
    """Fewest regrasps on any abstract route of the scene's map, None if none.

    The default grasp set is the four contact anchors of the scene's box
    object, matching what generate_maze scenes are built for.
    """
    if grasps is None:
        if not isinstance(scene.object_shape, Box):
            raise ValueError("default grasps need a box object; pass grasps")
        grasps = contact_grasps(scene.object_shape, scene.agent_radius)
    if params is None:
        params = default_feasibility(scene.agent_radius)
    rmap = build_map(scene, grasps, v, params)
    return min_regrasp_depth(rmap, scene, goal)


def stratify_by_regrasps(scenes, depth=None, **kwargs) -> dict[int | None, list[Scene]]:
    """Bucket scenes by regrasp depth; unroutable scenes land under None.

    ``depth`` is any callable mapping a scene (plus ``kwargs``) to a depth,
    defaulting to regrasp_depth.  Buckets preserve input order.
    """
    measure = depth if depth is not None else regrasp_depth
    buckets: dict[int | None, list[Scene]] = {}
    for scene in scenes:
        buckets.setdefault(measure(scene, **kwargs), []).append(scene)
    return buckets
