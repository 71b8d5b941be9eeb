"""Regrasp map: signatures on a pose lattice, area segmentation, grasp-state graph.

The object configuration space is discretized into voxels (x, y, theta).  Each
free voxel gets a per-grasp feasibility vector and the thresholded bit
signature; adjacent voxels with identical signatures merge into areas.  Nodes
of the map are (area, grasp) pairs, connected by regrasp edges (same area,
different grasp) and transport edges (same grasp, adjacent areas).  Shortest
paths to the goal are computed with Dijkstra and cached on the map, and the
resolution loop retries with halved voxel size until a path shows up or the
lattice is as fine as allowed.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2
from .grasp import FeasibilityParams, GraspSet, signature
from .scene import GoalRegion, Scene, goal_satisfied
from .world import World, make_world

EPS_W = 1e-9
PHI_FLOOR = 2.0 * EPS_W


def wrap_angle(t: float) -> float:
    return (t + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class VoxelGrid:
    """Dense lattice over object poses.

    Orientation bins partition [-pi, pi) evenly and are anchored so the
    scene's start orientation is exactly a bin center.  With n_theta == 1 the
    object never rotates.
    """

    xmin: float
    ymin: float
    v: float
    nx: int
    ny: int
    n_theta: int
    theta0: float
    signature: np.ndarray = field(repr=False)  # (nx, ny, nt) int64
    occupied: np.ndarray = field(repr=False)  # (nx, ny, nt) bool
    phi: np.ndarray = field(repr=False)  # (nx, ny, nt, K) float64

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.n_theta

    @property
    def theta_step(self) -> float:
        return 2.0 * math.pi / self.n_theta

    def linear(self, ix: int, iy: int, it: int) -> int:
        return (ix * self.ny + iy) * self.n_theta + it

    def unravel(self, lin: int) -> tuple[int, int, int]:
        it = lin % self.n_theta
        rest = lin // self.n_theta
        return rest // self.ny, rest % self.ny, it

    def center(self, ix: int, iy: int, it: int) -> Pose2:
        return Pose2(
            self.xmin + (ix + 0.5) * self.v,
            self.ymin + (iy + 0.5) * self.v,
            wrap_angle(self.theta0 + it * self.theta_step),
        )

    def center_of(self, lin: int) -> Pose2:
        return self.center(*self.unravel(lin))

    def index(self, pose: Pose2) -> tuple[int, int, int]:
        ix = int(math.floor((pose.x - self.xmin) / self.v))
        iy = int(math.floor((pose.y - self.ymin) / self.v))
        if not (0 <= ix < self.nx and 0 <= iy < self.ny):
            raise ValueError(f"pose ({pose.x:.3f}, {pose.y:.3f}) outside the voxel grid")
        it = int(round((pose.theta - self.theta0) / self.theta_step)) % self.n_theta
        return ix, iy, it

    def theta_index(self, theta: float) -> int:
        return int(round((theta - self.theta0) / self.theta_step)) % self.n_theta

    def neighbors(self, ix: int, iy: int, it: int):
        if ix > 0:
            yield ix - 1, iy, it
        if ix + 1 < self.nx:
            yield ix + 1, iy, it
        if iy > 0:
            yield ix, iy - 1, it
        if iy + 1 < self.ny:
            yield ix, iy + 1, it
        if self.n_theta == 2:
            yield ix, iy, 1 - it
        elif self.n_theta > 2:
            yield ix, iy, (it - 1) % self.n_theta
            yield ix, iy, (it + 1) % self.n_theta


@dataclass(frozen=True)
class Area:
    """Connected voxel patch with one shared signature."""

    id: int
    voxels: np.ndarray = field(repr=False)  # sorted linear indices
    signature: int
    phi_area: np.ndarray = field(repr=False)  # per-grasp min over member voxels

    @property
    def size(self) -> int:
        return int(self.voxels.size)


@dataclass(frozen=True)
class MapNode:
    id: int
    area: int
    grasp: int


@dataclass
class MapEdge:
    """Undirected edge; phi values start at the endpoint area aggregates and
    drift as the refinement loop reports successes and failures."""

    a: int
    b: int
    phi_a: float
    phi_b: float
    regrasp: bool


def edge_weight(phi_a: float, phi_b: float, eps_w: float = EPS_W) -> float:
    m = min(phi_a, phi_b)
    if m <= eps_w:
        raise ValueError(f"feasibility {m} not above eps_w={eps_w}; edge is illegal")
    return -math.log(m - eps_w)


@dataclass(frozen=True)
class AbstractPath:
    """Node sequence from a start grasp state to a goal state."""

    nodes: tuple[tuple[int, int], ...]  # (area, grasp) pairs
    cost: float
    regrasps: int


class RegraspMap:
    """Grasp-state graph plus the construction context it was built from."""

    def __init__(
        self,
        grid: VoxelGrid,
        areas: list[Area],
        area_of: np.ndarray,
        nodes: list[MapNode],
        edges: list[MapEdge],
        eps_w: float = EPS_W,
    ):
        self.grid = grid
        self.areas = areas
        self.area_of = area_of  # linear voxel index -> area id, -1 if occupied
        self.nodes = nodes
        self.edges = edges
        self.eps_w = eps_w
        self.node_index = {(n.area, n.grasp): n.id for n in nodes}
        self.adj: list[list[tuple[int, int]]] = [[] for _ in nodes]
        for ei, e in enumerate(edges):
            self.adj[e.a].append((ei, e.b))
            self.adj[e.b].append((ei, e.a))
        n = len(nodes)
        self.dist_to_goal = np.full(n, np.inf)
        self.dist_regrasps = np.full(n, -1, dtype=int)
        self.pred = np.full(n, -1, dtype=int)  # next node toward the goal
        self.goal_nodes: tuple[int, ...] = ()

    def weight(self, edge_id: int) -> float:
        e = self.edges[edge_id]
        return edge_weight(e.phi_a, e.phi_b, self.eps_w)

    def area_at(self, pose: Pose2) -> int:
        """Area id containing the pose, or -1 for occupied/unknown voxels."""
        try:
            ix, iy, it = self.grid.index(pose)
        except ValueError:
            return -1
        return int(self.area_of[self.grid.linear(ix, iy, it)])

    def nodes_of_area(self, area_id: int) -> list[MapNode]:
        return [n for n in self.nodes if n.area == area_id]


# ---------------------------------------------------------------------------
# Construction


def _make_grid(scene: Scene, v: float, n_theta: int, k: int) -> VoxelGrid:
    b = scene.bounds
    nx = max(1, int(math.ceil(b.width / v - 1e-9)))
    ny = max(1, int(math.ceil(b.height / v - 1e-9)))
    return VoxelGrid(
        xmin=b.xmin,
        ymin=b.ymin,
        v=v,
        nx=nx,
        ny=ny,
        n_theta=n_theta,
        theta0=scene.object_start.theta,
        signature=np.zeros((nx, ny, n_theta), dtype=np.int64),
        occupied=np.ones((nx, ny, n_theta), dtype=bool),
        phi=np.zeros((nx, ny, n_theta, k)),
    )


def segment(grid: VoxelGrid) -> tuple[list[Area], np.ndarray]:
    """Flood-fill same-signature connected components over free voxels.

    Adjacency is the 4-neighborhood in (x, y) plus the two wrapping theta
    neighbors.  Returns the areas (ids in scan order) and the per-voxel area
    id array (-1 for occupied voxels).
    """
    sig = grid.signature
    occ = grid.occupied
    nv = grid.n_voxels
    area_of = np.full(nv, -1, dtype=int)
    areas: list[Area] = []
    phi_flat = grid.phi.reshape(nv, -1)
    for start in range(nv):
        if area_of[start] != -1:
            continue
        sx, sy, st = grid.unravel(start)
        if occ[sx, sy, st]:
            continue
        aid = len(areas)
        want = sig[sx, sy, st]
        members = []
        queue = deque([(sx, sy, st)])
        area_of[start] = aid
        while queue:
            ix, iy, it = queue.popleft()
            members.append(grid.linear(ix, iy, it))
            for jx, jy, jt in grid.neighbors(ix, iy, it):
                lin = grid.linear(jx, jy, jt)
                if area_of[lin] != -1 or occ[jx, jy, jt] or sig[jx, jy, jt] != want:
                    continue
                area_of[lin] = aid
                queue.append((jx, jy, jt))
        members = np.sort(np.array(members, dtype=int))
        phi_area = phi_flat[members].min(axis=0) if phi_flat.shape[1] else np.zeros(0)
        areas.append(Area(id=aid, voxels=members, signature=int(want), phi_area=phi_area))
    return areas, area_of


def _adjacent_area_pairs(grid: VoxelGrid, area_of: np.ndarray) -> set[tuple[int, int]]:
    amap = area_of.reshape(grid.nx, grid.ny, grid.n_theta)
    pairs: set[tuple[int, int]] = set()

    def collect(a: np.ndarray, b: np.ndarray):
        ok = (a >= 0) & (b >= 0) & (a != b)
        lo = np.minimum(a[ok], b[ok])
        hi = np.maximum(a[ok], b[ok])
        pairs.update(zip(lo.tolist(), hi.tolist()))

    if grid.nx > 1:
        collect(amap[:-1, :, :], amap[1:, :, :])
    if grid.ny > 1:
        collect(amap[:, :-1, :], amap[:, 1:, :])
    if grid.n_theta > 1:
        collect(amap[:, :, :-1], amap[:, :, 1:])
        if grid.n_theta > 2:
            collect(amap[:, :, -1:], amap[:, :, :1])
    return pairs


def build_map(
    scene: Scene,
    grasps: GraspSet,
    v: float,
    params: FeasibilityParams,
    n_theta: int = 1,
    world: World | None = None,
) -> RegraspMap:
    """Evaluate signatures on the lattice and assemble the grasp-state graph.

    Deterministic for fixed inputs: every voxel derives its perturbation
    stream from its own linear index.
    """
    if v <= 0:
        raise ValueError("voxel size must be positive")
    if n_theta < 1:
        raise ValueError("need at least one orientation bin")
    if world is None:
        world = make_world(scene)
    k = grasps.k
    grid = _make_grid(scene, v, n_theta, k)
    for ix in range(grid.nx):
        for iy in range(grid.ny):
            for it in range(n_theta):
                pose = grid.center(ix, iy, it)
                lin = grid.linear(ix, iy, it)
                sig = signature(pose, grasps, world, params, context=lin)
                grid.signature[ix, iy, it] = sig.bits
                grid.occupied[ix, iy, it] = sig.occupied
                grid.phi[ix, iy, it] = sig.phi
    areas, area_of = segment(grid)

    nodes: list[MapNode] = []
    for area in areas:
        for u in range(k):
            if area.signature >> u & 1:
                nodes.append(MapNode(id=len(nodes), area=area.id, grasp=u))
    index = {(n.area, n.grasp): n.id for n in nodes}

    alpha = params.alpha
    edges: list[MapEdge] = []
    for area in areas:
        usable = [u for u in range(k) if area.signature >> u & 1 and area.phi_area[u] > alpha]
        for i, u in enumerate(usable):
            for u2 in usable[i + 1 :]:
                edges.append(
                    MapEdge(
                        a=index[(area.id, u)],
                        b=index[(area.id, u2)],
                        phi_a=float(area.phi_area[u]),
                        phi_b=float(area.phi_area[u2]),
                        regrasp=True,
                    )
                )
    for a1, a2 in sorted(_adjacent_area_pairs(grid, area_of)):
        s1, s2 = areas[a1], areas[a2]
        for u in range(k):
            if not (s1.signature >> u & 1 and s2.signature >> u & 1):
                continue
            if s1.phi_area[u] > alpha and s2.phi_area[u] > alpha:
                edges.append(
                    MapEdge(
                        a=index[(a1, u)],
                        b=index[(a2, u)],
                        phi_a=float(s1.phi_area[u]),
                        phi_b=float(s2.phi_area[u]),
                        regrasp=False,
                    )
                )
    for e in edges:
        assert edge_weight(e.phi_a, e.phi_b) > 0.0
    return RegraspMap(grid, areas, area_of, nodes, edges)


# ---------------------------------------------------------------------------
# Shortest paths


def goal_node_ids(rmap: RegraspMap, goal: GoalRegion) -> tuple[int, ...]:
    """Nodes whose area holds at least one voxel center satisfying the goal."""
    grid = rmap.grid
    goal_areas = set()
    for area in rmap.areas:
        for lin in area.voxels:
            if goal_satisfied(goal, grid.center_of(int(lin))):
                goal_areas.add(area.id)
                break
    return tuple(n.id for n in rmap.nodes if n.area in goal_areas)


def recompute_distances(rmap: RegraspMap) -> None:
    """Multi-source Dijkstra from the stored goal nodes toward every node.

    Keys compare as (cost, regrasp count); predecessor points one step toward
    the goal, with lower node ids preferred on exact key ties.
    """
    n = len(rmap.nodes)
    dist = np.full(n, np.inf)
    regs = np.full(n, -1, dtype=int)
    pred = np.full(n, -1, dtype=int)
    heap = []
    for g in rmap.goal_nodes:
        dist[g] = 0.0
        regs[g] = 0
        heapq.heappush(heap, (0.0, 0, g))
    done = np.zeros(n, dtype=bool)
    while heap:
        d, r, node = heapq.heappop(heap)
        if done[node]:
            continue
        done[node] = True
        for edge_id, other in rmap.adj[node]:
            if done[other]:
                continue
            e = rmap.edges[edge_id]
            nd = d + edge_weight(e.phi_a, e.phi_b, rmap.eps_w)
            nr = r + (1 if e.regrasp else 0)
            key = (nd, nr)
            cur = (dist[other], regs[other] if regs[other] >= 0 else 0)
            if key < cur:
                dist[other] = nd
                regs[other] = nr
                pred[other] = node
                heapq.heappush(heap, (nd, nr, other))
            elif key == cur and node < pred[other]:
                pred[other] = node
    rmap.dist_to_goal = dist
    rmap.dist_regrasps = regs
    rmap.pred = pred


def _trace(rmap: RegraspMap, start_node: int) -> AbstractPath:
    seq = []
    node = start_node
    while node != -1:
        seq.append((rmap.nodes[node].area, rmap.nodes[node].grasp))
        node = int(rmap.pred[node])
    return AbstractPath(
        nodes=tuple(seq),
        cost=float(rmap.dist_to_goal[start_node]),
        regrasps=int(rmap.dist_regrasps[start_node]),
    )


def find_paths(
    rmap: RegraspMap, scene: Scene, goal: GoalRegion | None = None
) -> list[AbstractPath]:
    """Cache goal-distances on the map and extract one best path per start node.

    Start nodes are the grasp states of the area containing the object's
    start pose.  An empty list means the abstraction sees no route, which is
    what drives the resolution loop to refine the lattice.
    """
    goal = goal if goal is not None else scene.goal
    rmap.goal_nodes = goal_node_ids(rmap, goal)
    recompute_distances(rmap)
    start_area = rmap.area_at(scene.object_start)
    if start_area < 0:
        return []
    paths = [
        _trace(rmap, n.id)
        for n in rmap.nodes
        if n.area == start_area and np.isfinite(rmap.dist_to_goal[n.id])
    ]
    paths.sort(key=lambda p: (p.cost, p.regrasps, p.nodes[0][1]))
    return paths


def min_regrasp_depth(
    rmap: RegraspMap, scene: Scene, goal: GoalRegion | None = None
) -> int | None:
    """Fewest regrasp edges on any start-to-goal route, or None without one.

    recompute_distances ranks routes by cost and only reports the regrasp
    count of the cheapest; here the key order flips to (regrasps, cost),
    which is the quantity scene difficulty is bucketed by.
    """
    goal = goal if goal is not None else scene.goal
    goals = goal_node_ids(rmap, goal)
    start_area = rmap.area_at(scene.object_start)
    if not goals or start_area < 0:
        return None
    best: dict[int, tuple[int, float]] = {}
    heap = []
    for g in goals:
        best[g] = (0, 0.0)
        heapq.heappush(heap, (0, 0.0, g))
    done: set[int] = set()
    while heap:
        r, d, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        for edge_id, other in rmap.adj[node]:
            if other in done:
                continue
            e = rmap.edges[edge_id]
            key = (r + (1 if e.regrasp else 0),
                   d + edge_weight(e.phi_a, e.phi_b, rmap.eps_w))
            if key < best.get(other, (_INF_REGRASPS, math.inf)):
                best[other] = key
                heapq.heappush(heap, (key[0], key[1], other))
    depths = [best[n.id][0] for n in rmap.nodes
              if n.area == start_area and n.id in best]
    return min(depths) if depths else None


_INF_REGRASPS = 1 << 60


@dataclass(frozen=True)
class MapSearchResult:
    paths: list[AbstractPath]
    rmap: RegraspMap
    iterations: int


def find_regrasp_plans(
    scene: Scene,
    grasps: GraspSet,
    v0: float,
    gamma: float,
    params: FeasibilityParams,
    n_theta: int = 1,
    goal: GoalRegion | None = None,
    world: World | None = None,
) -> MapSearchResult:
    """Search for abstract regrasp paths, halving the voxel size on failure.

    Stops at the first resolution that yields paths, or once the next halving
    would drop to gamma or below (returning the last map with no paths).
    """
    if not v0 > gamma > 0:
        raise ValueError("need v0 > gamma > 0")
    if world is None:
        world = make_world(scene)
    v = v0
    iterations = 0
    while True:
        iterations += 1
        rmap = build_map(scene, grasps, v, params, n_theta=n_theta, world=world)
        paths = find_paths(rmap, scene, goal)
        if paths:
            return MapSearchResult(paths=paths, rmap=rmap, iterations=iterations)
        v = 0.5 * v
        if v <= gamma:
            return MapSearchResult(paths=[], rmap=rmap, iterations=iterations)


# ---------------------------------------------------------------------------
# Export


def map_to_json(rmap: RegraspMap) -> dict:
    grid = rmap.grid
    return {
        "voxel_size": grid.v,
        "grid": [grid.nx, grid.ny, grid.n_theta],
        "areas": [
            {
                "id": a.id,
                "size": a.size,
                "signature": a.signature,
                "phi": [round(float(p), 6) for p in a.phi_area],
            }
            for a in rmap.areas
        ],
        "nodes": [{"id": n.id, "area": n.area, "grasp": n.grasp} for n in rmap.nodes],
        "edges": [
            {
                "a": e.a,
                "b": e.b,
                "weight": round(rmap.weight(i), 9),
                "regrasp": e.regrasp,
            }
            for i, e in enumerate(rmap.edges)
        ],
        "dist_to_goal": [
            None if not np.isfinite(d) else round(float(d), 9) for d in rmap.dist_to_goal
        ],
    }
