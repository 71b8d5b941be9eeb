import itertools
import math

import numpy as np
import pytest

from regrasp.geometry import Box, Pose2, Rect
from regrasp.grasp import default_feasibility, generate_grasps
from regrasp.rmap import (
    EPS_W,
    AbstractPath,
    Area,
    MapEdge,
    MapNode,
    RegraspMap,
    VoxelGrid,
    build_map,
    edge_weight,
    find_paths,
    find_regrasp_plans,
    map_to_json,
    recompute_distances,
    segment,
)
from regrasp.scene import GoalRegion, Scene
from regrasp.world import make_world

AGENT_R = 0.075
STICK = Box(0.18, 0.035)


def room(name, w, h, obstacles, start, goal_rect, agent=(0.3, 0.3)):
    return Scene(
        name=name,
        bounds=Rect(0, 0, w, h),
        obstacles=tuple(obstacles),
        object_shape=STICK,
        object_start=start,
        agent_radius=AGENT_R,
        agent_start=agent,
        goal=GoalRegion(goal_rect),
    )


# ---------------------------------------------------------------------------
# Edge weights (closed forms)


def test_weight_closed_forms():
    assert edge_weight(1.0, 1.0) == pytest.approx(1e-9, rel=0.2)
    assert edge_weight(1.0, 1.0) > 0.0
    assert edge_weight(0.5, 1.0) == pytest.approx(-math.log(0.5 - 1e-9), rel=1e-12)
    assert edge_weight(0.5, 1.0) == pytest.approx(0.693147, abs=1e-5)
    assert edge_weight(1.0, 0.5) == edge_weight(0.5, 1.0)


def test_weight_strictly_increases_as_phi_drops():
    phis = np.linspace(1.0, 0.05, 40)
    ws = [edge_weight(p, 1.0) for p in phis]
    assert all(b > a for a, b in zip(ws, ws[1:]))


def test_weight_rejects_phi_at_or_below_eps():
    with pytest.raises(ValueError):
        edge_weight(EPS_W, 1.0)
    with pytest.raises(ValueError):
        edge_weight(0.0, 0.5)


# ---------------------------------------------------------------------------
# Segmentation


def _grid_from_arrays(sig, occ, n_theta=1):
    sig = np.asarray(sig, dtype=np.int64)
    if sig.ndim == 2:
        sig = sig[:, :, None]
        occ = np.asarray(occ, dtype=bool)[:, :, None]
    else:
        occ = np.asarray(occ, dtype=bool)
    nx, ny, nt = sig.shape
    return VoxelGrid(
        xmin=0.0,
        ymin=0.0,
        v=1.0,
        nx=nx,
        ny=ny,
        n_theta=nt,
        theta0=0.0,
        signature=sig,
        occupied=occ,
        phi=np.zeros((nx, ny, nt, 1)),
    )


def test_segment_strip_example():
    sig = [[0b01], [0b01], [0b11], [0b01]]
    occ = [[False]] * 4
    grid = _grid_from_arrays(np.array(sig), np.array(occ))
    areas, area_of = segment(grid)
    groups = sorted(tuple(a.voxels.tolist()) for a in areas)
    assert groups == [(0, 1), (2,), (3,)]
    assert area_of.tolist() == [0, 0, 1, 2]


def test_segment_uniform_grid_is_one_area():
    grid = _grid_from_arrays(np.full((5, 7), 0b1011), np.zeros((5, 7), dtype=bool))
    areas, _ = segment(grid)
    assert len(areas) == 1
    assert areas[0].size == 35
    assert areas[0].signature == 0b1011


class _UnionFind:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, i):
        while self.p[i] != i:
            self.p[i] = self.p[self.p[i]]
            i = self.p[i]
        return i

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.p[ra] = rb


def _oracle_partition(sig, occ, n_theta):
    """Union-find over the same adjacency; partition as a set of frozensets."""
    nx, ny, nt = sig.shape
    n = nx * ny * nt
    uf = _UnionFind(n)

    def lin(ix, iy, it):
        return (ix * ny + iy) * nt + it

    for ix in range(nx):
        for iy in range(ny):
            for it in range(nt):
                if occ[ix, iy, it]:
                    continue
                nbrs = []
                if ix + 1 < nx:
                    nbrs.append((ix + 1, iy, it))
                if iy + 1 < ny:
                    nbrs.append((ix, iy + 1, it))
                if nt == 2 and it == 0:
                    nbrs.append((ix, iy, 1))
                elif nt > 2:
                    nbrs.append((ix, iy, (it + 1) % nt))
                for jx, jy, jt in nbrs:
                    if not occ[jx, jy, jt] and sig[jx, jy, jt] == sig[ix, iy, it]:
                        uf.union(lin(ix, iy, it), lin(jx, jy, jt))
    groups = {}
    for ix in range(nx):
        for iy in range(ny):
            for it in range(nt):
                if occ[ix, iy, it]:
                    continue
                groups.setdefault(uf.find(lin(ix, iy, it)), []).append(lin(ix, iy, it))
    return {frozenset(g) for g in groups.values()}


@pytest.mark.parametrize("n_theta", [1, 2, 4])
def test_segment_matches_union_find_oracle(n_theta):
    rng = np.random.default_rng(17)
    for _ in range(100 if n_theta == 1 else 30):
        nx, ny = 16, 16
        sig = rng.integers(0, 4, size=(nx, ny, n_theta))
        occ = rng.uniform(size=(nx, ny, n_theta)) < 0.2
        grid = _grid_from_arrays(sig, occ)
        areas, area_of = segment(grid)
        got = {frozenset(a.voxels.tolist()) for a in areas}
        assert got == _oracle_partition(sig, occ, n_theta)
        # partition: free voxels covered exactly once, occupied voxels excluded
        covered = np.concatenate([a.voxels for a in areas]) if areas else np.array([], int)
        assert len(covered) == len(set(covered.tolist()))
        assert len(covered) == int(np.count_nonzero(~occ))
        assert np.all(area_of[covered] >= 0)
        # purity
        flat_sig = sig.reshape(-1)
        for a in areas:
            assert np.all(flat_sig[a.voxels] == a.signature)


def test_area_phi_is_member_minimum():
    sig = np.full((3, 1, 1), 0b1, dtype=np.int64)
    occ = np.zeros((3, 1, 1), dtype=bool)
    grid = _grid_from_arrays(sig, occ)
    grid.phi[:, 0, 0, 0] = [0.9, 0.6, 0.8]
    areas, _ = segment(grid)
    assert len(areas) == 1
    assert areas[0].phi_area[0] == pytest.approx(0.6)


# ---------------------------------------------------------------------------
# Dijkstra against exhaustive enumeration


def _synthetic_map(n_nodes, edge_list, goal_nodes):
    """Bare graph wrapped in a RegraspMap; grid/areas are not consulted."""
    nodes = [MapNode(id=i, area=i, grasp=0) for i in range(n_nodes)]
    edges = [MapEdge(a=a, b=b, phi_a=pa, phi_b=pb, regrasp=rg) for a, b, pa, pb, rg in edge_list]
    rmap = RegraspMap(
        grid=None, areas=[], area_of=np.empty(0, dtype=int), nodes=nodes, edges=edges
    )
    rmap.goal_nodes = tuple(goal_nodes)
    return rmap


def _enumerate_best(n_nodes, edges, goal_nodes, source):
    """Min (cost, regrasps) over all simple paths from source to any goal."""
    adj = {i: [] for i in range(n_nodes)}
    for a, b, pa, pb, rg in edges:
        w = edge_weight(pa, pb)
        adj[a].append((b, w, rg))
        adj[b].append((a, w, rg))
    best = None
    goal_set = set(goal_nodes)

    def dfs(node, cost, regs, seen):
        nonlocal best
        if node in goal_set:
            key = (round(cost, 9), regs)
            if best is None or key < best:
                best = key
            return
        for other, w, rg in adj[node]:
            if other not in seen:
                dfs(other, cost + w, regs + (1 if rg else 0), seen | {other})

    dfs(source, 0.0, 0, {source})
    return best


def test_distances_match_enumeration_on_random_graphs():
    rng = np.random.default_rng(5)
    for trial in range(60):
        n = int(rng.integers(2, 9))
        pairs = list(itertools.combinations(range(n), 2))
        rng.shuffle(pairs)
        m = int(rng.integers(1, len(pairs) + 1))
        edges = []
        for a, b in pairs[:m]:
            pa, pb = rng.choice([0.6, 0.8], size=2)
            edges.append((a, b, float(pa), float(pb), bool(rng.integers(0, 2))))
        goals = sorted(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist())
        rmap = _synthetic_map(n, edges, goals)
        recompute_distances(rmap)
        for s in range(n):
            oracle = _enumerate_best(n, edges, goals, s)
            if oracle is None:
                assert not np.isfinite(rmap.dist_to_goal[s])
            else:
                assert (round(float(rmap.dist_to_goal[s]), 9), int(rmap.dist_regrasps[s])) == oracle


def test_predecessor_chain_reaches_goal_with_matching_cost():
    rng = np.random.default_rng(23)
    for _ in range(20):
        n = 8
        pairs = list(itertools.combinations(range(n), 2))
        keep = [p for p in pairs if rng.uniform() < 0.4]
        if not keep:
            continue
        edges = [
            (a, b, float(rng.choice([0.55, 0.7, 0.95])), 1.0, bool(rng.integers(0, 2)))
            for a, b in keep
        ]
        rmap = _synthetic_map(n, edges, [0])
        recompute_distances(rmap)
        lookup = {}
        for ei, e in enumerate(rmap.edges):
            lookup[(e.a, e.b)] = ei
            lookup[(e.b, e.a)] = ei
        for s in range(n):
            if not np.isfinite(rmap.dist_to_goal[s]):
                continue
            cost = 0.0
            node = s
            while node != 0:
                nxt = int(rmap.pred[node])
                ei = lookup[(node, nxt)]
                cost += rmap.weight(ei)
                node = nxt
            assert cost == pytest.approx(float(rmap.dist_to_goal[s]), abs=1e-9)


# ---------------------------------------------------------------------------
# Map construction on scenes


def test_open_room_is_one_area_with_a_regrasp_clique():
    scene = room(
        "open",
        10.0,
        10.0,
        [],
        start=Pose2(5.0, 5.0),
        goal_rect=Rect(8.0, 8.0, 9.5, 9.5),
        agent=(1.0, 1.0),
    )
    grasps = generate_grasps(STICK, 4, seed=0, agent_radius=AGENT_R)
    params = default_feasibility(AGENT_R, rng_seed=0)
    rmap = build_map(scene, grasps, v=1.0, params=params)
    assert len(rmap.areas) == 1
    assert len(rmap.nodes) == 4
    assert len(rmap.edges) == 6
    assert all(e.regrasp for e in rmap.edges)
    paths = find_paths(rmap, scene)
    assert len(paths) == 4
    assert all(p.cost == 0.0 and p.regrasps == 0 and len(p.nodes) == 1 for p in paths)


def test_unplaceable_object_yields_empty_map():
    scene = room(
        "blocked",
        2.0,
        2.0,
        [(Box(0.03, 0.03), Pose2(1.0, 1.0))],
        start=Pose2(0.45, 0.3),
        goal_rect=Rect(1.5, 1.5, 1.9, 1.9),
        agent=(0.15, 1.0),
    )
    grasps = generate_grasps(STICK, 4, seed=0, agent_radius=AGENT_R)
    params = default_feasibility(AGENT_R, rng_seed=0)
    rmap = build_map(scene, grasps, v=2.0, params=params)
    assert len(rmap.areas) == 0
    assert len(rmap.nodes) == 0
    assert len(rmap.edges) == 0
    assert find_paths(rmap, scene) == []


def _slot_scene():
    # Vertical wall at x = 2.25 with a slot the object threads but the agent
    # cannot: slot height 0.14 vs agent diameter 0.15.
    wall_lo = Box(0.04, 0.715)
    wall_hi = Box(0.04, 0.715)
    return room(
        "slot",
        4.5,
        3.0,
        [(wall_lo, Pose2(2.25, 0.715)), (wall_hi, Pose2(2.25, 2.285))],
        start=Pose2(0.9, 1.5),
        goal_rect=Rect(3.4, 1.1, 4.2, 1.9),
    )


def test_slot_scene_forces_a_regrasp_in_the_abstract_plan():
    scene = _slot_scene()
    grasps = generate_grasps(STICK, 8, seed=0, agent_radius=AGENT_R)
    params = default_feasibility(AGENT_R, rng_seed=0)
    result = find_regrasp_plans(scene, grasps, v0=0.18, gamma=0.03, params=params)
    assert result.paths, "expected the slot to be passable in the abstraction"
    assert all(p.regrasps >= 1 for p in result.paths)
    rmap = result.rmap
    assert len(rmap.areas) >= 3
    # consecutive path nodes are joined by real edges of the right kind
    lookup = {}
    for e in rmap.edges:
        ka = (rmap.nodes[e.a].area, rmap.nodes[e.a].grasp)
        kb = (rmap.nodes[e.b].area, rmap.nodes[e.b].grasp)
        lookup[(ka, kb)] = e
        lookup[(kb, ka)] = e
    best = result.paths[0]
    for s1, s2 in zip(best.nodes, best.nodes[1:]):
        e = lookup[(s1, s2)]
        same_area = s1[0] == s2[0]
        assert e.regrasp == same_area


def test_resolution_loop_counts_iterations_and_gives_up():
    # Object boxed into a sealed chamber: every resolution fails, the loop
    # stops once the next halving would cross gamma.
    walls = [
        (Box(0.45, 0.04), Pose2(0.75, 0.3)),
        (Box(0.45, 0.04), Pose2(0.75, 1.2)),
        (Box(0.04, 0.41), Pose2(0.34, 0.75)),
        (Box(0.04, 0.41), Pose2(1.16, 0.75)),
    ]
    scene = room(
        "sealed",
        2.5,
        2.5,
        walls,
        start=Pose2(0.75, 0.75),
        goal_rect=Rect(2.0, 2.0, 2.4, 2.4),
        agent=(2.0, 1.0),
    )
    grasps = generate_grasps(STICK, 4, seed=0, agent_radius=AGENT_R)
    params = default_feasibility(AGENT_R, rng_seed=0)
    result = find_regrasp_plans(scene, grasps, v0=0.16, gamma=0.03, params=params)
    assert result.paths == []
    assert result.iterations == 3  # 0.16, 0.08, 0.04; then 0.02 <= gamma stops


def test_open_room_resolution_loop_stops_immediately():
    scene = room(
        "open",
        4.0,
        4.0,
        [],
        start=Pose2(1.0, 1.0),
        goal_rect=Rect(3.0, 3.0, 3.8, 3.8),
    )
    grasps = generate_grasps(STICK, 4, seed=0, agent_radius=AGENT_R)
    params = default_feasibility(AGENT_R, rng_seed=0)
    result = find_regrasp_plans(scene, grasps, v0=0.2, gamma=0.03, params=params)
    assert result.iterations == 1
    assert result.paths


def test_build_map_rejects_bad_resolution():
    scene = _slot_scene()
    grasps = generate_grasps(STICK, 4, seed=0, agent_radius=AGENT_R)
    params = default_feasibility(AGENT_R, rng_seed=0)
    with pytest.raises(ValueError):
        build_map(scene, grasps, v=0.0, params=params)
    with pytest.raises(ValueError):
        build_map(scene, grasps, v=0.1, params=params, n_theta=0)
    with pytest.raises(ValueError):
        find_regrasp_plans(scene, grasps, v0=0.02, gamma=0.03, params=params)


def test_multi_orientation_open_room_connects_through_theta():
    scene = room(
        "spin",
        3.0,
        3.0,
        [],
        start=Pose2(1.5, 1.5, 0.2),
        goal_rect=Rect(2.0, 2.0, 2.8, 2.8),
    )
    grasps = generate_grasps(STICK, 4, seed=0, agent_radius=AGENT_R)
    params = default_feasibility(AGENT_R, rng_seed=0)
    rmap = build_map(scene, grasps, v=1.0, params=params, n_theta=8)
    assert len(rmap.areas) == 1
    assert rmap.grid.n_theta == 8
    # theta bins stay anchored on the start orientation
    it = rmap.grid.theta_index(scene.object_start.theta)
    c = rmap.grid.center(0, 0, it)
    assert c.theta == pytest.approx(0.2)


def test_map_determinism_and_export():
    scene = _slot_scene()
    grasps = generate_grasps(STICK, 8, seed=0, agent_radius=AGENT_R)
    params = default_feasibility(AGENT_R, rng_seed=0)
    m1 = build_map(scene, grasps, v=0.18, params=params)
    m2 = build_map(scene, grasps, v=0.18, params=params)
    assert np.array_equal(m1.grid.signature, m2.grid.signature)
    assert np.array_equal(m1.grid.phi, m2.grid.phi)
    assert [(e.a, e.b, e.phi_a, e.phi_b) for e in m1.edges] == [
        (e.a, e.b, e.phi_a, e.phi_b) for e in m2.edges
    ]
    find_paths(m1, scene)
    doc = map_to_json(m1)
    assert doc["voxel_size"] == 0.18
    assert len(doc["nodes"]) == len(m1.nodes)
    assert len(doc["edges"]) == len(m1.edges)
    assert len(doc["dist_to_goal"]) == len(m1.nodes)


def test_edges_respect_alpha_gate_and_positivity():
    scene = _slot_scene()
    grasps = generate_grasps(STICK, 8, seed=0, agent_radius=AGENT_R)
    params = default_feasibility(AGENT_R, rng_seed=0)
    rmap = build_map(scene, grasps, v=0.18, params=params)
    assert rmap.edges, "slot scene should produce a nontrivial graph"
    for i, e in enumerate(rmap.edges):
        na, nb = rmap.nodes[e.a], rmap.nodes[e.b]
        assert e.a != e.b
        assert e.phi_a > params.alpha and e.phi_b > params.alpha
        assert rmap.weight(i) > 0.0
        if e.regrasp:
            assert na.area == nb.area and na.grasp != nb.grasp
        else:
            assert na.grasp == nb.grasp and na.area != nb.area
    keys = {(min(e.a, e.b), max(e.a, e.b)) for e in rmap.edges}
    assert len(keys) == len(rmap.edges)  # simple graph, no parallel edges
