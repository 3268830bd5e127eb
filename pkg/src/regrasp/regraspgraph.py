"""Regrasp graph over tabletop grips, pose connection and reorientation search.

Nodes are the IK-feasible rows of ``tabletopgrips``. Two relations connect
them: grips of the same free grasp at different tabletop placements
(transfer, the object is carried) and different grips at the same tabletop
placement (transit, the object is released and regrasped). Both relations
are cliques over groups, so they are stored as groups and traversed through
one virtual hub per group with half the edge weight on each side. Shortest
path lengths are identical to the explicit clique graph.
"""

import heapq
from dataclasses import dataclass, field
from itertools import combinations

import networkx as nx
import numpy as np

from . import store as st
from . import transforms as tf
from .kinematics import feasibility_batch
from .placement import hand_below_table

W_TRANSIT = 10.0
W_TRANSFER = 1.0
TABLE_TOLERANCE = 2e-3

# node key kinds; keys are ``(kind, id)`` tuples and compare lexicographically
ROADMAP, INIT, GOAL, PLACEMENT_HUB, GRASP_HUB = range(5)
_ROLE_KIND = {"init": INIT, "goal": GOAL}
# placement-hub ids of the two query poses (row ids are positive)
_ROLE_HUB = {"init": -1, "goal": -2}


class InfeasibleError(Exception):
    pass


class QueryInfeasibleError(InfeasibleError):
    """No grasp survives at a query pose; ``stage`` is 'collision' or 'ik'."""

    def __init__(self, role, stage, detail=""):
        self.role = role
        self.stage = stage
        super().__init__(f"{role} pose: no grasp survives the {stage} stage{detail}")


class DisconnectedError(InfeasibleError):
    def __init__(self, init_size, goal_size):
        self.init_size = init_size
        self.goal_size = goal_size
        super().__init__(
            f"init and goal lie in different components (sizes {init_size} and {goal_size})"
        )


class InvalidQueryError(ValueError):
    pass


@dataclass(eq=False)
class RegraspGraph:
    object_id: int
    robot_id: int
    weights: tuple  # (transit, transfer)
    grip_ids: np.ndarray  # ascending
    instance_of: dict
    grasp_of: dict
    by_instance: dict  # tabletop placement id -> ascending grip ids
    by_grasp: dict  # free grasp id -> ascending grip ids
    hand_poses: dict  # grip id -> world hand pose
    jaw_widths: dict
    instance_poses: dict  # tabletop placement id -> object world pose
    instance_placement: dict  # tabletop placement id -> free placement id
    free_grasps: st.GripRows = None

    @property
    def w_transit(self):
        return self.weights[0]

    @property
    def w_transfer(self):
        return self.weights[1]

    def number_of_nodes(self):
        return len(self.grip_ids)

    def transit_edges(self):
        return sorted(p for g in self.by_instance.values() for p in combinations(g, 2))

    def transfer_edges(self):
        return sorted(p for g in self.by_grasp.values() for p in combinations(g, 2))

    def number_of_edges(self):
        return sum(
            len(g) * (len(g) - 1) // 2
            for groups in (self.by_instance, self.by_grasp)
            for g in groups.values()
        )

    def to_networkx(self):
        """Explicit graph with typed edges, for export and inspection."""
        G = nx.Graph()
        for gid in self.grip_ids.tolist():
            inst = self.instance_of[gid]
            G.add_node(
                gid,
                tabletopplacement=inst,
                placement=self.instance_placement[inst],
                freeairgrip=self.grasp_of[gid],
            )
        for u, v in self.transit_edges():
            G.add_edge(u, v, kind="transit", weight=self.w_transit)
        for u, v in self.transfer_edges():
            G.add_edge(u, v, kind="transfer", weight=self.w_transfer)
        return G


def _group(ids, keys):
    out = {}
    for gid, k in zip(ids, keys):
        out.setdefault(k, []).append(gid)
    return out


def build_graph(store, object_name, robot_name, weights=(W_TRANSIT, W_TRANSFER)):
    """Roadmap of one object's IK-feasible tabletop grips for one robot."""
    oid = st.object_id(store, object_name)
    rid = st.robot_id(store, robot_name)
    feasible = set(st.feasible_grip_ids(store, oid, rid).tolist())
    rows = st.load_tabletopgrips(store, oid)
    keep = np.array([g in feasible for g in rows.ids.tolist()], dtype=bool)
    ids = rows.ids[keep]
    inst = rows.placement_ids[keep].tolist()
    fg = rows.grasp_ids[keep].tolist()
    instances = st.load_tabletopplacements(store, oid)

    # group membership from the store's joins, restricted to feasible nodes
    def restrict(groups):
        out = {}
        for k, members in groups.items():
            m = [g for g in members if g in feasible]
            if m:
                out[k] = m
        return out

    ids_list = ids.tolist()
    return RegraspGraph(
        object_id=oid,
        robot_id=rid,
        weights=tuple(float(w) for w in weights),
        grip_ids=ids,
        instance_of=dict(zip(ids_list, inst)),
        grasp_of=dict(zip(ids_list, fg)),
        by_instance=restrict(st.grip_groups(store, oid, "placement")),
        by_grasp=restrict(st.grip_groups(store, oid, "freeairgrip")),
        hand_poses=dict(zip(ids_list, rows.poses[keep])),
        jaw_widths=dict(zip(ids_list, rows.jaw_widths[keep].tolist())),
        instance_poses=dict(zip(instances.ids.tolist(), instances.poses)),
        instance_placement=dict(zip(instances.ids.tolist(), instances.placement_ids.tolist())),
        free_grasps=st.load_freeairgrips(store, oid),
    )


@dataclass(eq=False)
class ConnectedPose:
    """Temporary nodes for one query pose; never stored in the graph."""

    role: str
    pose: np.ndarray
    grasp_ids: list  # free grasp per temporary node
    hand_poses: np.ndarray
    jaw_widths: np.ndarray
    transfer_edges: list = field(default_factory=list)  # (temporary index, roadmap grip id)

    def __len__(self):
        return len(self.grasp_ids)

    def keys(self):
        kind = _ROLE_KIND[self.role]
        return [(kind, i) for i in range(len(self))]

    def transit_edges(self):
        return list(combinations(range(len(self)), 2))


@dataclass(frozen=True, eq=False)
class ReorientQuery:
    object_id: int
    robot_id: int
    init_pose: np.ndarray
    goal_pose: np.ndarray

    def validate(self, vertices, table_height=0.0, tol=TABLE_TOLERANCE):
        for name, pose in (("init", self.init_pose), ("goal", self.goal_pose)):
            check_resting_pose(pose, vertices, table_height, tol, name)
        return self


def check_resting_pose(pose, vertices, table_height=0.0, tol=TABLE_TOLERANCE, name="pose"):
    pose = np.asarray(pose, dtype=float)
    if pose.shape != (4, 4) or not tf.is_rigid(pose):
        raise InvalidQueryError(f"{name} pose is not a rigid transform")
    low = float(tf.apply(pose, vertices)[:, 2].min())
    if abs(low - table_height) > tol:
        raise InvalidQueryError(
            f"{name} pose does not rest on the table: lowest vertex at z={low:.4f}"
        )


def connect_pose(graph, pose, role, robot, gripper, retraction, table_height=0.0, **ik_kwargs):
    """Re-pose every free grasp at ``pose`` and keep the collision-free, IK-feasible ones."""
    if role not in _ROLE_KIND:
        raise ValueError("role must be 'init' or 'goal'")
    pose = np.asarray(pose, dtype=float)
    free = graph.free_grasps
    hand = pose @ free.poses
    clear = [
        i
        for i in range(len(free))
        if not hand_below_table(gripper, hand[i], free.jaw_widths[i], table_height)
    ]
    if not clear:
        raise QueryInfeasibleError(role, "collision")
    feas = feasibility_batch(robot, hand[clear], retraction, **ik_kwargs)
    keep = [i for i, f in zip(clear, feas) if f.all_feasible]
    if not keep:
        raise QueryInfeasibleError(role, "ik", f" ({len(clear)} collision-free grasps)")
    grasp_ids = free.ids[keep].tolist()
    conn = ConnectedPose(
        role=role,
        pose=pose,
        grasp_ids=grasp_ids,
        hand_poses=hand[keep],
        jaw_widths=free.jaw_widths[keep],
    )
    for k, fg in enumerate(grasp_ids):
        for gid in graph.by_grasp.get(fg, ()):
            conn.transfer_edges.append((k, gid))
    return conn


@dataclass(frozen=True, eq=False)
class ManipulationStep:
    grasp_id: int  # free grasp used for the carry
    hand_pose: np.ndarray  # world hand pose at pick
    place_hand_pose: np.ndarray  # world hand pose at place
    jaw_width: float
    pick_pose: np.ndarray  # object world pose before the carry
    place_pose: np.ndarray  # object world pose after the carry
    nodes: tuple  # graph node keys visited by this carry


@dataclass(eq=False)
class ManipulationSequence:
    steps: list
    path: list  # node keys without hubs
    edge_kinds: list  # 'transit' / 'transfer' per consecutive node pair
    weight: float

    @property
    def regrasp_count(self):
        return len(self.steps) - 1

    @property
    def transit_count(self):
        return sum(k == "transit" for k in self.edge_kinds)


class _Search:
    """Node expansion over the roadmap plus the two per-query overlays."""

    def __init__(self, graph, init, goal):
        self.g = graph
        self.conn = {INIT: init, GOAL: goal}
        self.ht = graph.w_transit / 2.0
        self.hf = graph.w_transfer / 2.0
        self.temp_by_grasp = {}
        for kind, c in self.conn.items():
            for i, fg in enumerate(c.grasp_ids):
                self.temp_by_grasp.setdefault(fg, []).append((kind, i))

    def neighbors(self, key):
        kind, i = key
        g = self.g
        if kind == ROADMAP:
            yield (PLACEMENT_HUB, g.instance_of[i]), self.ht
            yield (GRASP_HUB, g.grasp_of[i]), self.hf
        elif kind in (INIT, GOAL):
            role = "init" if kind == INIT else "goal"
            yield (PLACEMENT_HUB, _ROLE_HUB[role]), self.ht
            yield (GRASP_HUB, self.conn[kind].grasp_ids[i]), self.hf
        elif kind == PLACEMENT_HUB:
            if i == _ROLE_HUB["init"]:
                members = self.conn[INIT].keys()
            elif i == _ROLE_HUB["goal"]:
                members = self.conn[GOAL].keys()
            else:
                members = [(ROADMAP, m) for m in g.by_instance.get(i, ())]
            for m in members:
                yield m, self.ht
        else:
            for m in g.by_grasp.get(i, ()):
                yield (ROADMAP, m), self.hf
            for m in self.temp_by_grasp.get(i, ()):
                yield m, self.hf

    def run(self):
        dist, pred = {}, {}
        heap = [(0.0, k) for k in self.conn[INIT].keys()]
        for _, k in heap:
            dist[k] = 0.0
            pred[k] = None
        heapq.heapify(heap)
        done = set()
        while heap:
            d, key = heapq.heappop(heap)
            if key in done:
                continue
            done.add(key)
            if key[0] == GOAL:
                return d, self._unwind(pred, key)
            for nb, w in self.neighbors(key):
                nd = d + w
                if nd < dist.get(nb, np.inf):
                    dist[nb] = nd
                    pred[nb] = key
                    heapq.heappush(heap, (nd, nb))
        init_size = sum(1 for k in done if k[0] in (ROADMAP, INIT))
        return None, init_size

    def component_size(self, start_keys):
        seen = set(start_keys)
        stack = list(start_keys)
        while stack:
            key = stack.pop()
            for nb, _ in self.neighbors(key):
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return sum(1 for k in seen if k[0] in (ROADMAP, INIT, GOAL))

    @staticmethod
    def _unwind(pred, key):
        path = []
        while key is not None:
            path.append(key)
            key = pred[key]
        return path[::-1]


def search(graph, init, goal):
    """Minimum-weight path from any init node to any goal node.

    ``init`` and ``goal`` are :class:`ConnectedPose` overlays. Ties between
    equal-weight paths are broken by expanding node keys in lexicographic
    order. Raises :class:`DisconnectedError` when no path exists.
    """
    if len(init) == 0 or len(goal) == 0:
        raise InfeasibleError("init and goal need at least one node each")
    s = _Search(graph, init, goal)
    weight, result = s.run()
    if weight is None:
        raise DisconnectedError(result, s.component_size(goal.keys()))
    return compile_path(graph, init, goal, result, weight)


def _node_info(graph, init, goal, key):
    """``(free grasp, hand pose, jaw width, object pose)`` of a graph node."""
    kind, i = key
    if kind == ROADMAP:
        inst = graph.instance_of[i]
        return graph.grasp_of[i], graph.hand_poses[i], graph.jaw_widths[i], graph.instance_poses[inst]
    c = init if kind == INIT else goal
    return c.grasp_ids[i], c.hand_poses[i], float(c.jaw_widths[i]), c.pose


def compile_path(graph, init, goal, raw_path, weight):
    """Turn a hub-annotated node path into carry steps split at transit edges."""
    nodes, kinds = [], []
    pending = None
    for key in raw_path:
        if key[0] == PLACEMENT_HUB:
            pending = "transit"
        elif key[0] == GRASP_HUB:
            pending = "transfer"
        else:
            if nodes:
                kinds.append(pending)
            nodes.append(key)
    segments = [[nodes[0]]]
    for key, kind in zip(nodes[1:], kinds):
        if kind == "transit":
            segments.append([key])
        else:
            segments[-1].append(key)
    steps = []
    for seg in segments:
        fg, hand, jaw, pick = _node_info(graph, init, goal, seg[0])
        _, hand_end, _, place = _node_info(graph, init, goal, seg[-1])
        steps.append(
            ManipulationStep(
                grasp_id=fg,
                hand_pose=hand,
                place_hand_pose=hand_end,
                jaw_width=jaw,
                pick_pose=pick,
                place_pose=place,
                nodes=tuple(seg),
            )
        )
    return ManipulationSequence(steps=steps, path=nodes, edge_kinds=kinds, weight=weight)


def reorient(graph, query, robot, gripper, retraction, vertices, table_height=0.0, **ik_kwargs):
    """Validate a query, connect both poses and search."""
    query.validate(vertices, table_height)
    init = connect_pose(graph, query.init_pose, "init", robot, gripper, retraction, table_height, **ik_kwargs)
    goal = connect_pose(graph, query.goal_pose, "goal", robot, gripper, retraction, table_height, **ik_kwargs)
    return search(graph, init, goal)


def explicit_edges(graph, init=None, goal=None):
    """All edges as ``{(u, v): kind}`` with node keys, including query overlays."""
    edges = {}
    for u, v in graph.transit_edges():
        edges[((ROADMAP, u), (ROADMAP, v))] = "transit"
    for u, v in graph.transfer_edges():
        edges[((ROADMAP, u), (ROADMAP, v))] = "transfer"
    conns = [c for c in (init, goal) if c is not None]
    for c in conns:
        keys = c.keys()
        for a, b in c.transit_edges():
            edges[(keys[a], keys[b])] = "transit"
        for k, gid in c.transfer_edges:
            edges[tuple(sorted([keys[k], (ROADMAP, gid)]))] = "transfer"
    if init is not None and goal is not None:
        for a, fa in enumerate(init.grasp_ids):
            for b, fb in enumerate(goal.grasp_ids):
                if fa == fb:
                    edges[((INIT, a), (GOAL, b))] = "transfer"
    return edges
