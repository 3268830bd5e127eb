"""File exports for inspection: hand glyphs, posed placements, graphs, sequences.

Every writer is byte-deterministic for identical input.
"""

import json
from pathlib import Path

import networkx as nx
import numpy as np

from . import transforms as tf
from .geometry.collide import box_corners
from .geometry.io import write_obj

# corner order of box_corners is (sx, sy, sz) over {-1, 1}^3, x-major
_BOX_FACES = np.array(
    [
        [0, 1, 3], [0, 3, 2],  # -x
        [4, 6, 7], [4, 7, 5],  # +x
        [0, 4, 5], [0, 5, 1],  # -y
        [2, 3, 7], [2, 7, 6],  # +y
        [0, 2, 6], [0, 6, 4],  # -z
        [1, 5, 7], [1, 7, 3],  # +z
    ]
)


def hand_glyph(gripper, hand_pose, jaw_width):
    """Vertices and triangles of the palm and finger boxes at ``hand_pose``."""
    verts, tris = [], []
    for k, (box_pose, half) in enumerate(gripper.hand_boxes(hand_pose, jaw_width)):
        verts.append(box_corners(box_pose, half))
        tris.append(_BOX_FACES + 8 * k)
    return np.vstack(verts), np.vstack(tris)


def write_hands_obj(path, gripper, hand_poses, jaw_widths, names=None, mesh=None, object_pose=None):
    """One OBJ group per hand glyph, optionally preceded by the posed object."""
    verts, tris, groups = [], [], []
    offset, start = 0, 0
    if mesh is not None:
        T = np.eye(4) if object_pose is None else object_pose
        verts.append(tf.apply(T, mesh.vertices))
        tris.append(mesh.triangles)
        groups.append(("object", slice(0, len(mesh.triangles))))
        offset, start = len(mesh.vertices), len(mesh.triangles)
    names = names or [f"grasp_{i}" for i in range(len(hand_poses))]
    for name, pose, jaw in zip(names, hand_poses, jaw_widths):
        v, t = hand_glyph(gripper, pose, jaw)
        verts.append(v)
        tris.append(t + offset)
        groups.append((name, slice(start, start + len(t))))
        offset += len(v)
        start += len(t)
    if not verts:
        Path(path).write_text("")
        return 0
    write_obj(path, np.vstack(verts), np.vstack(tris), groups)
    return len(hand_poses)


def write_placements_obj(path, mesh, rotmats, spacing=None):
    """Each placement posed on the table, laid out along x, one group per placement."""
    spacing = spacing or 3.0 * mesh.bounding_radius()
    verts, tris, groups = [], [], []
    for k, T in enumerate(rotmats):
        v = tf.apply(tf.translate(k * spacing, 0.0, 0.0) @ T, mesh.vertices)
        verts.append(v)
        tris.append(mesh.triangles + k * len(mesh.vertices))
        groups.append((f"placement_{k}", slice(k * len(mesh.triangles), (k + 1) * len(mesh.triangles))))
    write_obj(path, np.vstack(verts), np.vstack(tris), groups)


def write_graph(path, graph):
    """GraphML with typed edges; returns ``(nodes, edges)`` written."""
    G = graph.to_networkx()
    nx.write_graphml(G, str(path))
    return G.number_of_nodes(), G.number_of_edges()


def _pose_list(T):
    T = np.asarray(T, dtype=float)
    return [float(v) for v in np.concatenate([T[:3, :3].ravel(), T[:3, 3]])]


def sequence_document(seq, init_pose=None, goal_pose=None):
    doc = {
        "regrasp_count": seq.regrasp_count,
        "weight": float(seq.weight),
        "steps": [
            {
                "grasp": int(s.grasp_id),
                "jaw_width": float(s.jaw_width),
                "hand_pose": _pose_list(s.hand_pose),
                "place_hand_pose": _pose_list(s.place_hand_pose),
                "pick_pose": _pose_list(s.pick_pose),
                "place_pose": _pose_list(s.place_pose),
            }
            for s in seq.steps
        ],
    }
    if init_pose is not None:
        doc["init_pose"] = _pose_list(init_pose)
    if goal_pose is not None:
        doc["goal_pose"] = _pose_list(goal_pose)
    return doc


def write_sequence(path, seq, init_pose=None, goal_pose=None):
    """JSON document, one record per step; poses are 12 numbers (rotation rows, translation)."""
    Path(path).write_text(json.dumps(sequence_document(seq, init_pose, goal_pose), indent=2) + "\n")
