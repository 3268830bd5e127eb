"""Declarative YAML configuration for grippers, robots and workspaces.

Relative file paths inside a config are resolved against the directory of
the file that mentions them.
"""

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml
from scipy.spatial.transform import Rotation

from . import transforms as tf
from .graspplan import GraspParams, GripperModel
from .kinematics import Joint, RetractionSpec, RobotModel
from .placement import DEFAULT_STABILITY_THRESHOLD

DATA_DIR = Path(__file__).parent / "data"


class ConfigError(ValueError):
    pass


def _load_yaml(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def pose_from_spec(spec):
    """A pose given as ``{xyz, rpy}`` (radians, extrinsic xyz) or 12 row-major numbers."""
    if spec is None:
        return np.eye(4)
    if isinstance(spec, dict):
        if "matrix" in spec:
            return pose_from_numbers(spec["matrix"])
        rot = Rotation.from_euler("xyz", spec.get("rpy", [0.0, 0.0, 0.0])).as_matrix()
        return tf.make(rot, spec.get("xyz", [0.0, 0.0, 0.0]))
    return pose_from_numbers(spec)


def pose_from_numbers(values):
    values = np.asarray(values, dtype=float).ravel()
    if values.shape != (12,):
        raise ConfigError("a pose needs exactly 12 numbers (3x3 rotation rows, then translation)")
    return tf.make(values[:9].reshape(3, 3), values[9:])


def gripper_from_dict(data):
    known = {f.name for f in fields(GripperModel)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown gripper keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = tuple(float(v) for v in value) if isinstance(value, list) else value
    try:
        return GripperModel(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid gripper: {exc}") from None


def robot_from_dict(data):
    try:
        joints = tuple(
            Joint(
                axis=np.asarray(j["axis"], dtype=float),
                origin=pose_from_spec({"xyz": j.get("xyz", [0, 0, 0]), "rpy": j.get("rpy", [0, 0, 0])}),
                limits=(float(j["limits"][0]), float(j["limits"][1])),
                name=str(j.get("name", f"j{i}")),
            )
            for i, j in enumerate(data["joints"])
        )
        return RobotModel(
            name=str(data["name"]),
            joints=joints,
            base_pose=pose_from_spec(data.get("base")),
            tool_transform=pose_from_spec(data.get("tool")),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigError(f"invalid robot description: {exc!r}") from None


def load_gripper(path):
    return gripper_from_dict(_load_yaml(path))


def load_robot(path):
    return robot_from_dict(_load_yaml(path))


def bundled(name):
    """Path of a file shipped in the package data directory."""
    return DATA_DIR / name


@dataclass
class WorkspaceConfig:
    mesh: Path
    object_name: str
    gripper: GripperModel
    robots: list  # RobotModel instances
    mesh_scale: float = 1.0
    grasp: GraspParams = field(default_factory=GraspParams)
    stability_threshold: float = DEFAULT_STABILITY_THRESHOLD
    table_center: tuple = (0.45, 0.0)
    table_size: tuple = (0.6, 0.9)
    grid_counts: tuple = (7, 13)
    table_height: float = 0.0
    angle_count: int = 8
    retraction: RetractionSpec = field(default_factory=RetractionSpec)
    weights: tuple = (10.0, 1.0)  # (transit, transfer)
    ik_seeds: int = 8
    seed: int = 0
    store: Path = None

    def validate(self):
        if not Path(self.mesh).is_file():
            raise ConfigError(f"mesh file not found: {self.mesh}")
        g = self.grasp
        if not 0 < g.tau < np.pi / 2:
            raise ConfigError("tau must lie in (0, 90) degrees")
        if g.density is not None and g.density <= 0:
            raise ConfigError("density must be positive")
        if g.rotation_samples < 1:
            raise ConfigError("rotation_samples must be >= 1")
        if g.max_lever is not None and g.max_lever <= 0:
            raise ConfigError("max_lever must be positive")
        if self.stability_threshold < 0:
            raise ConfigError("stability_threshold must be non-negative")
        if self.angle_count < 1 or min(self.grid_counts) < 1:
            raise ConfigError("grid counts and angle count must be positive")
        if self.mesh_scale <= 0:
            raise ConfigError("mesh scale must be positive")
        names = [r.name for r in self.robots]
        if len(set(names)) != len(names):
            raise ConfigError("robot names must be unique")
        return self


_GRASP_KEYS = {
    "tau_deg": ("tau", np.deg2rad),
    "segmentation": ("segmentation", str),
    "density": ("density", float),
    "max_samples": ("max_samples", int),
    "merge_radius": ("merge_radius", float),
    "d_min": ("d_min", float),
    "d_max": ("d_max", float),
    "antipodal_tolerance_deg": ("antipodal_tolerance", np.deg2rad),
    "rotation_samples": ("rotation_samples", int),
    "max_lever": ("max_lever", float),
}


def load_workspace(path, overrides=None):
    """Read a workspace file; ``overrides`` is a flat ``{key: value}`` applied on top."""
    path = Path(path)
    data = _load_yaml(path)
    for key, value in (overrides or {}).items():
        _set_dotted(data, key, value)
    base = path.parent
    try:
        return _workspace_from_dict(data, base).validate()
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from None


def _set_dotted(data, key, value):
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def _resolve(base, value):
    p = Path(os.path.expandvars(str(value)))
    if str(value).startswith("bundled:"):
        return bundled(str(value)[len("bundled:"):])
    return p if p.is_absolute() else base / p


def _sub(data, base, key, loader, from_dict):
    spec = data[key]
    if isinstance(spec, dict):
        return from_dict(spec)
    return loader(_resolve(base, spec))


def _workspace_from_dict(data, base):
    obj = data["object"]
    grasp_data = data.get("grasp", {}) or {}
    grasp_kwargs = {}
    for key, value in grasp_data.items():
        if key not in _GRASP_KEYS:
            raise ConfigError(f"unknown grasp key {key!r}")
        name, conv = _GRASP_KEYS[key]
        grasp_kwargs[name] = None if value is None else conv(value)
    table = data.get("table", {}) or {}
    ret = data.get("retraction", {}) or {}
    robots_spec = data.get("robots", [])
    robots = [
        robot_from_dict(r) if isinstance(r, dict) else load_robot(_resolve(base, r))
        for r in robots_spec
    ]
    weights = data.get("weights", {}) or {}
    mesh_path = _resolve(base, obj["mesh"])
    store = data.get("store")
    return WorkspaceConfig(
        mesh=mesh_path,
        object_name=str(obj.get("name", mesh_path.stem)),
        mesh_scale=float(obj.get("scale", 1.0)),
        gripper=_sub(data, base, "gripper", load_gripper, gripper_from_dict),
        robots=robots,
        grasp=GraspParams(**grasp_kwargs),
        stability_threshold=float(data.get("stability_threshold", DEFAULT_STABILITY_THRESHOLD)),
        table_center=tuple(float(v) for v in table.get("center", (0.45, 0.0))),
        table_size=tuple(float(v) for v in table.get("size", (0.6, 0.9))),
        grid_counts=tuple(int(v) for v in table.get("grid", (7, 13))),
        table_height=float(table.get("height", 0.0)),
        angle_count=int(table.get("angles", 8)),
        retraction=RetractionSpec(
            handx_distance=float(ret.get("handx", 0.05)),
            worldz_distance=float(ret.get("worldz", 0.05)),
        ),
        weights=(float(weights.get("transit", 10.0)), float(weights.get("transfer", 1.0))),
        ik_seeds=int(data.get("ik_seeds", 8)),
        seed=int(data.get("seed", 0)),
        store=_resolve(base, store) if store else None,
    )
