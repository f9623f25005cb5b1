"""Kinematic model of the centaur platform: joints, groups, chains and FK.

Description file schema (YAML, ``format_version: 1``)::

    joints:  list of {name, type: revolute|prismatic, lower, upper, velocity, acceleration}
    groups:  mapping group name -> list of joint names
    chains:  mapping frame name -> {parent?: frame, home?: [x, y, z],
                                    segments: list of {xyz, rpy?, joint?, axis?, scale?}}

A segment first translates by ``xyz`` and rotates by the fixed ``rpy`` (in the
current frame), then applies its joint motion about/along ``axis`` scaled by
``scale`` (default 1). A chain with a ``parent`` continues from the end of the
parent chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import _kernels
from .transforms import Pose6D, rpy_matrix

FORMAT_VERSION = 1
JOINT_COUNT = 38
GROUP_SIZES = {
    "torso_yaw": 1,
    "left_arm": 6,
    "right_arm": 6,
    "gripper": 1,
    "leg_fl": 6,
    "leg_fr": 6,
    "leg_hl": 6,
    "leg_hr": 6,
}
UPPER_BODY_GROUPS = ("torso_yaw", "left_arm", "right_arm", "gripper")
BASE_COORDS = ("base_x", "base_y", "base_z", "base_roll", "base_pitch", "base_yaw")


class RobotDescriptionError(ValueError):
    """Malformed or inconsistent robot description."""


@dataclass(frozen=True)
class JointSpec:
    name: str
    type: str
    lower: float
    upper: float
    velocity: float
    acceleration: float

    @property
    def revolute(self) -> bool:
        return self.type == "revolute"


@dataclass(frozen=True, eq=False)
class Chain:
    name: str
    translations: np.ndarray  # (m, 3)
    rotations: np.ndarray  # (m, 3, 3)
    joints: np.ndarray  # (m,) joint index or -1
    types: np.ndarray  # (m,) 0 revolute, 1 prismatic
    axes: np.ndarray  # (m, 3)
    scales: np.ndarray  # (m,)
    home: np.ndarray | None = None

    def __len__(self):
        return len(self.joints)


@dataclass(frozen=True, eq=False)
class JointState:
    q: np.ndarray
    v: np.ndarray
    base: np.ndarray | None = None  # xyz + rpy when the floating base is tracked

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).copy())
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).copy())
        if self.q.shape != self.v.shape:
            raise ValueError("q and v must have the same shape")
        if self.base is not None:
            object.__setattr__(self, "base", np.asarray(self.base, dtype=float).reshape(6).copy())

    @property
    def has_base(self) -> bool:
        return self.base is not None


@dataclass(frozen=True, eq=False)
class RobotModel:
    name: str
    joints: tuple[JointSpec, ...]
    groups: dict[str, tuple[int, ...]]
    chains: dict[str, Chain]
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index.update({j.name: i for i, j in enumerate(self.joints)})

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown joint {name!r}") from None

    def indices(self, names) -> np.ndarray:
        return np.array([self.index(n) for n in names], dtype=np.int64)

    def group(self, name: str) -> np.ndarray:
        return np.array(self.groups[name], dtype=np.int64)

    def upper_body(self) -> np.ndarray:
        return np.concatenate([self.group(g) for g in UPPER_BODY_GROUPS])

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.lower for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.upper for j in self.joints])

    @property
    def velocity_limit(self) -> np.ndarray:
        return np.array([j.velocity for j in self.joints])

    @property
    def acceleration_limit(self) -> np.ndarray:
        return np.array([j.acceleration for j in self.joints])

    def zero_state(self) -> JointState:
        return JointState(np.zeros(self.n_joints), np.zeros(self.n_joints))

    def normalize(self, q) -> np.ndarray:
        """Map positions to [-1, 1] over the joint range (all joints or a matching subset)."""
        q = np.asarray(q, dtype=float)
        return 2.0 * (q - self.lower) / (self.upper - self.lower) - 1.0


def _parse_chain(name, raw, parsed, index, raw_chains, visiting):
    if name in parsed:
        return parsed[name]
    if name in visiting:
        raise RobotDescriptionError(f"chain cycle through {name!r}")
    visiting.add(name)
    segs = []
    parent = raw.get("parent")
    if parent is not None:
        if parent not in raw_chains:
            raise RobotDescriptionError(f"chain {name!r}: unknown parent {parent!r}")
        base = _parse_chain(parent, raw_chains[parent], parsed, index, raw_chains, visiting)
        segs.extend(
            zip(base.translations, base.rotations, base.joints, base.types, base.axes, base.scales)
        )
    for s in raw.get("segments", []):
        xyz = np.asarray(s.get("xyz", [0.0, 0.0, 0.0]), dtype=float)
        R = rpy_matrix(s["rpy"]) if "rpy" in s else np.eye(3)
        jname = s.get("joint")
        if jname is None:
            j, typ, axis = -1, 0, np.zeros(3)
        else:
            if jname not in index:
                raise RobotDescriptionError(f"chain {name!r}: unknown joint {jname!r}")
            j = index[jname][0]
            typ = 0 if index[jname][1] == "revolute" else 1
            axis = np.asarray(s.get("axis", [0.0, 0.0, 1.0]), dtype=float)
            if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
                raise RobotDescriptionError(f"chain {name!r}: joint axis must be unit length")
        segs.append((xyz, R, j, typ, axis, float(s.get("scale", 1.0))))
    visiting.discard(name)
    if not segs:
        raise RobotDescriptionError(f"chain {name!r} has no segments")
    t, R, j, typ, ax, sc = zip(*segs)
    home = raw.get("home")
    chain = Chain(
        name=name,
        translations=np.ascontiguousarray(t, dtype=float),
        rotations=np.ascontiguousarray(R, dtype=float),
        joints=np.asarray(j, dtype=np.int64),
        types=np.asarray(typ, dtype=np.int64),
        axes=np.ascontiguousarray(ax, dtype=float),
        scales=np.asarray(sc, dtype=float),
        home=None if home is None else np.asarray(home, dtype=float),
    )
    parsed[name] = chain
    return chain


def parse_robot_model(text: str) -> RobotModel:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise RobotDescriptionError(f"malformed description: {exc}") from exc
    if not isinstance(doc, dict):
        raise RobotDescriptionError("description must be a mapping")
    if doc.get("format_version") != FORMAT_VERSION:
        raise RobotDescriptionError(f"unsupported format_version {doc.get('format_version')!r}")

    joints = []
    for raw in doc.get("joints") or []:
        try:
            spec = JointSpec(
                name=str(raw["name"]),
                type=str(raw.get("type", "revolute")),
                lower=float(raw["lower"]),
                upper=float(raw["upper"]),
                velocity=float(raw["velocity"]),
                acceleration=float(raw["acceleration"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RobotDescriptionError(f"bad joint record {raw!r}: {exc}") from exc
        if spec.type not in ("revolute", "prismatic"):
            raise RobotDescriptionError(f"joint {spec.name!r}: unknown type {spec.type!r}")
        if not spec.lower < spec.upper:
            raise RobotDescriptionError(f"joint {spec.name!r}: lower limit must be below upper")
        if spec.velocity <= 0 or spec.acceleration <= 0:
            raise RobotDescriptionError(f"joint {spec.name!r}: velocity/acceleration limits must be positive")
        joints.append(spec)
    if len(joints) != JOINT_COUNT:
        raise RobotDescriptionError(f"expected {JOINT_COUNT} joints, found {len(joints)}")
    index = {}
    for i, j in enumerate(joints):
        if j.name in index:
            raise RobotDescriptionError(f"duplicate joint {j.name!r}")
        index[j.name] = (i, j.type)

    groups = {}
    seen = set()
    raw_groups = doc.get("groups") or {}
    for gname, size in GROUP_SIZES.items():
        members = raw_groups.get(gname)
        if members is None:
            raise RobotDescriptionError(f"missing group {gname!r}")
        if len(members) != size:
            raise RobotDescriptionError(f"group {gname!r} needs {size} joints, has {len(members)}")
        ids = []
        for m in members:
            if m not in index:
                raise RobotDescriptionError(f"group {gname!r}: unknown joint {m!r}")
            if index[m][0] in seen:
                raise RobotDescriptionError(f"joint {m!r} appears in more than one group")
            seen.add(index[m][0])
            ids.append(index[m][0])
        groups[gname] = tuple(ids)
    extra = set(raw_groups) - set(GROUP_SIZES)
    if extra:
        raise RobotDescriptionError(f"unknown groups {sorted(extra)}")

    raw_chains = doc.get("chains") or {}
    chains: dict[str, Chain] = {}
    for cname, raw in raw_chains.items():
        _parse_chain(cname, raw, chains, index, raw_chains, set())
    return RobotModel(
        name=str(doc.get("name", "robot")),
        joints=tuple(joints),
        groups=groups,
        chains={k: chains[k] for k in raw_chains},
    )


def load_robot_model(path: str | Path | None = None) -> RobotModel:
    """Load a description file; ``None`` loads the bundled centaur model."""
    if path is None:
        text = resources.files("locomanip.data").joinpath("centaur.yaml").read_text()
    else:
        text = Path(path).read_text()
    return parse_robot_model(text)


def fk_matrices(model: RobotModel, frame: str, q) -> np.ndarray:
    """Batch FK: homogeneous transforms of ``frame`` in the base frame, shape (k, 4, 4)."""
    try:
        chain = model.chains[frame]
    except KeyError:
        raise KeyError(f"unknown frame {frame!r}") from None
    q = np.ascontiguousarray(np.atleast_2d(q), dtype=float)
    if q.shape[1] != model.n_joints:
        raise ValueError(f"expected {model.n_joints} joint positions, got {q.shape[1]}")
    return _kernels.chain_fk_batch(
        q, chain.translations, chain.rotations, chain.joints, chain.types, chain.axes, chain.scales
    )


def forward_kinematics(model: RobotModel, state: JointState | np.ndarray, frame: str) -> Pose6D:
    q = state.q if isinstance(state, JointState) else np.asarray(state, dtype=float)
    return Pose6D.from_matrix(fk_matrices(model, frame, q)[0])


def fk_position(model: RobotModel, q, frame: str) -> np.ndarray:
    return fk_matrices(model, frame, q)[0, :3, 3]
