"""Task rewards and observations for the four learned whole-body skills.

All reward functions are pure. Component functions accept scalars or numpy
arrays; ``total_reward_batch`` runs the fused compiled kernel.

Frame conventions used for the orientation term: for drawer and door handles
the object's inward axis is the handle's -x (x points at the robot) and its up
axis is +z. For picking, the object's up axis is -x and its inward axis is -z
so that the gripper approaches top-down. ``d_x``/``d_z`` are the dot products of
the gripper forward/up axes with those object axes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import _kernels
from .robot import RobotModel
from .transforms import Pose6D


class RewardDomainError(ValueError):
    pass


class ContractError(ValueError):
    """A required input for the selected task is missing."""


class TaskKind(enum.Enum):
    DrawerOpen = "drawer_open"
    DoorOpen = "door_open"
    SingleArmPick = "single_arm_pick"
    DualArmPick = "dual_arm_pick"


@dataclass(frozen=True, eq=False)
class RewardParams:
    alpha: np.ndarray
    beta: float

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).reshape(7)
        if not np.all(np.isfinite(alpha)) or not np.isfinite(self.beta):
            raise ValueError("reward parameters must be finite")
        if alpha[5] < 0:
            raise ValueError("penalty weight alpha6 must be non-negative")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", float(self.beta))


@dataclass(frozen=True, eq=False)
class GripperScene:
    d_l: float = 0.0
    d_r: float = 0.0
    d_x: float = 0.0
    d_z: float = 0.0
    d_t: float = 0.0
    d_b: float = 0.0
    around: bool = False
    action: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in ("d_l", "d_r", "d_t", "d_b"):
            if getattr(self, name) < 0:
                raise RewardDomainError(f"{name} must be non-negative")
        for name in ("d_x", "d_z"):
            if abs(getattr(self, name)) > 1.0:
                raise RewardDomainError(f"{name} is a dot product of unit axes, |{name}| <= 1")
        object.__setattr__(self, "action", np.asarray(self.action, dtype=float).ravel())


@dataclass(frozen=True)
class TaskProgress:
    l_drawer: float | None = None
    angle_handle: float | None = None
    angle_door: float | None = None
    h: bool | None = None

    def __post_init__(self):
        for name in ("l_drawer", "angle_handle", "angle_door"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise RewardDomainError(f"{name} must be non-negative")


# Component terms ------------------------------------------------------------


def r_reach(d):
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise RewardDomainError("distance must be non-negative")
    out = (1.0 / (1.0 + d * d)) ** 2
    return float(out) if out.ndim == 0 else out


def r_rot(d_x, d_z):
    d_x = np.asarray(d_x, dtype=float)
    d_z = np.asarray(d_z, dtype=float)
    if np.any(np.abs(d_x) > 1.0) or np.any(np.abs(d_z) > 1.0):
        raise RewardDomainError("axis dot products must lie in [-1, 1]")
    out = np.sign(d_x) * d_x * d_x + np.sign(d_z) * d_z * d_z
    return float(out) if out.ndim == 0 else out


def r_finger(d_t, d_b, beta):
    d_t = np.asarray(d_t, dtype=float)
    d_b = np.asarray(d_b, dtype=float)
    if np.any(d_t < 0) or np.any(d_b < 0):
        raise RewardDomainError("finger distances must be non-negative")
    out = beta - (d_t + d_b)
    return float(out) if np.ndim(out) == 0 else out


def r_penalty(a) -> float:
    a = np.asarray(a, dtype=float)
    return -float(np.dot(a.ravel(), a.ravel()))


def r_around(scene: GripperScene) -> float:
    return 0.5 if scene.around else 0.0


def _need(progress, name, kind):
    value = getattr(progress, name)
    if value is None:
        raise ContractError(f"{kind.value} reward needs progress.{name}")
    return value


def task_reward(kind: TaskKind, scene: GripperScene, progress: TaskProgress, params: RewardParams) -> float:
    ra = r_around(scene)
    a7 = params.alpha[6]
    if kind is TaskKind.DrawerOpen:
        length = _need(progress, "l_drawer", kind)
        return a7 * ra + length * ra + length
    if kind is TaskKind.DoorOpen:
        handle = _need(progress, "angle_handle", kind)
        door = _need(progress, "angle_door", kind)
        return a7 * ra + handle * ra + handle + door
    if kind is TaskKind.SingleArmPick:
        return a7 * ra + float(bool(_need(progress, "h", kind)))
    if kind is TaskKind.DualArmPick:
        return float(bool(_need(progress, "h", kind)))
    raise ContractError(f"unsupported task {kind!r}")


def combine(params: RewardParams, r_l, r_r, r_rot_, r_finger_, r_task, r_penalty_):
    """Weighted sum of already-evaluated components."""
    a = params.alpha
    return a[0] * r_l + a[1] * r_r + a[2] * r_rot_ + a[3] * r_finger_ + a[4] * r_task + a[5] * r_penalty_


def total_reward(
    kind: TaskKind,
    scene: GripperScene,
    progress: TaskProgress,
    params: RewardParams | None = None,
) -> float:
    params = preset(kind) if params is None else params
    return float(
        combine(
            params,
            r_reach(scene.d_l),
            r_reach(scene.d_r),
            r_rot(scene.d_x, scene.d_z),
            r_finger(scene.d_t, scene.d_b, params.beta),
            task_reward(kind, scene, progress, params),
            r_penalty(scene.action),
        )
    )


def total_reward_batch(params: RewardParams, d_l, d_r, d_x, d_z, d_t, d_b, r_task, action_sqnorm):
    """Vectorised total reward; ``r_task`` is pre-evaluated per sample."""
    cols = [np.ascontiguousarray(c, dtype=float) for c in (d_l, d_r, d_x, d_z, d_t, d_b, r_task, action_sqnorm)]
    if np.any(cols[0] < 0) or np.any(cols[1] < 0) or np.any(cols[4] < 0) or np.any(cols[5] < 0):
        raise RewardDomainError("distances must be non-negative")
    if np.any(np.abs(cols[2]) > 1) or np.any(np.abs(cols[3]) > 1):
        raise RewardDomainError("axis dot products must lie in [-1, 1]")
    weights = np.ascontiguousarray(params.alpha[:6])
    return _kernels.total_reward_batch(weights, params.beta, *cols)


# Presets ---------------------------------------------------------------------


def preset_text() -> str:
    return resources.files("locomanip.data").joinpath("reward_presets.yaml").read_text()


def load_presets(path: str | Path | None = None) -> dict[TaskKind, RewardParams]:
    text = preset_text() if path is None else Path(path).read_text()
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict) or doc.get("format_version") != 1:
        raise ValueError("reward preset file needs format_version: 1")
    out = {}
    for key, raw in doc["presets"].items():
        alpha = raw["alpha"]
        if len(alpha) != 7:
            raise ValueError(f"preset {key!r}: alpha needs 7 entries")
        out[TaskKind(key)] = RewardParams(np.array(alpha, dtype=float), float(raw["beta"]))
    missing = set(TaskKind) - set(out)
    if missing:
        raise ValueError(f"missing presets for {sorted(k.value for k in missing)}")
    return out


_PRESETS: dict[TaskKind, RewardParams] | None = None


def preset(kind: TaskKind) -> RewardParams:
    global _PRESETS
    if _PRESETS is None:
        _PRESETS = load_presets()
    return _PRESETS[kind]


# Action spaces and observations ----------------------------------------------

BASE_ACTION = ("base_x", "base_y", "base_z", "base_roll", "base_pitch", "base_yaw")


def action_layout(kind: TaskKind, model: RobotModel) -> list[str]:
    """Coordinate names of the reduced action space for ``kind``.

    Single-arm skills act on 14 coordinates; the dual-arm skill drops the
    gripper (held closed) and adds the left arm for 19.
    """
    names = model.joint_names
    right = [names[i] for i in model.group("right_arm")]
    torso = [names[i] for i in model.group("torso_yaw")]
    if kind is TaskKind.DualArmPick:
        left = [names[i] for i in model.group("left_arm")]
        return right + list(BASE_ACTION) + torso + left
    gripper = [names[i] for i in model.group("gripper")]
    return right + list(BASE_ACTION) + torso + gripper


@dataclass
class WorldSnapshot:
    """Quantities an observation may draw from. Poses are in the robot base frame."""

    q: np.ndarray | None = None
    v: np.ndarray | None = None
    base_pose: np.ndarray | None = None  # xyz + rpy in world
    drawer_length: float | None = None
    handle_pose: Pose6D | None = None
    gripper_pose: Pose6D | None = None
    handle_angle: float | None = None
    door_angle: float | None = None
    object_pose: Pose6D | None = None
    left_ee_pose: Pose6D | None = None
    right_ee_pose: Pose6D | None = None
    object_left_side: np.ndarray | None = None
    object_right_side: np.ndarray | None = None


OBSERVATION_FIELDS = {
    TaskKind.DrawerOpen: ("q", "v", "drawer_length", "handle_pose", "gripper_pose"),
    TaskKind.DoorOpen: ("base_pose", "q", "handle_pose", "gripper_pose", "handle_angle", "door_angle"),
    TaskKind.SingleArmPick: ("base_pose", "q", "object_pose", "gripper_pose"),
    TaskKind.DualArmPick: (
        "base_pose",
        "q",
        "object_pose",
        "left_ee_pose",
        "right_ee_pose",
        "object_left_side",
        "object_right_side",
    ),
}

OBSERVATION_SIZES = {
    TaskKind.DrawerOpen: 14 + 14 + 1 + 3,
    TaskKind.DoorOpen: 6 + 6 + 7 + 7 + 1 + 1,
    TaskKind.SingleArmPick: 6 + 6 + 7 + 7,
    TaskKind.DualArmPick: 6 + 12 + 7 + 7 + 7 + 3 + 3,
}


def assemble_observation(kind: TaskKind, model: RobotModel, snap: WorldSnapshot) -> np.ndarray:
    for name in OBSERVATION_FIELDS[kind]:
        if getattr(snap, name) is None:
            raise ContractError(f"{kind.value} observation needs snapshot.{name}")
    q = np.asarray(snap.q, dtype=float)
    if kind is TaskKind.DrawerOpen:
        upper = model.upper_body()
        lo, hi = model.lower[upper], model.upper[upper]
        parts = [
            2.0 * (q[upper] - lo) / (hi - lo) - 1.0,
            0.1 * np.asarray(snap.v, dtype=float)[upper],
            [snap.drawer_length],
            snap.handle_pose.position - snap.gripper_pose.position,
        ]
    elif kind is TaskKind.DoorOpen:
        parts = [
            snap.base_pose,
            q[model.group("right_arm")],
            snap.handle_pose.as_vector(),
            snap.gripper_pose.as_vector(),
            [snap.handle_angle],
            [snap.door_angle],
        ]
    elif kind is TaskKind.SingleArmPick:
        parts = [snap.base_pose, q[model.group("right_arm")], snap.object_pose.as_vector(), snap.gripper_pose.as_vector()]
    else:
        arms = np.concatenate([q[model.group("left_arm")], q[model.group("right_arm")]])
        parts = [
            snap.base_pose,
            arms,
            snap.object_pose.as_vector(),
            snap.left_ee_pose.as_vector(),
            snap.right_ee_pose.as_vector(),
            snap.left_ee_pose.position - np.asarray(snap.object_left_side, dtype=float),
            snap.right_ee_pose.position - np.asarray(snap.object_right_side, dtype=float),
        ]
    obs = np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])
    assert obs.shape[0] == OBSERVATION_SIZES[kind]
    return obs


# Toy environment -----------------------------------------------------------------


class ToyReachEnv:
    """Planar two-link arm reaching a point; exists to sanity-check reward shaping.

    Not a training environment: it only exposes the reach reward and its
    finite-difference gradient in joint space.
    """

    def __init__(self, target=(0.5, 0.5), links=(0.5, 0.5), params: RewardParams | None = None):
        self.target = np.asarray(target, dtype=float)
        self.links = links
        self.params = params or preset(TaskKind.SingleArmPick)

    def tip(self, q) -> np.ndarray:
        l1, l2 = self.links
        return np.array(
            [
                l1 * np.cos(q[0]) + l2 * np.cos(q[0] + q[1]),
                l1 * np.sin(q[0]) + l2 * np.sin(q[0] + q[1]),
            ]
        )

    def reward(self, q, action=(0.0, 0.0)) -> float:
        d = float(np.linalg.norm(self.tip(q) - self.target))
        return self.params.alpha[0] * r_reach(d) + self.params.alpha[5] * r_penalty(action)

    def gradient(self, q, eps: float = 1e-6) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        g = np.zeros(2)
        for i in range(2):
            e = np.zeros(2)
            e[i] = eps
            g[i] = (self.reward(q + e) - self.reward(q - e)) / (2 * eps)
        return g
