"""Manipulation and locomotion morphology selection.

Each selector asks a vision-language client when one is supplied and falls
back to geometric rules when there is no client, it times out, or its reply
cannot be read. The rules:

* manipulation: ``dual_arm`` when the object's narrowest horizontal width
  (minimum caliper width of its box footprint in the robot frame) exceeds
  the gripper span, otherwise ``single_arm``;
* locomotion: ``leg`` when any occupied voxel inside the corridor ahead has
  its centre more than the wheel clearance above the ground, otherwise ``wheel``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy.spatial import ConvexHull, QhullError

from . import _kernels
from .data import data_path
from .planner import PlannerError
from .transforms import FrameTransform, Pose6D, transform_pose

MANIPULATION_CHOICES = ("single_arm", "dual_arm")
LOCOMOTION_CHOICES = ("wheel", "leg")


class MorphologyError(ValueError):
    pass


@dataclass(frozen=True)
class MorphologyConfig:
    gripper_span: float = 0.08
    right_shoulder: tuple[float, float, float] = (0.0, -0.22, 0.8)
    arm_reach: float = 0.7
    corridor_length: float = 1.0
    corridor_width: float = 0.8
    corridor_height: float = 1.3
    ground_z: float = -0.5
    wheel_clearance: float = 0.05
    voxel_cell: float = 0.05
    model: str = "gpt-4o"
    timeout: float = 20.0

    def __post_init__(self):
        for name in ("gripper_span", "arm_reach", "corridor_length", "corridor_width", "corridor_height", "voxel_cell", "timeout"):
            if not getattr(self, name) > 0:
                raise MorphologyError(f"{name} must be positive")
        if self.wheel_clearance < 0:
            raise MorphologyError("wheel_clearance must be non-negative")

    @property
    def grid_origin(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.ground_z])


def load_morphology_config(path: str | Path | None = None) -> MorphologyConfig:
    path = data_path("morphology.yaml") if path is None else Path(path)
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict) or doc.get("format_version") != 1:
        raise MorphologyError("morphology config needs format_version: 1")
    flat = {**(doc.get("manipulation") or {}), **(doc.get("locomotion") or {}), **(doc.get("vlm") or {})}
    if "right_shoulder" in flat:
        flat["right_shoulder"] = tuple(float(v) for v in flat["right_shoulder"])
    try:
        return MorphologyConfig(**flat)
    except TypeError as exc:
        raise MorphologyError(f"unknown morphology setting: {exc}") from None


# observations ---------------------------------------------------------------------


def _finite_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros((0, 3))
    pts = pts.reshape(-1, 3)
    bad = np.flatnonzero(~np.all(np.isfinite(pts), axis=1))
    if bad.size:
        shown = ", ".join(str(i) for i in bad[:10]) + (" ..." if bad.size > 10 else "")
        raise MorphologyError(f"non-finite points at indices {shown}")
    return pts


@dataclass(frozen=True, eq=False)
class SceneObservation:
    task_state: str
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))  # camera frame
    extrinsics: FrameTransform = field(default_factory=FrameTransform.identity)  # camera → robot
    head_image: str | None = None
    pelvis_image: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", _finite_points(self.points))
        for ref in (self.head_image, self.pelvis_image):
            if ref is not None and not Path(ref).is_file():
                raise MorphologyError(f"image asset {ref!r} not found")

    def points_in_robot_frame(self) -> np.ndarray:
        return self.extrinsics.apply_points(self.points)


def object_pose_in_robot_frame(pose_camera: Pose6D, extrinsics: FrameTransform) -> Pose6D:
    return transform_pose(extrinsics, pose_camera)


def read_xyz(path: str | Path) -> np.ndarray:
    """Columnar ``x y z`` text, one point per line; ``#`` starts a comment."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 3:
            raise MorphologyError(f"{path}:{lineno}: expected 3 columns")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise MorphologyError(f"{path}:{lineno}: not a number") from None
    return _finite_points(rows)


def write_xyz(path: str | Path, points) -> None:
    pts = _finite_points(points)
    Path(path).write_text("".join(f"{x:.6f} {y:.6f} {z:.6f}\n" for x, y, z in pts))


# voxel grid ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    origin: np.ndarray
    cell: float
    counts: dict[tuple[int, int, int], int]

    @property
    def occupied(self) -> set[tuple[int, int, int]]:
        return set(self.counts)

    def __len__(self) -> int:
        return len(self.counts)

    def centers(self) -> np.ndarray:
        if not self.counts:
            return np.zeros((0, 3))
        idx = np.array(sorted(self.counts), dtype=float)
        return self.origin + (idx + 0.5) * self.cell


def voxelize(points, cell: float, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    if not cell > 0:
        raise MorphologyError("cell size must be positive")
    origin = np.asarray(origin, dtype=float).reshape(3)
    pts = np.ascontiguousarray(_finite_points(points))
    if pts.shape[0] == 0:
        return VoxelGrid(origin, float(cell), {})
    idx = _kernels.voxel_indices(pts, origin, float(cell))
    keys, counts = np.unique(idx, axis=0, return_counts=True)
    return VoxelGrid(origin, float(cell), {tuple(int(v) for v in k): int(c) for k, c in zip(keys, counts)})


# decisions ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class MorphologyDecision:
    kind: str  # "Manipulation" or "Locomotion"
    choice: str
    rationale: str
    source: str  # "vlm" or "rules"

    def __post_init__(self):
        domain = {"Manipulation": MANIPULATION_CHOICES, "Locomotion": LOCOMOTION_CHOICES}.get(self.kind)
        if domain is None or self.choice not in domain:
            raise MorphologyError(f"invalid {self.kind} choice {self.choice!r}")
        if self.source not in ("vlm", "rules"):
            raise MorphologyError(f"invalid decision source {self.source!r}")

    def as_dict(self) -> dict:
        return {"kind": self.kind, "choice": self.choice, "rationale": self.rationale, "source": self.source}


@dataclass(frozen=True, eq=False)
class ObjectEstimate:
    """Mocked pose-estimation output: box pose in the robot frame and box size."""

    pose: Pose6D
    extents: np.ndarray

    def __post_init__(self):
        ext = np.asarray(self.extents, dtype=float).reshape(3)
        if not np.all(np.isfinite(ext)) or np.any(ext <= 0):
            raise MorphologyError("object extents must be positive")
        object.__setattr__(self, "extents", ext)


def footprint_width(estimate: ObjectEstimate) -> float:
    """Minimum caliper width of the box footprint on the robot's horizontal plane."""
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    corners = (signs * estimate.extents / 2) @ estimate.pose.rotation.T
    xy = corners[:, :2]
    try:
        hull = xy[ConvexHull(xy).vertices]
    except QhullError:  # footprint degenerates to a segment
        return 0.0
    best = np.inf
    for i in range(len(hull)):
        edge = hull[(i + 1) % len(hull)] - hull[i]
        normal = np.array([-edge[1], edge[0]]) / np.linalg.norm(edge)
        proj = (hull - hull[i]) @ normal
        best = min(best, float(proj.max() - proj.min()))
    return best


def manipulation_rules(estimate: ObjectEstimate | None, cfg: MorphologyConfig) -> MorphologyDecision:
    if estimate is None or getattr(estimate, "pose", None) is None:
        raise MorphologyError("object pose is missing; no decision without it")
    width = footprint_width(estimate)
    reach = float(np.linalg.norm(estimate.pose.position - np.asarray(cfg.right_shoulder)))
    where = "within" if reach <= cfg.arm_reach else "outside"
    choice = "dual_arm" if width > cfg.gripper_span else "single_arm"
    rationale = (
        f"footprint width {width:.3f} m {'exceeds' if choice == 'dual_arm' else 'fits'} gripper span "
        f"{cfg.gripper_span:.3f} m; object {reach:.3f} m from right shoulder ({where} reach {cfg.arm_reach:.2f} m)"
    )
    return MorphologyDecision("Manipulation", choice, rationale, "rules")


def corridor_rise(grid: VoxelGrid, cfg: MorphologyConfig) -> float:
    """Height of the highest occupied cell centre in the corridor above the ground (0 if empty)."""
    c = grid.centers()
    if c.shape[0] == 0:
        return 0.0
    inside = (
        (c[:, 0] >= 0.0)
        & (c[:, 0] <= cfg.corridor_length)
        & (np.abs(c[:, 1]) <= cfg.corridor_width / 2)
        & (c[:, 2] >= cfg.ground_z)
        & (c[:, 2] <= cfg.ground_z + cfg.corridor_height)
    )
    if not inside.any():
        return 0.0
    return float(c[inside, 2].max() - cfg.ground_z)


def locomotion_rules(grid: VoxelGrid, cfg: MorphologyConfig) -> MorphologyDecision:
    rise = corridor_rise(grid, cfg)
    choice = "leg" if rise > cfg.wheel_clearance else "wheel"
    rationale = f"highest obstacle in corridor rises {rise:.3f} m vs wheel clearance {cfg.wheel_clearance:.3f} m"
    return MorphologyDecision("Locomotion", choice, rationale, "rules")


def _ask(client, prompt: str, choices, cfg: MorphologyConfig) -> tuple[str | None, str]:
    try:
        reply = client.send(prompt, cfg.model, cfg.timeout)
    except PlannerError as exc:
        return None, f"vision-language endpoint failed ({exc})"
    except OSError as exc:
        return None, f"vision-language endpoint unreachable ({exc})"
    found = re.search(r"\b(" + "|".join(choices) + r")\b", reply)
    if not found:
        return None, "vision-language reply named no valid choice"
    return found.group(1), reply.strip()


def select_manipulation(
    task_state: str,
    head_image: str | None,
    estimate: ObjectEstimate | None,
    client=None,
    prompt_text: str = "",
    cfg: MorphologyConfig | None = None,
) -> MorphologyDecision:
    cfg = cfg or MorphologyConfig()
    rules = manipulation_rules(estimate, cfg)
    if client is None:
        return rules
    pose = estimate.pose
    prompt = (
        f"{prompt_text}\n\nTask state: {task_state}\nHead image: {head_image or 'none'}\n"
        f"Object position (m): {np.round(pose.position, 4).tolist()}\n"
        f"Object orientation (xyzw): {np.round(pose.orientation, 4).tolist()}\n"
        f"Object size (m): {np.round(estimate.extents, 4).tolist()}\n"
    )
    choice, note = _ask(client, prompt, MANIPULATION_CHOICES, cfg)
    if choice is None:
        return MorphologyDecision("Manipulation", rules.choice, f"{note}; fell back to rules: {rules.rationale}", "rules")
    return MorphologyDecision("Manipulation", choice, note, "vlm")


def select_locomotion(
    task_state: str,
    pelvis_image: str | None,
    grid: VoxelGrid,
    client=None,
    prompt_text: str = "",
    cfg: MorphologyConfig | None = None,
) -> MorphologyDecision:
    cfg = cfg or MorphologyConfig()
    rules = locomotion_rules(grid, cfg)
    if client is None:
        return rules
    cells = "; ".join(f"{tuple(k)}:{n}" for k, n in sorted(grid.counts.items()))
    prompt = (
        f"{prompt_text}\n\nTask state: {task_state}\nPelvis image: {pelvis_image or 'none'}\n"
        f"Voxel grid origin {grid.origin.tolist()}, cell {grid.cell} m, occupied cells (index:count): {cells or 'none'}\n"
    )
    choice, note = _ask(client, prompt, LOCOMOTION_CHOICES, cfg)
    if choice is None:
        return MorphologyDecision("Locomotion", rules.choice, f"{note}; fell back to rules: {rules.rationale}", "rules")
    return MorphologyDecision("Locomotion", choice, note, "vlm")


def observation_grid(obs: SceneObservation, cfg: MorphologyConfig) -> VoxelGrid:
    return voxelize(obs.points_in_robot_frame(), cfg.voxel_cell, cfg.grid_origin)


# scenario files -----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    kind: str  # "manipulation" or "locomotion"
    task_state: str
    expected: str
    extrinsics: FrameTransform
    object_camera: Pose6D | None = None
    extents: np.ndarray | None = None
    points: np.ndarray | None = None

    def estimate(self) -> ObjectEstimate:
        return ObjectEstimate(object_pose_in_robot_frame(self.object_camera, self.extrinsics), self.extents)

    def observation(self) -> SceneObservation:
        return SceneObservation(self.task_state, self.points, self.extrinsics)


def _pose(rec) -> Pose6D:
    """``{xyz, quat (x, y, z, w)}`` or ``{xyz, rpy}``."""
    if "quat" in rec:
        q = np.asarray(rec["quat"], dtype=float)
        return Pose6D(rec["xyz"], q / np.linalg.norm(q))
    return Pose6D.from_xyz_rpy(rec["xyz"], rec["rpy"])


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    doc = yaml.safe_load(path.read_text())
    try:
        kind = doc["kind"]
        extrinsics = FrameTransform.from_pose(_pose(doc["extrinsics"]))
        common = dict(name=doc["name"], kind=kind, task_state=doc.get("task_state", ""), expected=doc["expected"], extrinsics=extrinsics)
        if kind == "manipulation":
            obj = doc["object"]
            return Scenario(
                **common,
                object_camera=_pose(obj),
                extents=np.asarray(obj["extents"], dtype=float),
            )
        if kind == "locomotion":
            return Scenario(**common, points=read_xyz(path.parent / doc["cloud"]))
    except (KeyError, TypeError) as exc:
        raise MorphologyError(f"{path.name}: malformed scenario ({exc})") from None
    raise MorphologyError(f"{path.name}: unknown scenario kind {kind!r}")


def scenario_paths(directory: str | Path | None = None) -> list[Path]:
    root = data_path("scenarios") if directory is None else Path(directory)
    return sorted(root.glob("*.yaml"))


def decide_scenario(scn: Scenario, cfg: MorphologyConfig, client=None, prompts=None) -> MorphologyDecision:
    if scn.kind == "manipulation":
        text = prompts.manipulation if prompts else ""
        return select_manipulation(scn.task_state, None, scn.estimate(), client, text, cfg)
    text = prompts.locomotion if prompts else ""
    return select_locomotion(scn.task_state, None, observation_grid(scn.observation(), cfg), client, text, cfg)
