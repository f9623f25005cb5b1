"""Kinematic world state: robot base and joints, articulated fixtures, objects,
places, fiducial tags and terrain, plus the couplings between them.

World frame: z up, ground at z = 0. The robot base sits ``base_height`` above
the ground and moves in the plane (x, y, yaw). Skills and the end-effector
trace use the right end effector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..data import data_path
from ..robot import RobotModel, fk_matrices, load_robot_model
from ..transforms import FrameTransform, Pose6D


class SimError(ValueError):
    """Malformed world file or simulator configuration."""


class SimPreconditionError(RuntimeError):
    """A skill or action is not applicable to the current world."""


class UnknownTagError(SimError):
    pass


def wrap_angle(a: float) -> float:
    return float((a + math.pi) % (2 * math.pi) - math.pi)


def rot_z(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def planar_matrix(x: float, y: float, yaw: float, z: float = 0.0) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = rot_z(yaw)
    T[:3, 3] = (x, y, z)
    return T


# configuration ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    tick: float = 0.05
    base_height: float = 0.5
    grasp_distance: float = 0.02
    gripper_closed: float = 0.03
    fov_deg: float = 120.0
    camera_range: float = 6.0
    single_anchor: tuple[float, float, float] = (0.55, -0.22, 0.55)
    dual_anchor: tuple[float, float, float] = (0.55, 0.0, 0.55)
    wheel_speed: float = 0.5
    leg_speed: float = 0.25
    turn_rate: float = 1.0
    search_turn_rate: float = 1.0
    drawer_fraction: float = 0.5
    door_angle_deg: float = 30.0
    lift: float = 0.1
    place_tolerance: float = 0.02
    place_duration: float = 1.0
    place_reach: float = 0.3
    drawer_visible_fraction: float = 0.5

    def __post_init__(self):
        for name in ("tick", "grasp_distance", "camera_range", "wheel_speed", "leg_speed", "turn_rate", "search_turn_rate", "place_duration"):
            if not getattr(self, name) > 0:
                raise SimError(f"{name} must be positive")
        if not 0 < self.fov_deg < 360:
            raise SimError("fov_deg must lie in (0, 360)")


def load_sim_config(path: str | Path | None = None) -> SimConfig:
    path = data_path("sim.yaml") if path is None else Path(path)
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict) or doc.get("format_version") != 1:
        raise SimError("sim config needs format_version: 1")
    grasp, camera, anchors = doc.get("grasp") or {}, doc.get("camera") or {}, doc.get("anchors") or {}
    loco, success, place = doc.get("locomotion") or {}, doc.get("success") or {}, doc.get("place") or {}
    flat = {
        "tick": doc.get("tick"),
        "base_height": doc.get("base_height"),
        "grasp_distance": grasp.get("distance"),
        "gripper_closed": grasp.get("gripper_closed"),
        "fov_deg": camera.get("fov_deg"),
        "camera_range": camera.get("range"),
        "single_anchor": tuple(anchors["single_arm"]) if "single_arm" in anchors else None,
        "dual_anchor": tuple(anchors["dual_arm"]) if "dual_arm" in anchors else None,
        "wheel_speed": loco.get("wheel_speed"),
        "leg_speed": loco.get("leg_speed"),
        "turn_rate": loco.get("turn_rate"),
        "search_turn_rate": loco.get("search_turn_rate"),
        "drawer_fraction": success.get("drawer_fraction"),
        "door_angle_deg": success.get("door_angle_deg"),
        "lift": success.get("lift"),
        "place_tolerance": success.get("place_tolerance"),
        "place_duration": place.get("duration"),
        "place_reach": place.get("reach"),
        "drawer_visible_fraction": (doc.get("detection") or {}).get("drawer_visible_fraction"),
    }
    return SimConfig(**{k: v for k, v in flat.items() if v is not None})


# scene items ---------------------------------------------------------------------------------


@dataclass
class Drawer:
    name: str
    handle_closed: np.ndarray
    axis_yaw: float  # direction the drawer slides out
    travel: float = 0.3
    length: float = 0.0
    tag: int | None = None

    @property
    def pull_axis(self) -> np.ndarray:
        return np.array([math.cos(self.axis_yaw), math.sin(self.axis_yaw), 0.0])

    @property
    def handle(self) -> np.ndarray:
        return self.handle_closed + self.length * self.pull_axis

    @property
    def inward_axis(self) -> np.ndarray:
        return -self.pull_axis

    @property
    def facing_yaw(self) -> float:
        return wrap_angle(self.axis_yaw + math.pi)

    def state(self) -> dict:
        return {"length": self.length}


@dataclass
class Door:
    name: str
    handle_rest: np.ndarray
    normal_yaw: float  # direction the door swings open, away from the robot
    radius: float = 0.7
    handle_travel: float = 0.8
    unlatch: float = 0.5
    door_travel: float = math.pi / 2
    handle_angle: float = 0.0
    door_angle: float = 0.0
    unlatched: bool = False
    tag: int | None = None

    @property
    def normal(self) -> np.ndarray:
        return np.array([math.cos(self.normal_yaw), math.sin(self.normal_yaw), 0.0])

    @property
    def handle(self) -> np.ndarray:
        return self.handle_rest + self.radius * math.sin(self.door_angle) * self.normal

    @property
    def inward_axis(self) -> np.ndarray:
        return self.normal

    @property
    def facing_yaw(self) -> float:
        return wrap_angle(self.normal_yaw)

    def state(self) -> dict:
        return {"handle_angle": self.handle_angle, "door_angle": self.door_angle, "unlatched": self.unlatched}


@dataclass
class SimObject:
    name: str
    position: np.ndarray
    extents: np.ndarray
    yaw: float = 0.0
    inside: str | None = None  # drawer holding the object
    approach_yaw: float | None = None
    held_by: str | None = None  # "right" or "dual"
    grasp_offset: np.ndarray | None = None
    grasp_z: float | None = None
    placed_on: str | None = None
    drawer_offset: np.ndarray | None = None

    @property
    def rotation(self) -> np.ndarray:
        return rot_z(self.yaw)

    def pose(self) -> Pose6D:
        return Pose6D.from_matrix(planar_matrix(*self.position[:2], self.yaw, self.position[2]))

    def side_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Contact points for a two-handed pick: (left, right) along the object's y axis."""
        half = self.rotation @ np.array([0.0, self.extents[1] / 2, 0.0])
        return self.position + half, self.position - half

    def lifted(self) -> float:
        return 0.0 if self.grasp_z is None else float(self.position[2] - self.grasp_z)

    def state(self) -> dict:
        return {"position": self.position.tolist(), "held_by": self.held_by, "placed_on": self.placed_on}


@dataclass
class Place:
    name: str
    position: np.ndarray  # centre of the support surface
    approach_yaw: float | None = None


@dataclass
class Tag:
    id: int
    position: np.ndarray
    yaw: float = 0.0  # tag z axis (outward normal) points along this heading

    def pose(self) -> Pose6D:
        # tag frame: z out of the tag, x along the horizontal, y down the tag face
        z = np.array([math.cos(self.yaw), math.sin(self.yaw), 0.0])
        y = np.array([0.0, 0.0, -1.0])
        x = np.cross(y, z)
        T = np.eye(4)
        T[:3, :3] = np.column_stack([x, y, z])
        T[:3, 3] = self.position
        return Pose6D.from_matrix(T)


@dataclass(frozen=True)
class TerrainBlock:
    x: tuple[float, float]
    y: tuple[float, float]
    height: float

    def contains(self, px: float, py: float) -> bool:
        return self.x[0] <= px <= self.x[1] and self.y[0] <= py <= self.y[1]


# trace -------------------------------------------------------------------------------------------


@dataclass
class EndEffectorTrace:
    """Right end-effector position per simulated tick, in the world and base frames."""

    t: list[float] = field(default_factory=list)
    world: list[tuple[float, float, float]] = field(default_factory=list)
    base: list[tuple[float, float, float]] = field(default_factory=list)

    COLUMNS = ("t", "x", "y", "z", "base_x", "base_y", "base_z")

    def append(self, t: float, world_xyz, base_xyz) -> None:
        if self.t and not t > self.t[-1]:
            raise SimError(f"trace time must increase strictly ({t!r} after {self.t[-1]!r})")
        self.t.append(float(t))
        self.world.append(tuple(float(v) for v in world_xyz))
        self.base.append(tuple(float(v) for v in base_xyz))

    def __len__(self) -> int:
        return len(self.t)

    def array(self) -> np.ndarray:
        if not self.t:
            return np.zeros((0, 7))
        return np.column_stack([self.t, np.array(self.world), np.array(self.base)])

    def to_csv(self) -> str:
        lines = [",".join(self.COLUMNS)]
        for t, w, b in zip(self.t, self.world, self.base):
            lines.append(",".join(repr(v) for v in (t, *w, *b)))
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())


# world -------------------------------------------------------------------------------------------


@dataclass
class FixtureGrip:
    fixture: str
    ee_position: np.ndarray
    ee_rotation: np.ndarray
    length: float = 0.0
    push_origin: np.ndarray | None = None


class SimWorld:
    """One episode's mutable world. Not thread-safe; use one world per episode."""

    def __init__(
        self,
        model: RobotModel,
        config: SimConfig,
        name: str = "world",
        base=(0.0, 0.0, 0.0),
        q=None,
        fixtures=(),
        objects=(),
        places=(),
        tags=(),
        terrain=(),
    ):
        self.model = model
        self.config = config
        self.name = name
        self.base = np.array(base, dtype=float).reshape(3)
        self.q = np.zeros(model.n_joints) if q is None else np.array(q, dtype=float).reshape(model.n_joints)
        self.fixtures: dict[str, Drawer | Door] = {f.name: f for f in fixtures}
        self.objects: dict[str, SimObject] = {o.name: o for o in objects}
        self.places: dict[str, Place] = {p.name: p for p in places}
        self.tags: dict[int, Tag] = {t.id: t for t in tags}
        self.terrain: list[TerrainBlock] = list(terrain)
        names = list(self.fixtures) + list(self.objects) + list(self.places)
        if len(set(names)) != len(names):
            raise SimError("fixture, object and place names must be unique")
        for obj in self.objects.values():
            if obj.inside is not None:
                drawer = self.fixtures.get(obj.inside)
                if not isinstance(drawer, Drawer):
                    raise SimError(f"object {obj.name!r} is inside unknown drawer {obj.inside!r}")
                obj.drawer_offset = obj.position - drawer.handle
        for fx in self.fixtures.values():
            if fx.tag is not None and fx.tag not in self.tags:
                raise SimError(f"fixture {fx.name!r} refers to missing tag {fx.tag}")
        self.known: set[str] = {f.name for f in self.fixtures.values() if f.tag is None} | set(self.places)
        self.grip: FixtureGrip | None = None
        self.time = 0.0
        self.ticks = 0
        self.velocity = np.zeros(model.n_joints)
        self.base_velocity = np.zeros(3)
        self.trace = EndEffectorTrace()
        self._record()

    # kinematics -----------------------------------------------------------------------------

    def base_matrix(self) -> np.ndarray:
        x, y, yaw = self.base
        return planar_matrix(x, y, yaw, self.config.base_height)

    def frame_matrix(self, frame: str) -> np.ndarray:
        return self.base_matrix() @ fk_matrices(self.model, frame, self.q)[0]

    def to_base(self, points) -> np.ndarray:
        T = np.linalg.inv(self.base_matrix())
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ T[:3, :3].T + T[:3, 3]

    def ee_matrix(self, side: str = "right") -> np.ndarray:
        return self.frame_matrix(f"{side}_ee")

    def ee_position(self, side: str = "right") -> np.ndarray:
        return self.ee_matrix(side)[:3, 3]

    @property
    def gripper(self) -> float:
        return float(self.q[self.model.index("gripper")])

    @property
    def upper_q(self) -> np.ndarray:
        return self.q[self.model.upper_body()]

    # lookups ----------------------------------------------------------------------------------

    def item(self, name: str):
        for table in (self.fixtures, self.objects, self.places):
            if name in table:
                return table[name]
        raise SimPreconditionError(f"nothing named {name!r} in world {self.name!r}")

    def target_point(self, name: str) -> np.ndarray:
        item = self.item(name)
        if isinstance(item, (Drawer, Door)):
            return item.handle.copy()
        return item.position.copy()

    def held_object(self) -> SimObject | None:
        for obj in self.objects.values():
            if obj.held_by is not None:
                return obj
        return None

    def resolve_tag(self, tag) -> Tag:
        """Tag by numeric id (int or digit string) or by the name of a tagged fixture."""
        if isinstance(tag, str) and tag in self.fixtures:
            fx = self.fixtures[tag]
            if fx.tag is None:
                raise UnknownTagError(f"fixture {tag!r} carries no tag")
            return self.tags[fx.tag]
        try:
            key = int(tag)
        except (TypeError, ValueError):
            raise UnknownTagError(f"unknown tag {tag!r}") from None
        if key not in self.tags:
            raise UnknownTagError(f"unknown tag {tag!r}")
        return self.tags[key]

    def terrain_height(self, x: float, y: float) -> float:
        return max((b.height for b in self.terrain if b.contains(x, y)), default=0.0)

    # stepping ---------------------------------------------------------------------------------

    def release_fixture(self) -> None:
        self.grip = None

    def advance(self, upper_q=None, base=None, contact: tuple[str, str] | None = None) -> None:
        """Move to the given pose over one tick, then update grasps, fixtures and the trace.

        ``contact`` is ``("right", name)`` or ``("dual", name)`` for the item the
        running skill may attach to.
        """
        dt = self.config.tick
        q_new = self.q.copy()
        if upper_q is not None:
            q_new[self.model.upper_body()] = upper_q
        base_new = self.base.copy() if base is None else np.asarray(base, dtype=float).reshape(3)
        self.velocity = (q_new - self.q) / dt
        step = base_new - self.base
        step[2] = wrap_angle(step[2])
        self.base_velocity = step / dt
        self.q = q_new
        self.base = np.array([base_new[0], base_new[1], wrap_angle(base_new[2])])
        self.ticks += 1
        self.time = round(self.ticks * dt, 12)
        self._update_contacts(contact)
        self._couple()
        self._record()

    def _record(self) -> None:
        ee = self.ee_position()
        self.trace.append(self.time, ee, self.to_base(ee)[0])

    def _update_contacts(self, contact) -> None:
        cfg = self.config
        closed = self.gripper <= cfg.gripper_closed
        if not closed:
            self.grip = None
            for obj in self.objects.values():
                if obj.held_by == "right":
                    obj.held_by = None
        if contact is None:
            return
        mode, name = contact
        E = self.ee_matrix()
        if mode == "dual":
            obj = self.objects.get(name)
            if obj is None or obj.held_by is not None:
                return
            left, right = obj.side_points()
            if (
                np.linalg.norm(self.ee_position("left") - left) <= cfg.grasp_distance
                and np.linalg.norm(E[:3, 3] - right) <= cfg.grasp_distance
            ):
                mid = 0.5 * (self.ee_position("left") + E[:3, 3])
                self._attach(obj, "dual", obj.position - mid)
            return
        if not closed or self.grip is not None or self.held_object() is not None:
            return
        item = self.item(name)
        if isinstance(item, (Drawer, Door)):
            if np.linalg.norm(E[:3, 3] - item.handle) <= cfg.grasp_distance:
                self.grip = FixtureGrip(item.name, E[:3, 3].copy(), E[:3, :3].copy(), getattr(item, "length", 0.0))
        elif isinstance(item, SimObject):
            if np.linalg.norm(E[:3, 3] - item.position) <= cfg.grasp_distance:
                local = np.linalg.inv(E) @ np.append(item.position, 1.0)
                self._attach(item, "right", local[:3])

    @staticmethod
    def _attach(obj: SimObject, mode: str, offset: np.ndarray) -> None:
        obj.held_by = mode
        obj.grasp_offset = np.asarray(offset, dtype=float)
        obj.grasp_z = float(obj.position[2])
        obj.inside = None
        obj.placed_on = None

    def _couple(self) -> None:
        E = self.ee_matrix()
        if self.grip is not None:
            fx = self.fixtures[self.grip.fixture]
            g = self.grip
            if isinstance(fx, Drawer):
                pulled = g.length + float((E[:3, 3] - g.ee_position) @ fx.pull_axis)
                fx.length = float(np.clip(pulled, 0.0, fx.travel))
            else:
                rel = g.ee_rotation.T @ E[:3, :3]
                roll = math.atan2(rel[2, 1], rel[1, 1])
                fx.handle_angle = float(np.clip(-roll, 0.0, fx.handle_travel))
                if not fx.unlatched and fx.handle_angle >= fx.unlatch:
                    fx.unlatched = True
                if fx.unlatched and g.push_origin is None:
                    g.push_origin = E[:3, 3] - fx.radius * math.sin(fx.door_angle) * fx.normal
                if fx.unlatched:
                    push = float((E[:3, 3] - g.push_origin) @ fx.normal)
                    angle = math.asin(float(np.clip(push / fx.radius, 0.0, 1.0)))
                    fx.door_angle = float(min(angle, fx.door_travel))
        for obj in self.objects.values():
            if obj.held_by == "right":
                obj.position = (E @ np.append(obj.grasp_offset, 1.0))[:3]
            elif obj.held_by == "dual":
                obj.position = 0.5 * (self.ee_position("left") + E[:3, 3]) + obj.grasp_offset
            elif obj.inside is not None:
                obj.position = self.fixtures[obj.inside].handle + obj.drawer_offset

    # export -------------------------------------------------------------------------------------

    def state(self) -> dict:
        return {
            "time": self.time,
            "base": self.base.tolist(),
            "fixtures": {n: f.state() for n, f in sorted(self.fixtures.items())},
            "objects": {n: o.state() for n, o in sorted(self.objects.items())},
            "known": sorted(self.known),
        }


# world files -----------------------------------------------------------------------------------


def _vec(raw, n, what) -> np.ndarray:
    arr = np.asarray(raw, dtype=float).reshape(-1)
    if arr.size != n or not np.all(np.isfinite(arr)):
        raise SimError(f"{what} needs {n} finite numbers")
    return arr


def ready_pose(model: RobotModel) -> np.ndarray:
    doc = yaml.safe_load(data_path("ready_pose.yaml").read_text())
    q = np.zeros(model.n_joints)
    for name, value in doc["ready_pose"].items():
        q[model.index(name)] = float(value)
    return q


def world_from_dict(doc: dict, model: RobotModel | None = None, config: SimConfig | None = None) -> SimWorld:
    model = model or load_robot_model()
    config = config or load_sim_config()
    if not isinstance(doc, dict) or doc.get("format_version") != 1:
        raise SimError("world file needs format_version: 1")
    try:
        robot = doc.get("robot") or {}
        q = ready_pose(model)
        for name, value in (robot.get("joints") or {}).items():
            q[model.index(name)] = float(value)
        base = (float(robot.get("x", 0.0)), float(robot.get("y", 0.0)), math.radians(float(robot.get("yaw_deg", 0.0))))
        fixtures = []
        for rec in doc.get("fixtures") or []:
            kind = rec["type"]
            tag = int(rec["tag"]) if rec.get("tag") is not None else None
            if kind == "drawer":
                fixtures.append(
                    Drawer(rec["name"], _vec(rec["handle"], 3, "drawer handle"), math.radians(float(rec["axis_yaw_deg"])), float(rec.get("travel", 0.3)), tag=tag)
                )
            elif kind == "door":
                fixtures.append(
                    Door(
                        rec["name"],
                        _vec(rec["handle"], 3, "door handle"),
                        math.radians(float(rec["normal_yaw_deg"])),
                        radius=float(rec.get("radius", 0.7)),
                        handle_travel=float(rec.get("handle_travel", 0.8)),
                        unlatch=float(rec.get("unlatch", 0.5)),
                        door_travel=math.radians(float(rec.get("door_travel_deg", 90.0))),
                        tag=tag,
                    )
                )
            else:
                raise SimError(f"unknown fixture type {kind!r}")
        objects = [
            SimObject(
                rec["name"],
                _vec(rec["position"], 3, f"object {rec['name']} position"),
                _vec(rec["extents"], 3, f"object {rec['name']} extents"),
                yaw=math.radians(float(rec.get("yaw_deg", 0.0))),
                inside=rec.get("inside"),
                approach_yaw=math.radians(float(rec["approach_yaw_deg"])) if "approach_yaw_deg" in rec else None,
            )
            for rec in doc.get("objects") or []
        ]
        places = [
            Place(
                rec["name"],
                _vec(rec["position"], 3, f"place {rec['name']} position"),
                math.radians(float(rec["approach_yaw_deg"])) if "approach_yaw_deg" in rec else None,
            )
            for rec in doc.get("places") or []
        ]
        tags = [Tag(int(rec["id"]), _vec(rec["position"], 3, "tag position"), math.radians(float(rec.get("yaw_deg", 0.0)))) for rec in doc.get("tags") or []]
        terrain = [
            TerrainBlock(tuple(_vec(rec["x"], 2, "terrain x")), tuple(_vec(rec["y"], 2, "terrain y")), float(rec["height"]))
            for rec in doc.get("terrain") or []
        ]
    except (KeyError, TypeError) as exc:
        raise SimError(f"malformed world file ({exc})") from None
    for obj in objects:
        if np.any(obj.extents <= 0):
            raise SimError(f"object {obj.name!r} extents must be positive")
    return SimWorld(model, config, doc.get("name", "world"), base, q, fixtures, objects, places, tags, terrain)


def load_world(path: str | Path, model: RobotModel | None = None, config: SimConfig | None = None) -> SimWorld:
    path = Path(path)
    if not path.is_file():
        bundled = data_path("worlds", f"{path.name}.yaml" if path.suffix == "" else path.name)
        if not bundled.is_file():
            raise SimError(f"world file {str(path)!r} not found")
        path = bundled
    return world_from_dict(yaml.safe_load(path.read_text()), model, config)


def world_paths() -> list[Path]:
    return sorted(data_path("worlds").glob("*.yaml"))


# perception and geometry ----------------------------------------------------------------------


def camera_matrix(world: SimWorld, camera) -> np.ndarray:
    if isinstance(camera, FrameTransform):
        return camera.matrix()
    return world.frame_matrix(camera)


def in_view(point_camera, fov_deg: float, max_range: float = math.inf) -> bool:
    """Cone test about the optical (+z) axis."""
    p = np.asarray(point_camera, dtype=float)
    dist = float(np.linalg.norm(p))
    if dist == 0.0 or dist > max_range:
        return False
    return float(p[2]) / dist >= math.cos(math.radians(fov_deg) / 2)


def observe_fiducial(world: SimWorld, tag, camera="head_camera", fov_deg: float | None = None) -> Pose6D | None:
    """Tag pose in the camera frame, or ``None`` when outside the field-of-view cone.

    ``camera`` is a model frame name or a camera→world :class:`FrameTransform`.
    """
    t = world.resolve_tag(tag)
    fov = world.config.fov_deg if fov_deg is None else fov_deg
    C = camera_matrix(world, camera)
    in_cam = np.linalg.inv(C) @ t.pose().matrix()
    if not in_view(in_cam[:3, 3], fov, world.config.camera_range):
        return None
    return Pose6D.from_matrix(in_cam)


def object_visible(world: SimWorld, name: str, camera="head_camera") -> bool:
    obj = world.objects.get(name)
    if obj is None:
        raise SimPreconditionError(f"no object named {name!r} in world {world.name!r}")
    if obj.inside is not None:
        drawer = world.fixtures[obj.inside]
        if drawer.length < world.config.drawer_visible_fraction * drawer.travel:
            return False
    C = camera_matrix(world, camera)
    p = np.linalg.inv(C) @ np.append(obj.position, 1.0)
    return in_view(p[:3], world.config.fov_deg, world.config.camera_range)


def around_predicate(world: SimWorld, target: str | None = None) -> bool:
    """True when the gripper's top link is above the handle and its bottom link below it."""
    if target is None:
        candidates = [(n, world.target_point(n)) for n in list(world.fixtures) + list(world.objects)]
        if not candidates:
            return False
        ee = world.ee_position()
        target = min(candidates, key=lambda c: float(np.linalg.norm(c[1] - ee)))[0]
    handle_z = world.target_point(target)[2]
    top = world.frame_matrix("gripper_top")[2, 3]
    bottom = world.frame_matrix("gripper_bottom")[2, 3]
    return bool(top > handle_z > bottom)
