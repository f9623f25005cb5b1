"""Tick-by-tick execution of skills and scripted actions against a :class:`SimWorld`.

Every runner exposes ``step() -> TickStatus``; each call advances simulated
time by at most one tick. Runners raise :class:`SimPreconditionError` at
construction when they cannot apply to the world.
"""

from __future__ import annotations

import math

import numpy as np

from ..bt import TickStatus
from ..library import SkillDescriptor
from ..morphology import MorphologyConfig, ObjectEstimate, locomotion_rules, manipulation_rules, voxelize
from ..rewards import GripperScene, TaskKind, TaskProgress, action_layout, total_reward
from ..transforms import Pose6D
from ..wholebody import OcpSolution, Trajectory, solution_trajectory
from .world import (
    Door,
    Drawer,
    Place,
    SimObject,
    SimPreconditionError,
    SimWorld,
    UnknownTagError,
    around_predicate,
    object_visible,
    observe_fiducial,
    rot_z,
    wrap_angle,
)

TERMINAL = (TickStatus.Success, TickStatus.Failure)
REWARD_KIND = {
    "drawer_opened": TaskKind.DrawerOpen,
    "door_opened": TaskKind.DoorOpen,
    "object_picked": TaskKind.SingleArmPick,
    "object_picked_dual": TaskKind.DualArmPick,
}
FIXTURE_TYPES = {"drawer": Drawer, "door": Door, "object": SimObject}


def min_jerk(s):
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10 - 15 * s + 6 * s * s)


class Runner:
    """Common bookkeeping: status, diagnostic and an iterator over statuses."""

    label = "runner"

    def __init__(self, world: SimWorld):
        self.world = world
        self.status = TickStatus.Running
        self.diagnostic: str | None = None

    @property
    def done(self) -> bool:
        return self.status in TERMINAL

    def finish(self, ok: bool, diagnostic: str | None = None) -> TickStatus:
        self.status = TickStatus.Success if ok else TickStatus.Failure
        self.diagnostic = diagnostic
        return self.status

    def step(self) -> TickStatus:  # pragma: no cover - abstract
        raise NotImplementedError

    def __iter__(self):
        while not self.done:
            yield self.step()


# rewards --------------------------------------------------------------------------------------


def reward_inputs(world: SimWorld, kind: TaskKind, target: str) -> tuple[GripperScene, TaskProgress]:
    """Reward arguments read off the current world for the skill's target."""
    item = world.item(target)
    p = world.target_point(target)
    E = world.ee_matrix()
    if isinstance(item, (Drawer, Door)):
        inward, up = item.inward_axis, np.array([0.0, 0.0, 1.0])
    else:
        inward, up = np.array([0.0, 0.0, -1.0]), -item.rotation[:, 0]
    top = world.frame_matrix("gripper_top")[:3, 3]
    bottom = world.frame_matrix("gripper_bottom")[:3, 3]
    names = world.model.joint_names
    action = []
    base_v = rot_z(world.base[2]).T @ np.array([world.base_velocity[0], world.base_velocity[1], 0.0])
    for name in action_layout(kind, world.model):
        if name in names:
            action.append(world.velocity[names.index(name)])
        else:
            action.append({"base_x": base_v[0], "base_y": base_v[1], "base_yaw": world.base_velocity[2]}.get(name, 0.0))
    scene = GripperScene(
        d_l=float(np.linalg.norm(world.ee_position("left") - p)),
        d_r=float(np.linalg.norm(E[:3, 3] - p)),
        d_x=float(np.clip(E[:3, 0] @ inward, -1.0, 1.0)),
        d_z=float(np.clip(E[:3, 2] @ up, -1.0, 1.0)),
        d_t=float(np.linalg.norm(top - p)),
        d_b=float(np.linalg.norm(bottom - p)),
        around=around_predicate(world, target),
        action=np.array(action),
    )
    if kind is TaskKind.DrawerOpen:
        progress = TaskProgress(l_drawer=item.length)
    elif kind is TaskKind.DoorOpen:
        progress = TaskProgress(angle_handle=item.handle_angle, angle_door=item.door_angle)
    else:
        want = "dual" if kind is TaskKind.DualArmPick else "right"
        progress = TaskProgress(h=item.held_by == want and item.lifted() >= world.config.lift)
    return scene, progress


def snapshot_reward(world: SimWorld, kind: TaskKind, target: str) -> float:
    scene, progress = reward_inputs(world, kind, target)
    return total_reward(kind, scene, progress)


# skills -------------------------------------------------------------------------------------------


def resolve_target(world: SimWorld, skill: SkillDescriptor, target: str | None) -> str | None:
    if skill.fixture is None:
        return target
    cls = FIXTURE_TYPES[skill.fixture]
    table = world.objects if cls is SimObject else world.fixtures
    if target is None:
        found = sorted(n for n, v in table.items() if isinstance(v, cls))
        if len(found) != 1:
            what = "no" if not found else "more than one"
            raise SimPreconditionError(f"{skill.name}: {what} {skill.fixture} in world {world.name!r}")
        return found[0]
    if not isinstance(table.get(target), cls):
        raise SimPreconditionError(f"{skill.name}: no {skill.fixture} named {target!r} in world {world.name!r}")
    return target


def _resample(traj: Trajectory, dt: float) -> Trajectory:
    if len(traj) < 2 or np.allclose(np.diff(traj.t), dt, atol=1e-9, rtol=0):
        return traj
    grid = traj.t[0] + dt * np.arange(int(math.floor((traj.t[-1] - traj.t[0]) / dt + 1e-9)) + 1)
    values = np.column_stack([np.interp(grid, traj.t, traj.values[:, j]) for j in range(len(traj.names))])
    return Trajectory(traj.names, grid, values)


class SkillRun(Runner):
    """Replays a skill trajectory, coupling the gripper to the skill's fixture or object.

    If the robot's upper body is not at the trajectory's first row, a
    minimum-jerk blend within the joint velocity and acceleration limits runs first.
    """

    def __init__(self, world: SimWorld, skill: SkillDescriptor, plan, target: str | None = None, problem=None):
        super().__init__(world)
        if not skill.executable:
            raise SimPreconditionError(f"{skill.name} is not an executable skill")
        self.skill = skill
        self.label = skill.name
        self.target = resolve_target(world, skill, target)
        if isinstance(plan, OcpSolution):
            if problem is None:
                raise SimPreconditionError("an optimizer solution needs its problem to name columns")
            plan = solution_trajectory(problem, plan)
        model = world.model
        names = model.joint_names
        upper_names = [names[i] for i in model.upper_body()]
        missing = [n for n in upper_names if n not in plan.names]
        if missing:
            raise SimPreconditionError(f"{skill.name}: trajectory lacks joints {missing}")
        known = set(names) | {"base_x", "base_y", "base_z", "base_roll", "base_pitch", "base_yaw"}
        unknown = [n for n in plan.names if n not in known and not n.startswith("f_")]
        if unknown:
            raise SimPreconditionError(f"{skill.name}: trajectory columns not in the robot model: {unknown}")
        if len(plan) == 0:
            raise SimPreconditionError(f"{skill.name}: empty trajectory")
        if np.any(np.diff(plan.t) <= 0):
            raise SimPreconditionError(f"{skill.name}: trajectory time must increase")
        plan = _resample(plan, world.config.tick)
        self.joint_names = upper_names
        rows = plan.select(upper_names)
        offsets = np.column_stack(
            [plan.column(c) if c in plan.names else np.zeros(len(plan)) for c in ("base_x", "base_y", "base_yaw")]
        )
        offsets = offsets - offsets[0]
        self.steps = [(rows[k], offsets[k]) for k in range(1, len(plan))]
        self.blend_ticks = self._blend(rows[0])
        self.start_base = world.base.copy()
        self.kind = REWARD_KIND.get(skill.success)
        self.contact = ("dual" if skill.success == "object_picked_dual" else "right", self.target) if self.target else None
        self.rewards: list[float] = []
        self.progress: list[dict] = []
        self._cursor = 0

    def _blend(self, first_row) -> int:
        world = self.world
        idx = world.model.upper_body()
        q0 = world.upper_q
        delta = np.asarray(first_row) - q0
        if np.max(np.abs(delta)) <= 1e-9:
            return 0
        vel = world.model.velocity_limit[idx]
        acc = world.model.acceleration_limit[idx]
        span = np.abs(delta)
        duration = float(np.max(np.maximum(1.875 * span / vel, np.sqrt(5.7735 * span / acc))))
        n = max(1, int(math.ceil(duration / world.config.tick - 1e-9)))
        blend = [(q0 + delta * min_jerk(k / n), np.zeros(3)) for k in range(1, n + 1)]
        self.steps = blend + self.steps
        return n

    def _base_at(self, offset) -> np.ndarray:
        x, y, yaw = self.start_base
        dx, dy, dyaw = offset
        c, s = math.cos(yaw), math.sin(yaw)
        return np.array([x + c * dx - s * dy, y + s * dx + c * dy, yaw + dyaw])

    def step(self) -> TickStatus:
        if self.done:
            return self.status
        world = self.world
        if self._cursor < len(self.steps):
            row, offset = self.steps[self._cursor]
            idx = world.model.upper_body()
            lo, hi = world.model.lower[idx], world.model.upper[idx]
            bad = np.flatnonzero((row < lo - 1e-9) | (row > hi + 1e-9))
            if bad.size:
                j = int(bad[0])
                side = "upper" if row[j] > hi[j] else "lower"
                limit = hi[j] if side == "upper" else lo[j]
                return self.finish(
                    False,
                    f"{self.skill.name}: joint {self.joint_names[j]} at {row[j]:.4f} exceeds its {side} limit {limit:.4f} "
                    f"(step {self._cursor + 1} of {len(self.steps)})",
                )
            world.advance(row, self._base_at(offset), self.contact)
            self._cursor += 1
            if self.target is not None:
                self.progress.append({"t": world.time, **self._target_state()})
                if self.kind is not None:
                    self.rewards.append(snapshot_reward(world, self.kind, self.target))
        if self._cursor < len(self.steps):
            return TickStatus.Running
        ok, why = self.check_success()
        return self.finish(ok, None if ok else why)

    def _target_state(self) -> dict:
        item = self.world.item(self.target)
        if isinstance(item, SimObject):
            return {"held_by": item.held_by, "lifted": item.lifted()}
        return {**item.state(), "grasped": self.world.grip is not None and self.world.grip.fixture == item.name}

    def check_success(self) -> tuple[bool, str]:
        cfg = self.world.config
        item = self.world.item(self.target) if self.target else None
        pred = self.skill.success
        if pred == "drawer_opened":
            need = cfg.drawer_fraction * item.travel
            return item.length >= need, f"drawer pulled {item.length:.3f} m, needs {need:.3f} m"
        if pred == "door_opened":
            angle = math.degrees(item.door_angle)
            return angle >= cfg.door_angle_deg, f"door opened {angle:.1f} deg, needs {cfg.door_angle_deg:.1f} deg"
        if pred in ("object_picked", "object_picked_dual"):
            want = "dual" if pred == "object_picked_dual" else "right"
            if item.held_by != want:
                return False, f"{item.name} is not held ({'both hands' if want == 'dual' else 'gripper'})"
            return item.lifted() >= cfg.lift, f"{item.name} lifted {item.lifted():.3f} m, needs {cfg.lift:.3f} m"
        return True, ""


def execute_skill(world: SimWorld, skill: SkillDescriptor, plan, target: str | None = None, problem=None) -> SkillRun:
    """Start replaying ``plan`` (a trajectory, or an optimizer solution with its problem).

    Iterate the returned runner for its per-tick statuses.
    """
    return SkillRun(world, skill, plan, target, problem)


# locomotion and scripted actions ---------------------------------------------------------------------


def manipulation_choice(world: SimWorld, name: str, cfg: MorphologyConfig):
    obj = world.objects[name]
    T = np.linalg.inv(world.base_matrix()) @ obj.pose().matrix()
    return manipulation_rules(ObjectEstimate(Pose6D.from_matrix(T), obj.extents), cfg)


def approach_goal(world: SimWorld, target: str, morph: MorphologyConfig) -> np.ndarray:
    """Base pose (x, y, yaw) that puts ``target`` at the skill anchor."""
    if target not in world.known:
        raise SimPreconditionError(f"{target!r} has not been localized")
    item = world.item(target)
    cfg = world.config
    anchor = np.asarray(cfg.single_anchor)
    if isinstance(item, (Drawer, Door)):
        yaw = item.facing_yaw
    else:
        yaw = item.approach_yaw if item.approach_yaw is not None else float(world.base[2])
        if isinstance(item, SimObject) and manipulation_choice(world, target, morph).choice == "dual_arm":
            anchor = np.asarray(cfg.dual_anchor)
    p = world.target_point(target)
    xy = p[:2] - rot_z(yaw)[:2, :2] @ anchor[:2]
    return np.array([xy[0], xy[1], yaw])


class BaseMove(Runner):
    """Constant-speed planar base motion; the arm holds its pose."""

    def __init__(self, world: SimWorld, goal, speed: float, wheels: bool, clearance: float, label: str):
        super().__init__(world)
        self.label = label
        self.start = world.base.copy()
        self.goal = np.asarray(goal, dtype=float)
        dyaw = wrap_angle(self.goal[2] - self.start[2])
        self.delta = np.array([self.goal[0] - self.start[0], self.goal[1] - self.start[1], dyaw])
        dist = float(np.hypot(*self.delta[:2]))
        duration = max(dist / speed, abs(dyaw) / world.config.turn_rate)
        self.n = int(math.ceil(duration / world.config.tick - 1e-9))
        self.k = 0
        self.blocked = None
        if wheels:
            for s in np.linspace(0.0, 1.0, max(2, int(dist / 0.01) + 1)):
                x, y = self.start[:2] + s * self.delta[:2]
                h = world.terrain_height(x, y)
                if h > clearance:
                    self.blocked = f"{label}: terrain step of {h:.3f} m at ({x:.2f}, {y:.2f}) exceeds wheel clearance {clearance:.3f} m"
                    break

    def step(self) -> TickStatus:
        if self.done:
            return self.status
        if self.blocked:
            return self.finish(False, self.blocked)
        self.world.release_fixture()
        if self.k < self.n:
            self.k += 1
            self.world.advance(base=self.start + (self.k / self.n) * self.delta)
        if self.k >= self.n:
            return self.finish(True)
        return TickStatus.Running


class SearchTag(Runner):
    """Turn in place until the head camera sees the tag; fail after a full turn."""

    def __init__(self, world: SimWorld, tag):
        super().__init__(world)
        self.label = "search_tag"
        try:
            self.tag = world.resolve_tag(tag)
        except UnknownTagError as exc:
            raise SimPreconditionError(str(exc)) from None
        self.turn = world.config.search_turn_rate * world.config.tick
        self.turned = 0.0

    def _seen(self) -> bool:
        if observe_fiducial(self.world, self.tag.id) is None:
            return False
        for fx in self.world.fixtures.values():
            if fx.tag == self.tag.id:
                self.world.known.add(fx.name)
        return True

    def step(self) -> TickStatus:
        if self.done:
            return self.status
        if self._seen():
            return self.finish(True)
        if self.turned >= 2 * math.pi:
            return self.finish(False, f"tag {self.tag.id} not found after a full turn")
        x, y, yaw = self.world.base
        self.world.release_fixture()
        self.world.advance(base=(x, y, yaw + self.turn))
        self.turned += self.turn
        return self.finish(True) if self._seen() else TickStatus.Running


class DetectObject(Runner):
    """One camera frame: the object is localized when it is in view and not hidden."""

    def __init__(self, world: SimWorld, name: str):
        super().__init__(world)
        self.label = "detect_object"
        if name not in world.objects:
            raise SimPreconditionError(f"no object named {name!r} in world {world.name!r}")
        self.name = name

    def step(self) -> TickStatus:
        if self.done:
            return self.status
        self.world.advance()
        if object_visible(self.world, self.name):
            self.world.known.add(self.name)
            return self.finish(True)
        return self.finish(False, f"{self.name} not visible from the head camera")


class PlaceObject(Runner):
    """Scripted put-down: the held object is carried onto the place and released."""

    OPEN = 0.08

    def __init__(self, world: SimWorld, name: str, place: str):
        super().__init__(world)
        self.label = "place_object"
        obj = world.objects.get(name)
        if obj is None:
            raise SimPreconditionError(f"no object named {name!r} in world {world.name!r}")
        target = world.item(place)
        if not isinstance(target, Place):
            raise SimPreconditionError(f"{place!r} is not a place")
        if obj.held_by is None:
            raise SimPreconditionError(f"{name} is not held")
        self.obj, self.place = obj, target
        cfg = world.config
        anchor = (world.base_matrix() @ np.append(cfg.single_anchor, 1.0))[:3]
        self.reach = float(np.linalg.norm(anchor[:2] - target.position[:2]))
        self.goal = target.position + np.array([0.0, 0.0, obj.extents[2] / 2])
        self.n = max(1, int(math.ceil(cfg.place_duration / cfg.tick - 1e-9)))
        self.k = 0

    def step(self) -> TickStatus:
        if self.done:
            return self.status
        world, obj = self.world, self.obj
        if self.reach > world.config.place_reach:
            return self.finish(False, f"{self.place.name} is {self.reach:.2f} m from the hand, beyond {world.config.place_reach:.2f} m")
        if self.k == 0:
            self.origin = obj.position.copy()
            self.g0 = world.gripper
            obj.held_by = None
        self.k += 1
        s = self.k / self.n
        upper = world.upper_q
        g = list(world.model.upper_body()).index(world.model.index("gripper"))
        upper[g] = self.g0 + s * (max(self.OPEN, self.g0) - self.g0)
        world.advance(upper)
        obj.position = self.origin + s * (self.goal - self.origin)
        if self.k < self.n:
            return TickStatus.Running
        obj.placed_on = self.place.name
        obj.grasp_z = None
        err = float(np.linalg.norm(obj.position - self.goal))
        ok = err <= world.config.place_tolerance
        return self.finish(ok, None if ok else f"{obj.name} landed {err:.3f} m from {self.place.name}")


# conditions --------------------------------------------------------------------------------------------


def corridor_cloud(world: SimWorld, target: str, morph: MorphologyConfig, step: float | None = None) -> np.ndarray:
    """Terrain samples over the corridor toward ``target``, in a robot-centred frame facing it."""
    step = step or morph.voxel_cell / 2
    x, y, _ = world.base
    p = world.target_point(target)
    heading = math.atan2(p[1] - y, p[0] - x)
    xs = np.arange(step / 2, morph.corridor_length, step)
    ys = np.arange(-morph.corridor_width / 2 + step / 2, morph.corridor_width / 2, step)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    local = np.column_stack([gx.ravel(), gy.ravel()])
    world_xy = local @ rot_z(heading)[:2, :2].T + [x, y]
    z = np.array([world.terrain_height(wx, wy) for wx, wy in world_xy]) - world.config.base_height
    return np.column_stack([local, z])


def wheel_decision(world: SimWorld, target: str, morph: MorphologyConfig):
    grid = voxelize(corridor_cloud(world, target, morph), morph.voxel_cell, morph.grid_origin)
    return locomotion_rules(grid, morph)


__all__ = [
    "BaseMove",
    "DetectObject",
    "PlaceObject",
    "REWARD_KIND",
    "Runner",
    "SearchTag",
    "SkillRun",
    "approach_goal",
    "corridor_cloud",
    "execute_skill",
    "manipulation_choice",
    "resolve_target",
    "reward_inputs",
    "snapshot_reward",
    "wheel_decision",
]
