"""Behavior-tree leaf handlers backed by a :class:`SimWorld`, and the episode log."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..bt import Executor, LeafCall, TaskGraph, TickStatus
from ..data import data_path
from ..library import MotionLibrary
from ..morphology import MorphologyConfig, MorphologyError, load_morphology_config
from ..wholebody import Trajectory, read_trajectory
from .skills import (
    BaseMove,
    DetectObject,
    PlaceObject,
    Runner,
    SearchTag,
    SkillRun,
    approach_goal,
    manipulation_choice,
    wheel_decision,
)
from .world import EndEffectorTrace, SimPreconditionError, SimWorld, UnknownTagError


def _plain(value):
    """JSON-ready copy with Python floats, so output is byte-stable."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return value.item()
    return value


@dataclass
class EpisodeLog:
    """Append-only record of one episode."""

    world: str
    ticks: list[dict] = field(default_factory=list)
    skills: list[dict] = field(default_factory=list)
    conditions: list[dict] = field(default_factory=list)
    decisions: list[dict] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    status: str | None = None
    bt_ticks: int = 0
    final_state: dict = field(default_factory=dict)
    trace: EndEffectorTrace = field(default_factory=EndEffectorTrace)

    def to_dict(self) -> dict:
        return _plain(
            {
                "world": self.world,
                "status": self.status,
                "bt_ticks": self.bt_ticks,
                "sim_ticks": len(self.trace) - 1,
                "ticks": self.ticks,
                "skills": self.skills,
                "conditions": self.conditions,
                "decisions": self.decisions,
                "diagnostics": self.diagnostics,
                "final_state": self.final_state,
            }
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    def skill(self, name: str) -> dict:
        for rec in self.skills:
            if rec["name"] == name:
                return rec
        raise KeyError(name)


class SimHandlers:
    """Leaf handlers for every action and condition in a motion library.

    Actions start a runner on their first tick and step it once per tick.
    Precondition problems turn into Failure with a diagnostic in the log.
    """

    def __init__(
        self,
        world: SimWorld,
        lib: MotionLibrary,
        trajectories: dict[str, Trajectory] | None = None,
        morphology: MorphologyConfig | None = None,
        log: EpisodeLog | None = None,
    ):
        self.world = world
        self.lib = lib
        self.trajectories = dict(trajectories or {})
        self.morph = morphology or load_morphology_config()
        self.log = log or EpisodeLog(world.name)
        self._runs: dict[str, tuple[Runner, dict]] = {}

    def trajectory(self, skill: str) -> Trajectory:
        if skill not in self.trajectories:
            self.trajectories[skill] = read_trajectory(self.lib.trajectory_path(skill))
        return self.trajectories[skill]

    def mapping(self) -> dict:
        out = {name: self._action for name in self.lib.action_names}
        out.update(
            WhetherSingleArm=self._single_arm,
            WhetherWheelMove=self._wheel_move,
            IsObjectDetected=self._detected,
        )
        return out

    # actions ------------------------------------------------------------------------------------

    def _start(self, call: LeafCall) -> Runner:
        name, p, w = call.node.name, call.params, self.world
        target = p.get("target") or p.get("object")
        if name in self.lib.skills:
            return SkillRun(w, self.lib.skills[name], self.trajectory(name), target)
        cfg = w.config
        if name == "approach_target":
            return BaseMove(w, approach_goal(w, p["target"], self.morph), cfg.wheel_speed, True, self.morph.wheel_clearance, name)
        if name == "wheel_move":
            return BaseMove(w, approach_goal(w, p["target"], self.morph), cfg.wheel_speed, True, self.morph.wheel_clearance, name)
        if name == "leg_move":
            return BaseMove(w, approach_goal(w, p["target"], self.morph), cfg.leg_speed, False, self.morph.wheel_clearance, name)
        if name == "search_tag":
            return SearchTag(w, p["tag"])
        if name == "detect_object":
            return DetectObject(w, p["object"])
        if name == "place_object":
            return PlaceObject(w, p["object"], p["target"])
        raise SimPreconditionError(f"no simulator behaviour for action {name!r}")

    def _action(self, call: LeafCall) -> TickStatus:
        w = self.world
        if call.first or call.path not in self._runs:
            rec = {
                "name": call.node.name,
                "path": call.path,
                "params": dict(sorted(call.params.items())),
                "start_tick": call.tick,
                "start_time": w.time,
            }
            try:
                runner = self._start(call)
            except (SimPreconditionError, UnknownTagError, KeyError) as exc:
                msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
                if isinstance(exc, KeyError):
                    msg = f"{call.node.name}: missing parameter {msg}"
                self._close(rec, call, TickStatus.Failure, msg, None)
                return TickStatus.Failure
            self._runs[call.path] = (runner, rec)
        runner, rec = self._runs[call.path]
        status = runner.step()
        if status is not TickStatus.Running:
            del self._runs[call.path]
            self._close(rec, call, status, runner.diagnostic, runner)
        return status

    def _close(self, rec: dict, call: LeafCall, status: TickStatus, diagnostic, runner) -> None:
        rec.update(end_tick=call.tick, end_time=self.world.time, status=status.value, diagnostic=diagnostic)
        if isinstance(runner, SkillRun):
            rec["blend_ticks"] = runner.blend_ticks
            rec["rewards"] = list(runner.rewards)
            rec["progress"] = list(runner.progress)
        self.log.skills.append(rec)
        if diagnostic:
            self.log.diagnostics.append(f"tick {call.tick}: {diagnostic}")

    # conditions ----------------------------------------------------------------------------------

    def _condition(self, call: LeafCall, ok: bool, decision=None) -> TickStatus:
        status = TickStatus.Success if ok else TickStatus.Failure
        self.log.conditions.append({"tick": call.tick, "name": call.node.name, "params": dict(sorted(call.params.items())), "status": status.value})
        if decision is not None:
            self.log.decisions.append({"tick": call.tick, **decision.as_dict()})
        return status

    def _single_arm(self, call: LeafCall) -> TickStatus:
        name = call.params.get("object")
        if name not in self.world.objects:
            self.log.diagnostics.append(f"tick {call.tick}: WhetherSingleArm: no object named {name!r}")
            return self._condition(call, False)
        try:
            decision = manipulation_choice(self.world, name, self.morph)
        except MorphologyError as exc:
            self.log.diagnostics.append(f"tick {call.tick}: WhetherSingleArm: {exc}")
            return self._condition(call, False)
        return self._condition(call, decision.choice == "single_arm", decision)

    def _wheel_move(self, call: LeafCall) -> TickStatus:
        name = call.params.get("target")
        try:
            decision = wheel_decision(self.world, name, self.morph)
        except (SimPreconditionError, TypeError) as exc:
            self.log.diagnostics.append(f"tick {call.tick}: WhetherWheelMove: {exc}")
            return self._condition(call, False)
        return self._condition(call, decision.choice == "wheel", decision)

    def _detected(self, call: LeafCall) -> TickStatus:
        return self._condition(call, call.params.get("object") in self.world.known)


def run_episode(
    graph: TaskGraph,
    world: SimWorld,
    lib: MotionLibrary,
    trajectories: dict[str, Trajectory] | None = None,
    max_ticks: int = 5000,
    morphology: MorphologyConfig | None = None,
) -> EpisodeLog:
    """Tick ``graph`` against ``world`` until it finishes or ``max_ticks`` pass."""
    handlers = SimHandlers(world, lib, trajectories, morphology)
    result = Executor(graph, handlers.mapping()).run_to_completion(max_ticks)
    log = handlers.log
    log.ticks = [{"tick": e.tick, "path": e.path, "node": e.node, "status": e.status.value} for e in result.trace]
    log.bt_ticks = result.ticks
    log.status = result.status
    log.final_state = world.state()
    log.trace = world.trace
    return log


def bundled_episodes() -> list[dict]:
    """The bundled instruction/world pairs (name, instruction, world)."""
    doc = yaml.safe_load(data_path("episodes.yaml").read_text())
    return list(doc["episodes"])
