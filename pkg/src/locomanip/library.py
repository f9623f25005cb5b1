"""Motion library: learned skills and the node catalog offered to the planner.

Library file schema (YAML, ``format_version: 1``)::

    skills:     list of {name, attribute, function, params?, morphology?,
                         trajectory, success, fixture?, executable? (default true)}
    actions:    list of {name, attribute, function, params?, morphology?}
    conditions: list of {name, function, params?, option?}

``trajectory`` paths are resolved relative to the library file. A condition
with ``option`` is gated: it may only appear in a plan when that function
option is on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .data import data_path

FORMAT_VERSION = 1
MORPHOLOGY_TAGS = ("single_arm", "dual_arm", "wheel", "leg")
FUNCTION_OPTIONS = ("manipulation_mode_selector", "locomotion_mode_selector", "detection_recovery")


class LibraryError(ValueError):
    pass


@dataclass(frozen=True)
class SkillDescriptor:
    name: str
    attribute: str
    function: str
    trajectory: str
    success: str
    params: tuple[str, ...] = ()
    morphology: tuple[str, ...] = ()
    fixture: str | None = None
    executable: bool = True


@dataclass(frozen=True)
class ActionNode:
    name: str
    attribute: str
    function: str
    params: tuple[str, ...] = ()
    morphology: tuple[str, ...] = ()


@dataclass(frozen=True)
class ConditionNode:
    name: str
    function: str
    params: tuple[str, ...] = ()
    option: str | None = None


@dataclass(frozen=True, eq=False)
class MotionLibrary:
    skills: dict[str, SkillDescriptor] = field(default_factory=dict)
    actions: dict[str, ActionNode] = field(default_factory=dict)
    conditions: dict[str, ConditionNode] = field(default_factory=dict)
    base_dir: Path | None = None

    @property
    def action_names(self) -> set[str]:
        return set(self.skills) | set(self.actions)

    @property
    def condition_names(self) -> set[str]:
        return set(self.conditions)

    def gating_option(self, condition: str) -> str | None:
        node = self.conditions.get(condition)
        return node.option if node else None

    def trajectory_path(self, skill: str) -> Path:
        rel = Path(self.skills[skill].trajectory)
        return rel if rel.is_absolute() or self.base_dir is None else self.base_dir / rel

    def structure(self) -> dict:
        """Plain-data view used for equality checks and serialization."""
        return _to_document(self)


def _str_tuple(raw, what) -> tuple[str, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise LibraryError(f"{what} must be a list of strings")
    return tuple(raw)


def _required(rec, key, kind):
    value = rec.get(key)
    if not isinstance(value, str) or not value.strip():
        raise LibraryError(f"{kind} record {rec.get('name')!r}: missing {key!r}")
    return value


def loads_library(text: str, base_dir: str | Path | None = None, check_artifacts: bool = True) -> MotionLibrary:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise LibraryError(f"malformed library file: {exc}") from exc
    if doc is None:
        doc = {"format_version": FORMAT_VERSION}
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise LibraryError("library file needs format_version: 1")
    base = Path(base_dir) if base_dir is not None else None
    seen: set[str] = set()

    def claim(name):
        if name in seen:
            raise LibraryError(f"duplicate name {name!r}")
        seen.add(name)

    skills = {}
    for rec in doc.get("skills") or []:
        name = _required(rec, "name", "skill")
        claim(name)
        tags = _str_tuple(rec.get("morphology"), f"skill {name!r} morphology")
        bad = set(tags) - set(MORPHOLOGY_TAGS)
        if bad:
            raise LibraryError(f"skill {name!r}: unknown morphology tags {sorted(bad)}")
        skill = SkillDescriptor(
            name=name,
            attribute=_required(rec, "attribute", "skill"),
            function=_required(rec, "function", "skill"),
            trajectory=_required(rec, "trajectory", "skill"),
            success=_required(rec, "success", "skill"),
            params=_str_tuple(rec.get("params"), f"skill {name!r} params"),
            morphology=tags,
            fixture=rec.get("fixture"),
            executable=bool(rec.get("executable", True)),
        )
        if check_artifacts and skill.executable:
            path = Path(skill.trajectory)
            if not path.is_absolute() and base is not None:
                path = base / path
            if not path.is_file():
                raise LibraryError(f"skill {name!r}: trajectory artifact {skill.trajectory!r} not found")
        skills[name] = skill

    actions = {}
    for rec in doc.get("actions") or []:
        name = _required(rec, "name", "action")
        claim(name)
        tags = _str_tuple(rec.get("morphology"), f"action {name!r} morphology")
        if set(tags) - set(MORPHOLOGY_TAGS):
            raise LibraryError(f"action {name!r}: unknown morphology tags")
        actions[name] = ActionNode(
            name=name,
            attribute=_required(rec, "attribute", "action"),
            function=_required(rec, "function", "action"),
            params=_str_tuple(rec.get("params"), f"action {name!r} params"),
            morphology=tags,
        )

    conditions = {}
    for rec in doc.get("conditions") or []:
        name = _required(rec, "name", "condition")
        claim(name)
        option = rec.get("option")
        if option is not None and option not in FUNCTION_OPTIONS:
            raise LibraryError(f"condition {name!r}: unknown function option {option!r}")
        conditions[name] = ConditionNode(
            name=name,
            function=_required(rec, "function", "condition"),
            params=_str_tuple(rec.get("params"), f"condition {name!r} params"),
            option=option,
        )
    return MotionLibrary(skills, actions, conditions, base)


def default_library_path() -> Path:
    return data_path("library", "library.yaml")


def load_library(path: str | Path | None = None) -> MotionLibrary:
    path = default_library_path() if path is None else Path(path)
    return loads_library(path.read_text(), base_dir=path.parent)


def _to_document(lib: MotionLibrary) -> dict:
    def clean(d):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items() if v not in (None, ())}

    skills = []
    for s in lib.skills.values():
        rec = clean(vars(s))
        if s.executable:
            rec.pop("executable")
        skills.append(rec)
    return {
        "format_version": FORMAT_VERSION,
        "skills": skills,
        "actions": [clean(vars(a)) for a in lib.actions.values()],
        "conditions": [clean(vars(c)) for c in lib.conditions.values()],
    }


def dumps_library(lib: MotionLibrary) -> str:
    return yaml.safe_dump(_to_document(lib), sort_keys=False, allow_unicode=True, width=100)


def save_library(lib: MotionLibrary, path: str | Path) -> None:
    """Write ``lib``; relative trajectory paths are rewritten to stay valid
    from the new location."""
    path = Path(path)
    doc = _to_document(lib)
    for rec in doc["skills"]:
        traj = Path(rec["trajectory"])
        if not traj.is_absolute() and lib.base_dir is not None:
            src = (lib.base_dir / traj).resolve()
            try:
                rec["trajectory"] = str(src.relative_to(path.parent.resolve()))
            except ValueError:
                rec["trajectory"] = str(src)
    path.write_text(yaml.safe_dump(doc, sort_keys=False, allow_unicode=True, width=100))


CATALOG_HEADER = "### Motion Library ###"


def catalog_text(lib: MotionLibrary) -> str:
    """Stable, prompt-ready listing of every node in ``lib``."""
    lines = [CATALOG_HEADER]
    if lib.skills or lib.actions:
        lines.append("Action nodes (use as <Action name=\"...\" .../>):")
        for s in lib.skills.values():
            tags = ", ".join(("learned skill",) + s.morphology)
            lines.append(f"- {s.name}({', '.join(s.params)}) [{tags}]: {s.attribute} {s.function}")
        for a in lib.actions.values():
            tags = f" [{', '.join(a.morphology)}]" if a.morphology else ""
            lines.append(f"- {a.name}({', '.join(a.params)}){tags}: {a.attribute} {a.function}")
    if lib.conditions:
        lines.append("Condition nodes (use as <Condition name=\"...\" .../>):")
        for c in lib.conditions.values():
            gate = f" [only when '{c.option}' is on]" if c.option else ""
            lines.append(f"- {c.name}({', '.join(c.params)}){gate}: {c.function}")
    return "\n".join(lines) + "\n"
