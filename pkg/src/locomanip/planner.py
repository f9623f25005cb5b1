"""Prompt assembly, plan requests and the offline mock planner.

A prompt is the concatenation of four sections, always in this order:
the robot brief, the function options with their on/off states, the motion
library catalog, and the task instruction. Instructions may embed
directives such as ``('manipulation_mode_selector'=on)``; these switch the
option before assembly and stay in the instruction text.
"""

from __future__ import annotations

import hashlib
import os
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol

import httpx
import yaml

from .bt import (
    BtNode,
    TaskGraph,
    TaskGraphStructureError,
    TaskGraphSyntaxError,
    ValidationReport,
    Violation,
    parse_task_graph,
    serialize_task_graph,
    validate,
)
from .data import data_path
from .library import FUNCTION_OPTIONS, MotionLibrary, catalog_text

OPTION_DIRECTIVE = re.compile(r"\(\s*'(\w+)'\s*=\s*(on|off)\s*\)")
TASK_HEADER = "### Task ###"
API_KEY_ENV = "LOCOMANIP_API_KEY"
DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_MODEL = "gpt-4o"


class PlannerError(RuntimeError):
    pass


class PlannerConfigError(PlannerError):
    pass


class PlannerTimeout(PlannerError):
    pass


class NoXmlFound(PlannerError):
    pass


class UnknownScenario(PlannerError):
    pass


# prompts ------------------------------------------------------------------------------


@dataclass(frozen=True)
class PromptSet:
    basic: str
    options_header: str
    option_text: Mapping[str, str]
    manipulation: str
    locomotion: str


def load_prompts(directory: str | Path | None = None) -> PromptSet:
    root = data_path("prompts") if directory is None else Path(directory)
    try:
        doc = yaml.safe_load((root / "options.yaml").read_text())
        texts = {n: (root / f"{n}.txt").read_text().strip() for n in ("basic", "manipulation_selector", "locomotion_selector")}
    except FileNotFoundError as exc:
        raise PlannerConfigError(f"prompt set incomplete: {exc.filename}") from None
    if not isinstance(doc, dict) or doc.get("format_version") != 1:
        raise PlannerConfigError("options.yaml needs format_version: 1")
    option_text = doc.get("options") or {}
    missing = [o for o in FUNCTION_OPTIONS if o not in option_text]
    if missing:
        raise PlannerConfigError(f"options.yaml lacks descriptions for {missing}")
    return PromptSet(
        texts["basic"], str(doc["header"]).strip(), dict(option_text), texts["manipulation_selector"], texts["locomotion_selector"]
    )


def default_options() -> dict[str, bool]:
    return {name: False for name in FUNCTION_OPTIONS}


def parse_option_assignments(spec: str | None) -> dict[str, bool]:
    """``"a=on,b=off"`` → ``{a: True, b: False}`` (CLI syntax)."""
    out: dict[str, bool] = {}
    for item in filter(None, (s.strip() for s in (spec or "").split(","))):
        name, _, value = item.partition("=")
        name, value = name.strip(), value.strip().lower()
        if name not in FUNCTION_OPTIONS:
            raise PlannerConfigError(f"unknown function option {name!r}")
        if value not in ("on", "off", "true", "false", "1", "0"):
            raise PlannerConfigError(f"option {name!r} needs on or off, got {value!r}")
        out[name] = value in ("on", "true", "1")
    return out


def format_options(options: Mapping[str, bool]) -> str:
    return ",".join(f"{k}={'on' if options[k] else 'off'}" for k in sorted(options))


def apply_directives(instruction: str, options: Mapping[str, bool]) -> dict[str, bool]:
    out = dict(options)
    for name, state in OPTION_DIRECTIVE.findall(instruction):
        if name not in FUNCTION_OPTIONS:
            raise PlannerConfigError(f"instruction names unknown function option {name!r}")
        out[name] = state == "on"
    return out


@dataclass(frozen=True)
class UserInput:
    prompts: PromptSet
    catalog: str
    instruction: str
    options: Mapping[str, bool] = field(default_factory=default_options)

    def effective_options(self) -> dict[str, bool]:
        base = default_options()
        for name, value in self.options.items():
            if name not in base:
                raise PlannerConfigError(f"unknown function option {name!r}")
            base[name] = bool(value)
        return apply_directives(self.instruction, base)


def make_input(instruction: str, lib: MotionLibrary, options=None, prompts: PromptSet | None = None) -> UserInput:
    return UserInput(prompts or load_prompts(), catalog_text(lib), instruction, dict(options or {}))


def assemble_prompt(user: UserInput) -> str:
    if not user.instruction.strip():
        raise PlannerError("instruction is empty")
    options = user.effective_options()
    lines = [user.prompts.options_header]
    for name in FUNCTION_OPTIONS:
        lines.append(f"- {name}: {'on' if options[name] else 'off'}")
        lines.append(f"  {user.prompts.option_text[name]}")
    sections = [user.prompts.basic, "\n".join(lines), user.catalog.strip(), f"{TASK_HEADER}\n{user.instruction}"]
    return "\n\n".join(sections) + "\n"


def read_prompt(prompt: str) -> tuple[str, dict[str, bool]]:
    """Recover (instruction, options) from an assembled prompt."""
    head, sep, instruction = prompt.partition(f"\n{TASK_HEADER}\n")
    if not sep:
        raise PlannerError("prompt has no task section")
    options = default_options()
    for name, state in re.findall(r"^- (\w+): (on|off)$", head, flags=re.M):
        if name in options:
            options[name] = state == "on"
    return instruction.rstrip("\n"), options


# clients -------------------------------------------------------------------------------


class PlannerClient(Protocol):
    def send(self, prompt: str, model: str, timeout: float) -> str: ...


def _check_timeout(timeout: float) -> None:
    if not timeout > 0:
        raise PlannerConfigError("timeout must be positive")


class LiveClient:
    """Chat-completion HTTP client. The API key is read from the environment
    on construction and held only in memory."""

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        key_env: str = API_KEY_ENV,
        temperature: float = 0.0,
        transport: httpx.BaseTransport | None = None,
    ):
        key = os.environ.get(key_env)
        if not key:
            raise PlannerConfigError(f"live planner needs the {key_env} environment variable")
        self._key = key
        self.endpoint = endpoint
        self.temperature = temperature
        self._transport = transport

    def __repr__(self):
        return f"LiveClient(endpoint={self.endpoint!r})"

    def send(self, prompt: str, model: str, timeout: float) -> str:
        _check_timeout(timeout)
        body = {"model": model, "temperature": self.temperature, "messages": [{"role": "user", "content": prompt}]}
        headers = {"Authorization": f"Bearer {self._key}"}
        try:
            with httpx.Client(transport=self._transport, timeout=timeout) as http:
                resp = http.post(self.endpoint, json=body, headers=headers)
        except httpx.TimeoutException as exc:
            raise PlannerTimeout(f"planner endpoint timed out after {timeout} s") from exc
        except httpx.HTTPError as exc:
            raise PlannerError(f"planner endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise PlannerError(f"planner endpoint returned HTTP {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise PlannerError("planner endpoint returned an unexpected body") from exc


def recording_key(prompt: str, model: str) -> str:
    return hashlib.sha256(f"{model}\n{prompt}".encode()).hexdigest()


class RecordedClient:
    """Replays responses stored as ``<sha256(model, prompt)>.txt``; with an
    ``inner`` client, misses are forwarded and recorded."""

    def __init__(self, store: str | Path, inner: PlannerClient | None = None):
        self.store = Path(store)
        self.inner = inner

    def send(self, prompt: str, model: str, timeout: float) -> str:
        _check_timeout(timeout)
        path = self.store / f"{recording_key(prompt, model)}.txt"
        if path.is_file():
            return path.read_text()
        if self.inner is None:
            raise PlannerError(f"no recorded response for this prompt ({path.name})")
        text = self.inner.send(prompt, model, timeout)
        self.store.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        return text


class MockClient:
    """Deterministic offline planner: answers with :func:`mock_plan` in a fenced block."""

    def __init__(self, lib: MotionLibrary, templates: bool = True):
        self.lib = lib
        self.templates = templates

    def send(self, prompt: str, model: str, timeout: float) -> str:
        _check_timeout(timeout)
        instruction, options = read_prompt(prompt)
        xml = mock_plan(instruction, options, self.lib, templates=self.templates)
        return f"Here is the behavior tree.\n```xml\n{xml}```\n"


class ScriptedClient:
    """Returns canned responses in order; used for tests and fixtures."""

    def __init__(self, *responses: str):
        self.responses = list(responses)
        self.prompts: list[str] = []

    def send(self, prompt: str, model: str, timeout: float) -> str:
        _check_timeout(timeout)
        self.prompts.append(prompt)
        return self.responses[min(len(self.prompts), len(self.responses)) - 1]


# extraction and requests --------------------------------------------------------------

FENCE = re.compile(r"```[ \t]*([\w-]*)[^\n]*\n(.*?)```", re.S)


def _well_formed(text: str) -> bool:
    if re.search(r"<!(DOCTYPE|ENTITY)", text):
        return False
    try:
        ET.fromstring(text)
    except ET.ParseError:
        return False
    return True


def extract_xml(response: str) -> str:
    """First well-formed XML document in ``response``: fenced blocks are
    searched first, then the raw text (earliest start, longest span)."""
    for match in FENCE.finditer(response):
        body = match.group(2).strip()
        if body.startswith("<") and _well_formed(body):
            return body
    for start in re.finditer(r"<(?=[A-Za-z?])", response):
        i = start.start()
        if response.startswith("<?", i):
            continue
        tag = re.match(r"<([A-Za-z_][\w.-]*)", response[i:])
        if not tag:
            continue
        closers = [m.end() for m in re.finditer(rf"</{re.escape(tag.group(1))}\s*>", response[i:])]
        self_close = re.match(r"<[^<>]*/>", response[i:])
        candidates = [i + e for e in reversed(closers)] + ([i + self_close.end()] if self_close else [])
        for end in candidates:
            if _well_formed(response[i:end]):
                return response[i:end]
    raise NoXmlFound("no XML found in planner response")


@dataclass
class PlanResult:
    raw: str
    xml: str
    graph: TaskGraph | None
    report: ValidationReport
    options: dict[str, bool]
    prompt: str = ""

    @property
    def ok(self) -> bool:
        return self.graph is not None


def request_plan(
    client: PlannerClient,
    user: UserInput,
    lib: MotionLibrary,
    model: str = DEFAULT_MODEL,
    timeout: float = 60.0,
) -> PlanResult:
    prompt = assemble_prompt(user)
    options = user.effective_options()
    raw = client.send(prompt, model, timeout)
    xml = extract_xml(raw)
    try:
        graph = parse_task_graph(xml)
    except (TaskGraphSyntaxError, TaskGraphStructureError) as exc:
        report = ValidationReport([Violation("parse_error", "", "", str(exc))])
        return PlanResult(raw, xml, None, report, options, prompt)
    graph.metadata.setdefault("instruction", user.instruction)
    graph.metadata["options"] = format_options(options)
    report = validate(graph, lib, options)
    return PlanResult(raw, xml, graph if report.ok else None, report, options, prompt)


# mock planner --------------------------------------------------------------------------


def _act(name: str, **params: str) -> BtNode:
    return BtNode("Action", name, params=dict(params))


def _cond(name: str, **params: str) -> BtNode:
    return BtNode("Condition", name, params=dict(params))


def _clean(instruction: str) -> str:
    text = OPTION_DIRECTIVE.sub(" ", instruction).lower()
    return " ".join(re.sub(r"[^a-z0-9_ ]", " ", text).split())


def _steps(text: str, templates: bool) -> list[BtNode]:
    m = re.fullmatch(r"open the (\w+) and (?:pick up|grab|take) the (\w+)", text)
    if m:
        fixture, obj = m.groups()
        return [
            _act("approach_target", target=fixture),
            _act("open_drawer" if fixture != "door" else "open_door", target=fixture),
            _act("detect_object", object=obj),
            _act("approach_target", target=obj),
            _act("pick_single_arm", object=obj),
        ]
    m = re.fullmatch(r"(?:find|locate) the (\w+) and open it", text)
    if m:
        fixture = m.group(1)
        return [
            _act("search_tag", tag=fixture),
            _act("approach_target", target=fixture),
            _act("open_door" if fixture == "door" else "open_drawer", target=fixture),
        ]
    m = re.fullmatch(r"(?:pick up|grab|take) the (\w+) and (?:put|place) it (?:into|in|on|onto|on top of) the (\w+)", text)
    if m:
        obj, place = m.groups()
        return [
            _act("detect_object", object=obj),
            _act("approach_target", target=obj),
            _act("pick_single_arm", object=obj),
            _act("approach_target", target=place),
            _act("place_object", object=obj, target=place),
        ]
    m = re.fullmatch(r"open the (\w+)", text)
    if m and m.group(1) in ("door", "drawer"):
        fixture = m.group(1)
        return [_act("approach_target", target=fixture), _act(f"open_{fixture}", target=fixture)]
    if not templates:
        raise UnknownScenario(f"no bundled scenario matches {text!r}")
    nouns = re.findall(r"\bthe (\w+)", text)
    if not nouns:
        raise UnknownScenario(f"template planner found no target object in {text!r}")
    obj = nouns[-1]
    return [_act("detect_object", object=obj), _act("approach_target", target=obj), _act("pick_single_arm", object=obj)]


def _apply_options(steps: list[BtNode], options: Mapping[str, bool]) -> list[BtNode]:
    out: list[BtNode] = []
    for step in steps:
        node = step
        if options.get("manipulation_mode_selector") and step.name == "pick_single_arm":
            obj = step.params["object"]
            node = BtNode(
                "Fallback",
                children=[
                    BtNode("Sequence", children=[_cond("WhetherSingleArm", object=obj), step]),
                    _act("pick_dual_arm", object=obj),
                ],
            )
        elif options.get("locomotion_mode_selector") and step.name == "approach_target":
            target = step.params["target"]
            node = BtNode(
                "Fallback",
                children=[
                    BtNode("Sequence", children=[_cond("WhetherWheelMove", target=target), _act("wheel_move", target=target)]),
                    _act("leg_move", target=target),
                ],
            )
        out.append(node)
        if options.get("detection_recovery") and node.kind == "Action":
            out.append(BtNode("Fallback", children=[_cond("IsActionSuccess"), BtNode("Action", node.name, params=dict(node.params))]))
    return out


def mock_plan(instruction: str, options: Mapping[str, bool], lib: MotionLibrary, templates: bool = True) -> str:
    """Deterministic XML plan for ``instruction`` under ``options``."""
    opts = apply_directives(instruction, {**default_options(), **dict(options)})
    steps = _apply_options(_steps(_clean(instruction), templates), opts)
    unknown = sorted({n.name for s in steps for _, n in s.walk() if n.is_leaf} - lib.action_names - lib.condition_names)
    if unknown:
        raise PlannerError(f"mock plan uses nodes missing from the library: {unknown}")
    graph = TaskGraph(BtNode("Sequence", children=steps), metadata={"instruction": instruction, "options": format_options(opts)})
    return serialize_task_graph(graph)
