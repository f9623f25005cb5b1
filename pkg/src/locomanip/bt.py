"""Task-graph XML parsing, validation and behavior-tree execution.

Grammar (whitespace and comments ignored)::

    document   := wrapper | node
    wrapper    := <root ...> document </root>
                | <BehaviorTree [instruction=".."] [options=".."] ...> node </BehaviorTree>
    node       := composite | leaf
    composite  := <Sequence [name=".."]> node+ </Sequence>
                | <Fallback [name=".."]> node+ </Fallback>
    leaf       := <Action name=".." {param=".."}/>
                | <Condition name=".." {param=".."}/>
                | <CondName {param=".."}/>        CondName matches (Is|Whether|Has|Can)[A-Z]\\w*

Ticking uses memory semantics: a composite resumes from the child that last
returned Running. One extension to plain Sequence semantics supports the
failure-recovery pattern: when an Action fails and the next sibling is a
Fallback whose first child is ``IsActionSuccess``, the Sequence continues
into that Fallback instead of failing, so the Fallback can repeat the action.
"""

from __future__ import annotations

import enum
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping
from xml.sax.saxutils import quoteattr

COMPOSITES = ("Sequence", "Fallback")
LEAVES = ("Action", "Condition")
WRAPPERS = ("root", "BehaviorTree")
CONDITION_SHORTHAND = re.compile(r"^(Is|Whether|Has|Can)[A-Z]\w*$")
RECOVERY_CONDITION = "IsActionSuccess"


class TickStatus(enum.Enum):
    Success = "Success"
    Failure = "Failure"
    Running = "Running"


class TaskGraphSyntaxError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line
        self.column = column


class TaskGraphStructureError(ValueError):
    pass


class MissingHandlerError(LookupError):
    pass


@dataclass(eq=False)
class BtNode:
    kind: str
    name: str = ""
    children: list["BtNode"] = field(default_factory=list)
    params: dict[str, str] = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return self.kind in LEAVES

    def key(self):
        """Structural identity (kind, name, params, children)."""
        return (self.kind, self.name, tuple(sorted(self.params.items())), tuple(c.key() for c in self.children))

    def __eq__(self, other):
        return isinstance(other, BtNode) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def walk(self, path: str = ""):
        """Yield ``(path, node)`` depth-first; paths look like ``0/2/1``."""
        yield path, self
        for i, child in enumerate(self.children):
            yield from child.walk(f"{path}/{i}" if path else str(i))

    def leaves(self):
        return [n for _, n in self.walk() if n.is_leaf]

    def label(self) -> str:
        return f"{self.kind}({self.name})" if self.name else self.kind


@dataclass(eq=False)
class TaskGraph:
    root: BtNode
    source: str = ""
    metadata: dict[str, str] = field(default_factory=dict)


# parsing ------------------------------------------------------------------------


def _convert(elem: ET.Element) -> BtNode:
    tag = elem.tag
    attrs = dict(elem.attrib)
    children = list(elem)
    if tag in COMPOSITES:
        if not children:
            raise TaskGraphStructureError(f"<{tag}> needs at least one child")
        return BtNode(tag, attrs.pop("name", ""), [_convert(c) for c in children], attrs)
    if tag in LEAVES or CONDITION_SHORTHAND.match(tag):
        if children:
            raise TaskGraphStructureError(f"<{tag}> is a leaf and cannot have children")
        if tag in LEAVES:
            name = attrs.pop("name", None) or attrs.pop("ID", None)
            if not name:
                raise TaskGraphStructureError(f"<{tag}> needs a name attribute")
            return BtNode(tag, name, [], attrs)
        return BtNode("Condition", tag, [], attrs)
    raise TaskGraphStructureError(f"unknown node kind <{tag}>")


def parse_task_graph(xml: str) -> TaskGraph:
    if re.search(r"<!(DOCTYPE|ENTITY)", xml):
        raise TaskGraphSyntaxError("DOCTYPE and ENTITY declarations are not allowed")
    try:
        elem = ET.fromstring(xml)
    except ET.ParseError as exc:
        line, col = exc.position
        raise TaskGraphSyntaxError(str(exc).split(":")[0], line, col) from None
    metadata: dict[str, str] = {}
    while elem.tag in WRAPPERS:
        if elem.tag == "BehaviorTree":
            metadata.update({k: v for k, v in elem.attrib.items() if k != "ID"})
        kids = list(elem)
        if len(kids) != 1:
            raise TaskGraphStructureError(f"<{elem.tag}> must wrap exactly one node, found {len(kids)}")
        elem = kids[0]
    return TaskGraph(_convert(elem), xml, metadata)


# serialization -------------------------------------------------------------------


def _attrs(pairs) -> str:
    return "".join(f" {k}={quoteattr(v)}" for k, v in pairs)


def _emit(node: BtNode, depth: int, out: list[str]) -> None:
    pad = "  " * depth
    pairs = ([("name", node.name)] if node.name else []) + sorted(node.params.items())
    if node.is_leaf:
        out.append(f"{pad}<{node.kind}{_attrs(pairs)}/>")
        return
    out.append(f"{pad}<{node.kind}{_attrs(pairs)}>")
    for child in node.children:
        _emit(child, depth + 1, out)
    out.append(f"{pad}</{node.kind}>")


def serialize_task_graph(graph: TaskGraph | BtNode) -> str:
    """Canonical XML: two-space indent, ``name`` first then sorted parameters,
    shorthand conditions expanded."""
    root = graph.root if isinstance(graph, TaskGraph) else graph
    meta = graph.metadata if isinstance(graph, TaskGraph) else {}
    out: list[str] = []
    if meta:
        out.append(f"<BehaviorTree{_attrs(sorted(meta.items()))}>")
        _emit(root, 1, out)
        out.append("</BehaviorTree>")
    else:
        _emit(root, 0, out)
    return "\n".join(out) + "\n"


# validation ------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    node: str
    message: str

    def as_dict(self) -> dict:
        return {"code": self.code, "path": self.path, "node": self.node, "message": self.message}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def messages(self) -> list[str]:
        return [f"{v.path or '<root>'} {v.node}: {v.message}" for v in self.violations]

    def as_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.as_dict() for v in self.violations]}


def enabled_options(options) -> set[str]:
    if options is None:
        return set()
    if isinstance(options, Mapping):
        return {k for k, v in options.items() if v}
    return set(options)


def validate(graph: TaskGraph | BtNode, lib, options=None) -> ValidationReport:
    """Check every leaf against the library and the enabled function options."""
    root = graph.root if isinstance(graph, TaskGraph) else graph
    enabled = enabled_options(options)
    report = ValidationReport()
    for path, node in root.walk():
        if node.kind == "Action":
            if node.name in lib.condition_names:
                report.violations.append(Violation("kind_mismatch", path, node.label(), "condition node used as an action"))
            elif node.name not in lib.action_names:
                report.violations.append(Violation("unknown_action", path, node.label(), "action not in motion library"))
        elif node.kind == "Condition":
            if node.name in lib.action_names:
                report.violations.append(Violation("kind_mismatch", path, node.label(), "action node used as a condition"))
            elif node.name not in lib.condition_names:
                report.violations.append(
                    Violation("unknown_condition", path, node.label(), "condition not in motion library")
                )
            else:
                option = lib.gating_option(node.name)
                if option is not None and option not in enabled:
                    report.violations.append(
                        Violation(
                            "gated_option_off",
                            path,
                            node.label(),
                            f"gated node without enabled option '{option}'",
                        )
                    )
    return report


# execution ----------------------------------------------------------------------------


@dataclass
class LeafCall:
    """What a leaf handler sees on each tick."""

    node: BtNode
    path: str
    first: bool  # True when this tick starts a new invocation
    tick: int
    executor: "Executor"

    @property
    def params(self) -> dict[str, str]:
        return self.node.params


Handler = Callable[[LeafCall], TickStatus]


@dataclass(frozen=True)
class TraceEntry:
    tick: int
    path: str
    node: str
    status: TickStatus


@dataclass
class RunResult:
    status: str  # "Success", "Failure" or "Timeout"
    ticks: int
    trace: list[TraceEntry]

    @property
    def success(self) -> bool:
        return self.status == "Success"


class Executor:
    """Ticks one task graph against a mapping of leaf handlers.

    ``handlers`` maps leaf names to callables taking a :class:`LeafCall`.
    ``IsActionSuccess`` is built in: it reports the status of the most recently
    completed Action.
    """

    def __init__(self, graph: TaskGraph | BtNode, handlers: Mapping[str, Handler]):
        self.root = graph.root if isinstance(graph, TaskGraph) else graph
        self.handlers = dict(handlers)
        self.tick_count = 0
        self.trace: list[TraceEntry] = []
        self.invocations: dict[str, int] = {}
        self.last_action: tuple[str, TickStatus] | None = None
        self._cursor: dict[str, int] = {}
        self._running: set[str] = set()

    def missing_handlers(self) -> list[str]:
        names = {n.name for n in self.root.leaves()}
        names.discard(RECOVERY_CONDITION)
        return sorted(names - set(self.handlers))

    def tick(self) -> TickStatus:
        self.tick_count += 1
        return self._tick(self.root, "")

    def run_to_completion(self, max_ticks: int = 10_000) -> RunResult:
        missing = self.missing_handlers()
        if missing:
            raise MissingHandlerError(f"no handler for leaves {missing}")
        status = TickStatus.Running
        while status is TickStatus.Running and self.tick_count < max_ticks:
            status = self.tick()
        label = "Timeout" if status is TickStatus.Running else status.value
        return RunResult(label, self.tick_count, list(self.trace))

    def _leaf(self, node: BtNode, path: str) -> TickStatus:
        first = path not in self._running
        if first:
            self.invocations[path] = self.invocations.get(path, 0) + 1
        if node.kind == "Condition" and node.name == RECOVERY_CONDITION and RECOVERY_CONDITION not in self.handlers:
            ok = self.last_action is not None and self.last_action[1] is TickStatus.Success
            status = TickStatus.Success if ok else TickStatus.Failure
        else:
            handler = self.handlers.get(node.name)
            if handler is None:
                raise MissingHandlerError(f"no handler for {node.label()}")
            status = handler(LeafCall(node, path, first, self.tick_count, self))
            if not isinstance(status, TickStatus):
                raise TypeError(f"handler for {node.label()} returned {status!r}")
        if status is TickStatus.Running:
            self._running.add(path)
        else:
            self._running.discard(path)
            if node.kind == "Action":
                self.last_action = (node.name, status)
        self.trace.append(TraceEntry(self.tick_count, path, node.label(), status))
        return status

    @staticmethod
    def _is_recovery_guard(node: BtNode) -> bool:
        return (
            node.kind == "Fallback"
            and node.children[0].kind == "Condition"
            and node.children[0].name == RECOVERY_CONDITION
        )

    def _tick(self, node: BtNode, path: str) -> TickStatus:
        if node.is_leaf:
            return self._leaf(node, path)
        start = self._cursor.get(path, 0)
        halt_on = TickStatus.Failure if node.kind == "Sequence" else TickStatus.Success
        for i in range(start, len(node.children)):
            child = node.children[i]
            child_path = f"{path}/{i}" if path else str(i)
            status = self._tick(child, child_path)
            if status is TickStatus.Running:
                self._cursor[path] = i
                return status
            if status is halt_on:
                recover = (
                    node.kind == "Sequence"
                    and child.kind == "Action"
                    and i + 1 < len(node.children)
                    and self._is_recovery_guard(node.children[i + 1])
                )
                if not recover:
                    self._cursor.pop(path, None)
                    return status
        self._cursor.pop(path, None)
        return TickStatus.Success if node.kind == "Sequence" else TickStatus.Failure


def run_to_completion(graph: TaskGraph | BtNode, handlers: Mapping[str, Handler], max_ticks: int = 10_000) -> RunResult:
    return Executor(graph, handlers).run_to_completion(max_ticks)


def constant(status: TickStatus) -> Handler:
    """Handler that always returns ``status`` (useful for tests and dry runs)."""
    return lambda call: status


def scripted(statuses: Iterable[TickStatus]) -> Handler:
    """Handler that returns the given statuses in order, then repeats the last."""
    seq = list(statuses)
    state = {"i": 0}

    def handler(call: LeafCall) -> TickStatus:
        i = min(state["i"], len(seq) - 1)
        state["i"] += 1
        return seq[i]

    return handler
