import pytest
from hypothesis import given, settings, strategies as st

from locomanip.bt import (
    BtNode,
    Executor,
    MissingHandlerError,
    TaskGraph,
    TaskGraphStructureError,
    TaskGraphSyntaxError,
    TickStatus,
    constant,
    parse_task_graph,
    run_to_completion,
    scripted,
    serialize_task_graph,
    validate,
)
from locomanip.data import data_path
from locomanip.library import load_library

S, F, R = TickStatus.Success, TickStatus.Failure, TickStatus.Running


@pytest.fixture(scope="module")
def lib():
    return load_library()


def test_minimal_tree():
    g = parse_task_graph('<Sequence><Action name="open_drawer"/></Sequence>')
    assert g.root.kind == "Sequence"
    assert [(c.kind, c.name) for c in g.root.children] == [("Action", "open_drawer")]


def test_parameters_and_wrappers():
    g = parse_task_graph(
        '<root><BehaviorTree instruction="go" options="x=on">'
        '<Fallback><WhetherSingleArm object="box"/><Action name="pick_dual_arm" object="box"/></Fallback>'
        "</BehaviorTree></root>"
    )
    assert g.metadata == {"instruction": "go", "options": "x=on"}
    cond, act = g.root.children
    assert (cond.kind, cond.name, cond.params) == ("Condition", "WhetherSingleArm", {"object": "box"})
    assert act.params == {"object": "box"}


def test_syntax_error_reports_line():
    with pytest.raises(TaskGraphSyntaxError) as exc:
        parse_task_graph("<Sequence>\n  <Action name='a'/>\n")
    assert exc.value.line == 3


@pytest.mark.parametrize(
    "xml, message",
    [
        ("<Sequence></Sequence>", "at least one child"),
        ("<Parallel><Action name='a'/></Parallel>", "unknown node kind"),
        ("<Sequence><Action/></Sequence>", "name"),
        ("<Sequence><Action name='a'><Action name='b'/></Action></Sequence>", "leaf"),
        ("<root><Action name='a'/><Action name='b'/></root>", "exactly one"),
    ],
)
def test_structure_errors(xml, message):
    with pytest.raises(TaskGraphStructureError, match=message):
        parse_task_graph(xml)


def test_entity_declarations_refused():
    xml = '<?xml version="1.0"?><!DOCTYPE x [<!ENTITY a "b">]><Sequence><Action name="&a;"/></Sequence>'
    with pytest.raises(TaskGraphSyntaxError):
        parse_task_graph(xml)


def test_drawer_drill_plan_tree():
    g = parse_task_graph(data_path("graphs", "drawer_drill.xml").read_text())
    expected = BtNode(
        "Sequence",
        children=[
            BtNode("Action", "approach_target", params={"target": "drawer"}),
            BtNode("Action", "open_drawer", params={"target": "drawer"}),
            BtNode("Action", "detect_object", params={"object": "drill"}),
            BtNode("Action", "approach_target", params={"target": "drill"}),
            BtNode("Action", "pick_single_arm", params={"object": "drill"}),
        ],
    )
    assert g.root == expected


def test_validate_gated_condition(lib):
    g = parse_task_graph(
        '<Fallback><Condition name="WhetherSingleArm" object="box"/><Action name="pick_dual_arm" object="box"/></Fallback>'
    )
    report = validate(g, lib, set())
    assert [v.code for v in report.violations] == ["gated_option_off"]
    assert "gated node without enabled option" in report.violations[0].message
    assert validate(g, lib, {"manipulation_mode_selector"}).ok
    assert validate(g, lib, {"manipulation_mode_selector": True}).ok
    assert not validate(g, lib, {"manipulation_mode_selector": False}).ok


def test_validate_reports_every_violation(lib):
    g = parse_task_graph(
        "<Sequence><Action name='fly'/><Condition name='teleported'/>"
        "<Action name='WhetherWheelMove'/><Condition name='open_door'/></Sequence>"
    )
    codes = [v.code for v in validate(g, lib, set()).violations]
    assert codes == ["unknown_action", "unknown_condition", "kind_mismatch", "kind_mismatch"]


def test_sequence_of_successes_one_tick():
    g = parse_task_graph("<Sequence><Action name='a'/><Action name='b'/></Sequence>")
    result = run_to_completion(g, {"a": constant(S), "b": constant(S)})
    assert result.status == "Success" and result.ticks == 1


def test_fallback_invokes_second_once():
    g = parse_task_graph("<Fallback><Action name='a'/><Action name='b'/></Fallback>")
    ex = Executor(g, {"a": constant(F), "b": constant(S)})
    assert ex.run_to_completion().status == "Success"
    assert ex.invocations == {"0": 1, "1": 1}


def test_recovery_pattern_repeats_action():
    xml = (
        "<Sequence><Action name='detect_object' object='drill'/>"
        "<Fallback><Condition name='IsActionSuccess'/><Action name='detect_object' object='drill'/></Fallback>"
        "</Sequence>"
    )
    calls = []

    def detect(call):
        calls.append(call.path)
        return F if len(calls) == 1 else S

    ex = Executor(parse_task_graph(xml), {"detect_object": detect})
    result = ex.run_to_completion()
    assert result.status == "Success"
    assert calls == ["0", "1/1"]
    assert [(e.path, e.status) for e in result.trace] == [("0", F), ("1/0", F), ("1/1", S)]


def test_recovery_skipped_when_first_attempt_succeeds():
    xml = (
        "<Sequence><Action name='a'/>"
        "<Fallback><Condition name='IsActionSuccess'/><Action name='a'/></Fallback></Sequence>"
    )
    ex = Executor(parse_task_graph(xml), {"a": constant(S)})
    assert ex.run_to_completion().success
    assert ex.invocations == {"0": 1, "1/0": 1}


def test_plain_failure_still_halts_sequence():
    ex = Executor(parse_task_graph("<Sequence><Action name='a'/><Action name='b'/></Sequence>"), {"a": constant(F), "b": constant(S)})
    assert ex.run_to_completion().status == "Failure"
    assert "1" not in ex.invocations


def test_running_resumes_without_restarting_earlier_children():
    g = parse_task_graph("<Sequence><Action name='a'/><Action name='b'/></Sequence>")
    ex = Executor(g, {"a": constant(S), "b": scripted([R, R, S])})
    result = ex.run_to_completion()
    assert result.status == "Success" and result.ticks == 3
    assert ex.invocations == {"0": 1, "1": 1}
    assert [e.path for e in result.trace] == ["0", "1", "1", "1"]


def test_first_flag_marks_new_invocations():
    seen = []

    def handler(call):
        seen.append(call.first)
        return R if len(seen) < 3 else S

    run_to_completion(parse_task_graph("<Sequence><Action name='a'/></Sequence>"), {"a": handler})
    assert seen == [True, False, False]


def test_timeout_is_explicit():
    g = parse_task_graph("<Sequence><Action name='a'/></Sequence>")
    result = run_to_completion(g, {"a": constant(R)}, max_ticks=7)
    assert result.status == "Timeout" and result.ticks == 7


def test_missing_handler():
    g = parse_task_graph("<Sequence><Action name='a'/><Action name='b'/></Sequence>")
    with pytest.raises(MissingHandlerError, match="b"):
        run_to_completion(g, {"a": constant(S)})


def test_handler_must_return_status():
    g = parse_task_graph("<Sequence><Action name='a'/></Sequence>")
    with pytest.raises(TypeError):
        Executor(g, {"a": lambda call: True}).tick()


# property tests ------------------------------------------------------------------

LEAF_NAMES = st.sampled_from(["a", "b", "c", "IsThere"])


def trees(depth=3):
    leaf = st.builds(lambda n: BtNode("Condition" if n.startswith("Is") else "Action", n), LEAF_NAMES)
    if depth == 0:
        return leaf
    composite = st.builds(
        lambda kind, kids: BtNode(kind, children=kids),
        st.sampled_from(["Sequence", "Fallback"]),
        st.lists(trees(depth - 1), min_size=1, max_size=3),
    )
    return st.one_of(leaf, composite)


def wrap(node):
    return node if not node.is_leaf else BtNode("Sequence", children=[node])


@settings(max_examples=100, deadline=None)
@given(trees())
def test_round_trip_idempotent(root):
    g = TaskGraph(wrap(root))
    once = parse_task_graph(serialize_task_graph(g))
    assert once.root == g.root
    assert serialize_task_graph(parse_task_graph(serialize_task_graph(once))) == serialize_task_graph(once)


def test_bundled_graphs_round_trip():
    for path in sorted(data_path("graphs").glob("*.xml")):
        g = parse_task_graph(path.read_text())
        again = parse_task_graph(serialize_task_graph(g))
        assert again.root == g.root and again.metadata == g.metadata
        assert serialize_task_graph(g) == path.read_text(), path.name


STATUS_SCRIPTS = st.lists(st.sampled_from([S, F, R]), min_size=1, max_size=4)


@settings(max_examples=100, deadline=None)
@given(trees(), st.fixed_dictionaries({n: STATUS_SCRIPTS for n in ["a", "b", "c", "IsThere"]}))
def test_tick_determinism(root, scripts):
    def run():
        handlers = {n: scripted(s) for n, s in scripts.items()}
        r = run_to_completion(wrap(root), handlers, max_ticks=20)
        return r.status, r.ticks, r.trace

    assert run() == run()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([S, F]), min_size=1, max_size=6))
def test_sequence_short_circuit(statuses):
    names = [f"n{i}" for i in range(len(statuses))]
    root = BtNode("Sequence", children=[BtNode("Action", n) for n in names])
    ex = Executor(root, {n: constant(s) for n, s in zip(names, statuses)})
    result = ex.run_to_completion()
    first_fail = next((i for i, s in enumerate(statuses) if s is F), None)
    invoked = {int(p) for p in ex.invocations}
    if first_fail is None:
        assert result.status == "Success" and invoked == set(range(len(statuses)))
    else:
        assert result.status == "Failure" and invoked == set(range(first_fail + 1))


def test_validated_graph_only_invokes_library_leaves(lib):
    for path in sorted(data_path("graphs").glob("*.xml")):
        g = parse_task_graph(path.read_text())
        options = {o.split("=")[0] for o in g.metadata.get("options", "").split(",") if o.endswith("=on")}
        if not validate(g, lib, options).ok:
            continue
        called = set()

        def record(call):
            called.add(call.node.name)
            return S

        handlers = {n: record for n in lib.action_names | lib.condition_names if n != "IsActionSuccess"}
        run_to_completion(g, handlers)
        assert called <= lib.action_names | lib.condition_names
