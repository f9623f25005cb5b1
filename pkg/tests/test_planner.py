import itertools
from pathlib import Path

import httpx
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from locomanip.library import FUNCTION_OPTIONS, load_library
from locomanip.planner import (
    API_KEY_ENV,
    LiveClient,
    MockClient,
    NoXmlFound,
    PlannerConfigError,
    PlannerError,
    PlannerTimeout,
    RecordedClient,
    ScriptedClient,
    UnknownScenario,
    assemble_prompt,
    extract_xml,
    load_prompts,
    make_input,
    mock_plan,
    parse_option_assignments,
    read_prompt,
    request_plan,
)
from locomanip.bt import parse_task_graph, validate
from locomanip.data import data_path

FIXTURES = Path(__file__).parent / "fixtures"
DEMO_INSTRUCTIONS = [
    "Open the drawer and pick up the drill.",
    "Find the door and open it.",
    "Pick up the cracker and put it into the box.",
    "Pick up the box and put it on the table.\n        ('manipulation_mode_selector'=on)",
]


@pytest.fixture(scope="module")
def lib():
    return load_library()


def leaf_names(graph):
    return [n.name for n in graph.root.leaves()]


def test_prompt_sections_in_order(lib):
    prompt = assemble_prompt(make_input("open the door", lib))
    positions = [prompt.index(h) for h in ("Robot Controller Brief", "### Function Options ###", "### Motion Library ###", "### Task ###")]
    assert positions == sorted(positions)
    for name in FUNCTION_OPTIONS:
        assert f"- {name}: off" in prompt
    assert prompt.endswith("### Task ###\nopen the door\n")


def test_directive_switches_option_on(lib):
    prompt = assemble_prompt(make_input(DEMO_INSTRUCTIONS[3], lib))
    assert "- manipulation_mode_selector: on" in prompt
    assert "- locomotion_mode_selector: off" in prompt
    assert DEMO_INSTRUCTIONS[3] in prompt


def test_directive_can_switch_off(lib):
    user = make_input("go ('detection_recovery'=off)", lib, {"detection_recovery": True})
    assert user.effective_options()["detection_recovery"] is False


def test_unknown_directive_rejected(lib):
    with pytest.raises(PlannerConfigError):
        assemble_prompt(make_input("go ('teleport'=on)", lib))


def test_prompt_deterministic(lib):
    assert assemble_prompt(make_input(DEMO_INSTRUCTIONS[0], lib)) == assemble_prompt(make_input(DEMO_INSTRUCTIONS[0], lib))


def test_prompt_injective_in_options(lib):
    prompts = set()
    for bits in itertools.product([False, True], repeat=3):
        prompts.add(assemble_prompt(make_input("open the door", lib, dict(zip(FUNCTION_OPTIONS, bits)))))
    assert len(prompts) == 8


@pytest.mark.parametrize("instruction", ["", "   \n"])
def test_empty_instruction(lib, instruction):
    with pytest.raises(PlannerError, match="empty"):
        assemble_prompt(make_input(instruction, lib))


def test_read_prompt_inverts_assembly(lib):
    user = make_input(DEMO_INSTRUCTIONS[3], lib, {"detection_recovery": True})
    instruction, options = read_prompt(assemble_prompt(user))
    assert instruction == DEMO_INSTRUCTIONS[3]
    assert options == user.effective_options()


def test_mock_drawer_plan_order(lib):
    result = request_plan(MockClient(lib), make_input(DEMO_INSTRUCTIONS[0], lib), lib)
    assert result.ok and result.report.ok
    names = leaf_names(result.graph)
    assert names.index("open_drawer") < names.index("pick_single_arm")


def test_mock_door_plan(lib):
    names = leaf_names(parse_task_graph(mock_plan(DEMO_INSTRUCTIONS[1], {}, lib)))
    assert "approach_target" in names and "open_door" in names
    assert names.index("approach_target") < names.index("open_door")


def test_mock_pick_then_place(lib):
    names = leaf_names(parse_task_graph(mock_plan(DEMO_INSTRUCTIONS[2], {}, lib)))
    assert names.index("pick_single_arm") < names.index("place_object")


def test_mock_box_plan_uses_selector(lib):
    result = request_plan(MockClient(lib), make_input(DEMO_INSTRUCTIONS[3], lib), lib)
    assert result.ok
    assert result.options["manipulation_mode_selector"] is True
    assert {"WhetherSingleArm", "pick_single_arm", "pick_dual_arm"} <= set(leaf_names(result.graph))


def test_template_fallback_validates(lib):
    xml = mock_plan("Bring me the yellow mug", {}, lib)
    graph = parse_task_graph(xml)
    assert validate(graph, lib, set()).ok
    assert leaf_names(graph) == ["detect_object", "approach_target", "pick_single_arm"]


def test_templates_disabled(lib):
    with pytest.raises(UnknownScenario):
        mock_plan("Bring me the yellow mug", {}, lib, templates=False)
    with pytest.raises(UnknownScenario):
        mock_plan("dance", {}, lib)


def test_mock_is_deterministic(lib):
    for ins in DEMO_INSTRUCTIONS:
        assert mock_plan(ins, {"detection_recovery": True}, lib) == mock_plan(ins, {"detection_recovery": True}, lib)


def test_bundled_graphs_are_mock_output(lib):
    for ins, name in zip(DEMO_INSTRUCTIONS, ["drawer_drill", "door_open", "cracker_box", "box_table"]):
        assert data_path("graphs", f"{name}.xml").read_text() == mock_plan(ins, {}, lib)


def test_prose_without_xml(lib):
    with pytest.raises(NoXmlFound):
        request_plan(ScriptedClient("I would open the drawer first, then grab the drill."), make_input(DEMO_INSTRUCTIONS[0], lib), lib)


def test_gated_node_with_option_off_reported(lib):
    response = (
        "```xml\n<Sequence><Fallback><Sequence><WhetherWheelMove target='door'/>"
        "<Action name='wheel_move' target='door'/></Sequence><Action name='leg_move' target='door'/></Fallback>"
        "<Action name='open_door' target='door'/></Sequence>\n```"
    )
    result = request_plan(ScriptedClient(response), make_input(DEMO_INSTRUCTIONS[1], lib), lib)
    assert result.graph is None
    assert [v.code for v in result.report.violations] == ["gated_option_off"]
    ok = request_plan(ScriptedClient(response), make_input(DEMO_INSTRUCTIONS[1], lib, {"locomotion_mode_selector": True}), lib)
    assert ok.ok


def test_parse_error_is_soft(lib):
    result = request_plan(ScriptedClient("```xml\n<Parallel><Action name='a'/></Parallel>\n```"), make_input("x the y", lib), lib)
    assert result.graph is None and result.report.violations[0].code == "parse_error"


def test_adversarial_gating_fixtures(lib):
    cases = yaml.safe_load((FIXTURES / "adversarial_gating.yaml").read_text())["cases"]
    assert len(cases) == 50
    for case in cases:
        result = request_plan(ScriptedClient(case["response"]), make_input(case["instruction"], lib, case["options"]), lib)
        assert result.graph is None, case["id"]
        flagged = {v.node.split("(")[1].rstrip(")") for v in result.report.violations if v.code == "gated_option_off"}
        assert set(case["gated"]) <= flagged, case["id"]


INSTRUCTIONS = st.sampled_from(DEMO_INSTRUCTIONS + ["Open the drawer.", "Bring me the mug", "fetch the bottle"])


@settings(max_examples=60, deadline=None)
@given(INSTRUCTIONS, st.fixed_dictionaries({o: st.booleans() for o in FUNCTION_OPTIONS}))
def test_gating_soundness(instruction, options):
    lib = load_library()
    result = request_plan(MockClient(lib), make_input(instruction, lib, options), lib)
    assert result.ok
    for leaf in result.graph.root.leaves():
        owner = lib.gating_option(leaf.name) if leaf.kind == "Condition" else None
        assert owner is None or result.options[owner]


# XML extraction --------------------------------------------------------------------


def test_extract_prefers_fenced_block():
    text = "<Sequence><Action name='raw'/></Sequence>\n```xml\n<Sequence><Action name='fenced'/></Sequence>\n```"
    assert "fenced" in extract_xml(text)


def test_extract_skips_malformed_fence():
    text = "```xml\n<Sequence><Action name='a'>\n```\nthen <Fallback><Action name='b'/></Fallback> works"
    assert extract_xml(text) == "<Fallback><Action name='b'/></Fallback>"


def test_extract_raw_with_surrounding_prose():
    text = "Plan: <Sequence>\n <Action name='a'/>\n</Sequence> and that is all. <b>bold</b>"
    assert extract_xml(text) == "<Sequence>\n <Action name='a'/>\n</Sequence>"


def test_extract_nothing():
    with pytest.raises(NoXmlFound):
        extract_xml("a < b and c > d")


# clients ------------------------------------------------------------------------------


def test_live_requires_credential(monkeypatch):
    monkeypatch.delenv(API_KEY_ENV, raising=False)
    with pytest.raises(PlannerConfigError, match=API_KEY_ENV):
        LiveClient()


def test_live_wire_format(monkeypatch, lib, tmp_path):
    monkeypatch.setenv(API_KEY_ENV, "sk-test-123")
    seen = {}

    def handler(request: httpx.Request):
        seen["auth"] = request.headers["Authorization"]
        seen["body"] = request.read()
        reply = mock_plan(DEMO_INSTRUCTIONS[1], {}, lib)
        return httpx.Response(200, json={"choices": [{"message": {"content": f"```xml\n{reply}```"}}]})

    client = LiveClient(endpoint="https://planner.invalid/v1/chat", transport=httpx.MockTransport(handler))
    recorded = RecordedClient(tmp_path / "rec", inner=client)
    result = request_plan(recorded, make_input(DEMO_INSTRUCTIONS[1], lib), lib, model="m1", timeout=5)
    assert result.ok
    assert seen["auth"] == "Bearer sk-test-123"
    assert b'"model":"m1"' in seen["body"].replace(b" ", b"")
    assert "sk-test" not in repr(client)
    files = list((tmp_path / "rec").iterdir())
    assert len(files) == 1 and "sk-test" not in files[0].read_text()
    replay = RecordedClient(tmp_path / "rec")
    assert request_plan(replay, make_input(DEMO_INSTRUCTIONS[1], lib), lib, model="m1").xml == result.xml


def test_live_timeout(monkeypatch, lib):
    monkeypatch.setenv(API_KEY_ENV, "k")

    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    client = LiveClient(transport=httpx.MockTransport(handler))
    with pytest.raises(PlannerTimeout):
        client.send("p", "m", 0.5)
    with pytest.raises(PlannerConfigError):
        client.send("p", "m", 0)


def test_live_http_error(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "k")
    client = LiveClient(transport=httpx.MockTransport(lambda r: httpx.Response(500)))
    with pytest.raises(PlannerError, match="500"):
        client.send("p", "m", 1)


def test_recorded_miss(tmp_path):
    with pytest.raises(PlannerError, match="no recorded response"):
        RecordedClient(tmp_path).send("p", "m", 1)


def test_custom_prompt_directory(tmp_path, lib):
    src = data_path("prompts")
    for f in src.iterdir():
        (tmp_path / f.name).write_text(f.read_text())
    (tmp_path / "basic.txt").write_text("CUSTOM BRIEF")
    prompt = assemble_prompt(make_input("go to the door", lib, prompts=load_prompts(tmp_path)))
    assert prompt.startswith("CUSTOM BRIEF\n")
    (tmp_path / "options.yaml").unlink()
    with pytest.raises(PlannerConfigError):
        load_prompts(tmp_path)


def test_option_assignments():
    assert parse_option_assignments("detection_recovery=on, manipulation_mode_selector=off") == {
        "detection_recovery": True,
        "manipulation_mode_selector": False,
    }
    with pytest.raises(PlannerConfigError):
        parse_option_assignments("warp=on")
    with pytest.raises(PlannerConfigError):
        parse_option_assignments("detection_recovery=maybe")
