import re

import pytest
import yaml
from hypothesis import given, settings, strategies as st

from locomanip.bt import parse_task_graph
from locomanip.data import data_path
from locomanip.library import (
    CATALOG_HEADER,
    LibraryError,
    catalog_text,
    default_library_path,
    dumps_library,
    load_library,
    loads_library,
    save_library,
)
from locomanip.wholebody import read_trajectory


@pytest.fixture(scope="module")
def lib():
    return load_library()


def test_bundled_library_contents(lib):
    assert set(lib.skills) == {"open_drawer", "open_door", "pick_single_arm", "pick_dual_arm"}
    assert {"approach_target", "wheel_move", "leg_move", "detect_object"} <= set(lib.actions)
    gated = {c.name: c.option for c in lib.conditions.values() if c.option}
    assert gated == {
        "WhetherSingleArm": "manipulation_mode_selector",
        "WhetherWheelMove": "locomotion_mode_selector",
        "IsActionSuccess": "detection_recovery",
    }
    assert not lib.action_names & lib.condition_names


def test_trajectory_artifacts_match_model(lib, model):
    upper = {model.joint_names[i] for i in model.upper_body()}
    for name in lib.skills:
        traj = read_trajectory(lib.trajectory_path(name))
        assert upper <= set(traj.names)
        assert len(traj) > 10


def _doc(**extra):
    doc = {
        "format_version": 1,
        "skills": [],
        "actions": [{"name": "go", "attribute": "a", "function": "f"}],
        "conditions": [],
    }
    doc.update(extra)
    return yaml.safe_dump(doc)


def test_duplicate_skill_name_rejected():
    skill = {"name": "s", "attribute": "a", "function": "f", "trajectory": "x.csv", "success": "p", "executable": False}
    with pytest.raises(LibraryError, match="duplicate"):
        loads_library(_doc(skills=[skill, dict(skill)]))


def test_name_shared_between_kinds_rejected():
    with pytest.raises(LibraryError, match="duplicate"):
        loads_library(_doc(conditions=[{"name": "go", "function": "f"}]))


def test_dangling_artifact_rejected(tmp_path):
    skill = {"name": "s", "attribute": "a", "function": "f", "trajectory": "missing.csv", "success": "p"}
    with pytest.raises(LibraryError, match="not found"):
        loads_library(_doc(skills=[skill]), base_dir=tmp_path)


def test_non_executable_skill_may_lack_artifact(tmp_path):
    skill = {"name": "s", "attribute": "a", "function": "f", "trajectory": "missing.csv", "success": "p", "executable": False}
    assert "s" in loads_library(_doc(skills=[skill]), base_dir=tmp_path).skills


@pytest.mark.parametrize(
    "text, message",
    [
        ("format_version: 2\n", "format_version"),
        ("[1, 2", "malformed"),
        (_doc(conditions=[{"name": "C", "function": "f", "option": "fly_mode"}]), "unknown function option"),
        (_doc(actions=[{"name": "go", "function": "f"}]), "attribute"),
    ],
)
def test_malformed_library_rejected(text, message):
    with pytest.raises(LibraryError, match=message):
        loads_library(text)


def test_round_trip_preserves_structure_and_catalog(lib, tmp_path):
    target = tmp_path / "nested" / "lib.yaml"
    target.parent.mkdir()
    save_library(lib, target)
    again = load_library(target)
    assert again.structure()["skills"][0]["trajectory"] != lib.structure()["skills"][0]["trajectory"]
    strip = lambda d: [{k: v for k, v in rec.items() if k != "trajectory"} for rec in d["skills"]]
    assert strip(again.structure()) == strip(lib.structure())
    assert again.structure()["actions"] == lib.structure()["actions"]
    assert again.structure()["conditions"] == lib.structure()["conditions"]
    assert catalog_text(again) == catalog_text(lib)


def test_dumps_is_loadable(lib):
    again = loads_library(dumps_library(lib), base_dir=default_library_path().parent)
    assert again.structure() == lib.structure()


def test_empty_catalog_is_header_only():
    assert catalog_text(loads_library("format_version: 1\n")) == CATALOG_HEADER + "\n"


def test_catalog_mentions_each_skill_once(lib):
    text = catalog_text(lib)
    for name in lib.skills:
        assert len(re.findall(rf"\b{re.escape(name)}\b", text)) == 1


def test_catalog_deterministic():
    assert catalog_text(load_library()) == catalog_text(load_library())


NAMES = st.sets(st.from_regex(r"[a-z]{1,6}", fullmatch=True), max_size=5)


@settings(max_examples=60, deadline=None)
@given(NAMES, NAMES)
def test_catalog_injective_in_skill_sets(a, b):
    def make(names):
        skills = [
            {"name": n, "attribute": "same", "function": "same", "trajectory": "x.csv", "success": "p", "executable": False}
            for n in sorted(names)
        ]
        return loads_library(yaml.safe_dump({"format_version": 1, "skills": skills}))

    assert (catalog_text(make(a)) == catalog_text(make(b))) == (a == b)


def test_bundled_graphs_resolve(lib):
    graphs = sorted(data_path("graphs").glob("*.xml"))
    assert graphs
    for path in graphs:
        graph = parse_task_graph(path.read_text())
        for leaf in graph.root.leaves():
            names = lib.action_names if leaf.kind == "Action" else lib.condition_names
            assert leaf.name in names, (path.name, leaf.name)
