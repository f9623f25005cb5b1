"""Regenerate the bundled task graphs and the adversarial gating fixtures.

    src/locomanip/data/graphs/*.xml            mock-planner output for the bundled instructions
    tests/fixtures/adversarial_gating.yaml     50 planner responses that use a gated
                                               condition node while its option is off

Run from the repository root:  python3 scripts/make_fixtures.py
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from locomanip.bt import BtNode, TaskGraph, parse_task_graph, serialize_task_graph
from locomanip.data import data_path
from locomanip.library import FUNCTION_OPTIONS, load_library
from locomanip.planner import default_options, mock_plan

ROOT = Path(__file__).resolve().parents[1]

GRAPHS = {
    "drawer_drill": "Open the drawer and pick up the drill.",
    "door_open": "Find the door and open it.",
    "cracker_box": "Pick up the cracker and put it into the box.",
    "box_table": "Pick up the box and put it on the table.\n        ('manipulation_mode_selector'=on)",
    "drawer_open": "Open the drawer.",
}

GATED = {"WhetherSingleArm": ("manipulation_mode_selector", "object"), "WhetherWheelMove": ("locomotion_mode_selector", "target")}
INSTRUCTIONS = list(GRAPHS.values())[:4] + ["Bring me the mug.", "Fetch the bottle from the shelf."]


def write_graphs(lib):
    out = data_path("graphs")
    out.mkdir(exist_ok=True)
    for name, instruction in GRAPHS.items():
        (out / f"{name}.xml").write_text(mock_plan(instruction, default_options(), lib))


def inject(root: BtNode, cond: str, arg: str, rng) -> None:
    """Insert a gated condition somewhere in the tree."""
    leaf = BtNode("Condition", cond, params={arg: "target_obj" if arg == "object" else "target_place"})
    composites = [n for _, n in root.walk() if not n.is_leaf]
    host = composites[rng.integers(len(composites))]
    style = rng.integers(3)
    if style == 0:
        host.children.insert(int(rng.integers(len(host.children) + 1)), leaf)
    elif style == 1:
        i = int(rng.integers(len(host.children)))
        host.children[i] = BtNode("Fallback", children=[BtNode("Sequence", children=[leaf, host.children[i]]), host.children[i]])
    else:
        host.children.append(BtNode("Sequence", children=[leaf]))


def render(xml: str, style: int) -> str:
    if style == 0:
        return f"```xml\n{xml}```\n"
    if style == 1:
        return f"Sure. The plan below covers the task.\n\n```\n{xml}```\nLet me know if anything should change."
    if style == 2:
        return f"Plan:\n{xml}\nDone."
    if style == 3:
        return f"```xml\n<root>\n{xml}</root>\n```"
    # shorthand condition elements, as some models write them
    for cond in GATED:
        xml = xml.replace(f'<Condition name="{cond}" ', f"<{cond} ")
    return f"```xml\n{xml}```"


def adversarial(lib, n=50, seed=7):
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n):
        instruction = INSTRUCTIONS[i % len(INSTRUCTIONS)]
        # an inline '=on' directive would legitimately enable the option
        allowed = [c for c in GATED if f"'{GATED[c][0]}'=on" not in instruction]
        conds = [c for c in allowed if rng.random() < 0.6] or [allowed[i % len(allowed)]]
        options = {o: bool(rng.random() < 0.5) for o in FUNCTION_OPTIONS}
        for c in conds:
            options[GATED[c][0]] = False
        if i % 10 == 9:
            # directive in the text explicitly switches the option off
            owner = GATED[conds[0]][0]
            options[owner] = True
            instruction = f"{instruction} ('{owner}'=off)"
        base = mock_plan(instruction, {**options}, lib)
        graph = parse_task_graph(base)
        for c in conds:
            inject(graph.root, c, GATED[c][1], rng)
        xml = serialize_task_graph(TaskGraph(graph.root) if i % 2 else graph)
        cases.append(
            {
                "id": f"adv{i:02d}",
                "instruction": instruction,
                "options": options,
                "gated": sorted(conds),
                "response": render(xml, i % 5),
            }
        )
    return cases


def main():
    lib = load_library()
    write_graphs(lib)
    path = ROOT / "tests" / "fixtures" / "adversarial_gating.yaml"
    path.parent.mkdir(exist_ok=True)
    header = "# Generated by scripts/make_fixtures.py. Every response must be rejected by the validator.\n"
    path.write_text(header + yaml.safe_dump({"cases": adversarial(lib)}, sort_keys=False, width=120))
    print("wrote graphs and", path)


if __name__ == "__main__":
    main()
