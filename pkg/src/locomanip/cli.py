"""Command-line entry point: ``locomanip <command> [flags]``.

Exit codes: 0 ok, 1 validation failure, 2 configuration error, 3 runtime
failure. Every nonzero exit writes a one-line human message followed by a
JSON error envelope on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import yaml

from .bt import TaskGraphStructureError, TaskGraphSyntaxError, parse_task_graph, serialize_task_graph, validate
from .data import data_path
from .library import LibraryError, load_library
from .morphology import MorphologyError, decide_scenario, load_morphology_config, load_scenario, scenario_paths
from .planner import (
    API_KEY_ENV,
    DEFAULT_MODEL,
    LiveClient,
    MockClient,
    PlannerConfigError,
    PlannerError,
    default_options,
    format_options,
    load_prompts,
    make_input,
    parse_option_assignments,
    request_plan,
)
from .rewards import (
    ContractError,
    GripperScene,
    RewardDomainError,
    TaskKind,
    TaskProgress,
    preset,
    r_finger,
    r_penalty,
    r_reach,
    r_rot,
    task_reward,
)
from .robot import RobotDescriptionError, load_robot_model
from .sim import SimError, SimPreconditionError, bundled_episodes, load_world, run_episode
from .wholebody import (
    ProblemError,
    TrajectoryFormatError,
    build_problem,
    read_trajectory,
    solution_trajectory,
    solve,
    write_trajectory,
)

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
E2E_TRACK_WEIGHT = 1e4


class CliError(Exception):
    def __init__(self, code: int, message: str, kind: str | None = None):
        super().__init__(message)
        self.code = code
        self.kind = kind or type(self).__name__


ERROR_CODES = (
    ((TaskGraphSyntaxError, TaskGraphStructureError, TrajectoryFormatError, RewardDomainError, ContractError), EXIT_VALIDATION),
    ((PlannerConfigError, RobotDescriptionError, LibraryError, MorphologyError, SimError, ProblemError), EXIT_CONFIG),
    ((FileNotFoundError, IsADirectoryError, yaml.YAMLError), EXIT_CONFIG),
    ((PlannerError, SimPreconditionError), EXIT_RUNTIME),
)
CODE_NAMES = {EXIT_VALIDATION: "validation", EXIT_CONFIG: "config", EXIT_RUNTIME: "runtime"}


# shared helpers ------------------------------------------------------------------------------


def _dump_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


class Context:
    """Resolved run configuration shared by every command."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = Path(args.out)
        self.options = parse_option_assignments(args.options)
        self.model = load_robot_model(args.robot)
        self.lib = load_library(args.library)
        self._prompts = None
        self._client = None

    @property
    def prompts(self):
        if self._prompts is None:
            self._prompts = load_prompts(self.args.prompts)
        return self._prompts

    @property
    def client(self):
        if self._client is None:
            if self.args.planner == "live":
                self._client = LiveClient()
            else:
                self._client = MockClient(self.lib)
        return self._client

    def plan(self, instruction: str):
        user = make_input(instruction, self.lib, self.options, self.prompts)
        return request_plan(self.client, user, self.lib, self.args.model, self.args.timeout)


def _option_states(options) -> dict[str, str]:
    full = default_options()
    full.update(options)
    return {k: "on" if v else "off" for k, v in sorted(full.items())}


def _plan_report(result) -> dict:
    return {
        "ok": result.ok,
        "options": _option_states(result.options),
        "violations": [v.as_dict() for v in result.report.violations],
    }


def _emit(doc) -> None:
    sys.stdout.write(_dump_json(doc))


# commands ----------------------------------------------------------------------------------------


def cmd_plan(ctx: Context) -> int:
    result = ctx.plan(ctx.args.instruction)
    report = _plan_report(result)
    _write(ctx.out / "plan.xml", result.xml if result.xml.endswith("\n") else result.xml + "\n")
    _write(ctx.out / "validation.json", _dump_json(report))
    _emit({**report, "xml": str(ctx.out / "plan.xml")})
    if not result.ok:
        raise CliError(EXIT_VALIDATION, "plan failed validation: " + "; ".join(result.report.messages()), "ValidationFailed")
    return EXIT_OK


def cmd_validate(ctx: Context) -> int:
    graph = parse_task_graph(Path(ctx.args.graph).read_text())
    report = validate(graph, ctx.lib, ctx.options)
    doc = {**report.as_dict(), "options": _option_states(ctx.options)}
    _write(ctx.out / "validation.json", _dump_json(doc))
    _emit(doc)
    if not report.ok:
        raise CliError(EXIT_VALIDATION, "graph failed validation: " + "; ".join(report.messages()), "ValidationFailed")
    return EXIT_OK


def _load_problem_config(args) -> dict:
    config = {}
    if args.config:
        config = yaml.safe_load(Path(args.config).read_text()) or {}
        if not isinstance(config, dict):
            raise CliError(EXIT_CONFIG, f"{args.config}: optimizer config must be a mapping")
    if args.track_weight is not None:
        config["track_weight"] = args.track_weight
    return config


def _optimize(ctx: Context, reference, config: dict, stem: str) -> tuple[dict, object]:
    problem = build_problem(ctx.model, reference, config)
    solution = solve(problem)
    traj = solution_trajectory(problem, solution)
    (ctx.out / stem).parent.mkdir(parents=True, exist_ok=True)
    write_trajectory(ctx.out / f"{stem}.csv", traj)
    report = {
        "status": solution.status.value,
        "iterations": solution.iterations,
        "objective": solution.objective,
        "kkt": solution.report.as_dict() if solution.report else {"total": solution.kkt},
        "config": config,
        "solution": f"{stem}.csv",
    }
    _write(ctx.out / f"{stem}.json", _dump_json(report))
    return report, traj


def cmd_optimize(ctx: Context) -> int:
    reference = read_trajectory(ctx.args.reference)
    report, _ = _optimize(ctx, reference, _load_problem_config(ctx.args), Path(ctx.args.reference).stem + "_solution")
    _emit(report)
    if report["status"] != "Converged":
        raise CliError(EXIT_RUNTIME, f"optimizer stopped with status {report['status']}", "NotConverged")
    return EXIT_OK


def _load_trajectories(ctx: Context, directory) -> dict:
    if directory is None:
        return {}
    root = Path(directory)
    if not root.is_dir():
        raise CliError(EXIT_CONFIG, f"trajectory directory {str(root)!r} not found")
    found = {}
    for name in ctx.lib.skills:
        for candidate in (root / f"{name}.csv", root / f"{name}_solution.csv"):
            if candidate.is_file():
                found[name] = read_trajectory(candidate)
                break
    return found


def _run(ctx: Context, graph, world_path, trajectories, out: Path) -> dict:
    world = load_world(world_path, ctx.model)
    log = run_episode(graph, world, ctx.lib, trajectories, max_ticks=ctx.args.max_ticks)
    _write(out / "episode.json", log.dumps())
    _write(out / "trace.csv", log.trace.to_csv())
    return {"world": world.name, "status": log.status, "sim_ticks": len(log.trace) - 1, "diagnostics": list(log.diagnostics)}


def cmd_run(ctx: Context) -> int:
    graph = parse_task_graph(Path(ctx.args.graph).read_text())
    report = validate(graph, ctx.lib, ctx.options)
    if not report.ok:
        raise CliError(EXIT_VALIDATION, "graph failed validation: " + "; ".join(report.messages()), "ValidationFailed")
    summary = _run(ctx, graph, ctx.args.world, _load_trajectories(ctx, ctx.args.trajectories), ctx.out)
    _emit(summary)
    if summary["status"] != "Success":
        raise CliError(EXIT_RUNTIME, f"episode ended with {summary['status']}", "EpisodeFailed")
    return EXIT_OK


REWARD_COLUMNS = ("case", "task", "r_l", "r_r", "r_rot", "r_finger", "r_task", "r_penalty", "total")
SCENE_KEYS = {"d_l", "d_r", "d_x", "d_z", "d_t", "d_b", "around", "action"}
PROGRESS_KEYS = {"l_drawer", "angle_handle", "angle_door", "h"}


def reward_rows(path) -> list[dict]:
    """Component table for every case in a reward fixture file."""
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict) or doc.get("format_version") != 1 or not isinstance(doc.get("cases"), list):
        raise RewardDomainError(f"{path}: reward fixture needs format_version: 1 and a cases list")
    rows = []
    for i, case in enumerate(doc["cases"]):
        where = f"{path}: case {i}"
        try:
            scene_raw, progress_raw = dict(case.get("scene") or {}), dict(case.get("progress") or {})
            kind = TaskKind(case["task"])
        except (KeyError, ValueError, TypeError, AttributeError) as exc:
            raise RewardDomainError(f"{where}: malformed case ({exc})") from None
        extra = (set(scene_raw) - SCENE_KEYS) | (set(progress_raw) - PROGRESS_KEYS)
        if extra:
            raise RewardDomainError(f"{where}: unknown keys {sorted(extra)}")
        scene = GripperScene(**scene_raw)
        progress = TaskProgress(**progress_raw)
        params = preset(kind)
        a = params.alpha
        parts = {
            "r_l": r_reach(scene.d_l),
            "r_r": r_reach(scene.d_r),
            "r_rot": r_rot(scene.d_x, scene.d_z),
            "r_finger": r_finger(scene.d_t, scene.d_b, params.beta),
            "r_task": task_reward(kind, scene, progress, params),
            "r_penalty": r_penalty(scene.action),
        }
        total = sum(w * parts[k] for w, k in zip(a[:6], ("r_l", "r_r", "r_rot", "r_finger", "r_task", "r_penalty")))
        rows.append({"case": case.get("name", str(i)), "task": kind.value, **parts, "total": float(total)})
    return rows


def cmd_eval_rewards(ctx: Context) -> int:
    rows = reward_rows(ctx.args.fixture or data_path("reward_cases.yaml"))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, REWARD_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    _write(ctx.out / "rewards.csv", buf.getvalue())
    width = max(len(r["case"]) for r in rows) if rows else 4
    lines = [f"{'case':<{width}}  " + "  ".join(f"{c:>10}" for c in REWARD_COLUMNS[2:])]
    for r in rows:
        lines.append(f"{r['case']:<{width}}  " + "  ".join(f"{r[c]:>10.4f}" for c in REWARD_COLUMNS[2:]))
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_eval_morphology(ctx: Context) -> int:
    cfg = load_morphology_config(ctx.args.morphology_config)
    paths = scenario_paths(ctx.args.scenarios)
    if not paths:
        raise CliError(EXIT_CONFIG, f"no scenarios found in {ctx.args.scenarios}")
    scenarios = [load_scenario(p) for p in paths]

    def decide(scn):
        return decide_scenario(scn, cfg)

    with ThreadPoolExecutor(max_workers=max(1, ctx.args.jobs)) as pool:
        decisions = list(pool.map(decide, scenarios))
    records = []
    for scn, d in zip(scenarios, decisions):
        records.append(
            {"scenario": scn.name, "kind": scn.kind, "expected": scn.expected, "choice": d.choice, "source": d.source, "agree": d.choice == scn.expected}
        )
    agree = sum(r["agree"] for r in records)
    doc = {"decisions": records, "agreement": agree / len(records), "agreed": agree, "total": len(records)}
    _write(ctx.out / "morphology.json", _dump_json(doc))
    _emit({"agreed": agree, "total": len(records), "agreement": doc["agreement"]})
    if agree != len(records):
        raise CliError(EXIT_VALIDATION, f"{len(records) - agree} scenario decisions disagree with the declared outcome", "Disagreement")
    return EXIT_OK


def _graph_skills(graph, lib) -> list[str]:
    names = []
    for _, node in graph.root.walk():
        if node.kind == "Action" and node.name in lib.skills and lib.skills[node.name].executable and node.name not in names:
            names.append(node.name)
    return names


def cmd_e2e(ctx: Context) -> int:
    config = {"track_weight": E2E_TRACK_WEIGHT if ctx.args.track_weight is None else ctx.args.track_weight}
    solved: dict[str, object] = {}
    solver_reports: dict[str, dict] = {}
    episodes = []
    worst = EXIT_OK
    for ep in bundled_episodes():
        out = ctx.out / "episodes" / ep["name"]
        result = ctx.plan(ep["instruction"])
        report = _plan_report(result)
        _write(out / "plan.xml", serialize_task_graph(result.graph) if result.ok else result.xml + "\n")
        _write(out / "validation.json", _dump_json(report))
        record = {"name": ep["name"], "world": ep["world"], "plan_ok": result.ok, "skills": [], "status": None}
        if not result.ok:
            record["status"] = "Invalid"
            episodes.append(record)
            worst = max(worst, EXIT_VALIDATION)
            continue
        for skill in _graph_skills(result.graph, ctx.lib):
            if skill not in solved:
                reference = read_trajectory(ctx.lib.trajectory_path(skill))
                rep, traj = _optimize(ctx, reference, config, f"solutions/{skill}")
                solved[skill], solver_reports[skill] = traj, rep
                if rep["status"] != "Converged":
                    worst = max(worst, EXIT_RUNTIME)
            record["skills"].append(skill)
        summary = _run(ctx, result.graph, ep["world"], {k: solved[k] for k in record["skills"]}, out)
        record.update(status=summary["status"], sim_ticks=summary["sim_ticks"], diagnostics=summary["diagnostics"])
        if summary["status"] != "Success":
            worst = max(worst, EXIT_RUNTIME)
        episodes.append(record)
    doc = {
        "planner": ctx.args.planner,
        "options": format_options(_option_states_bool(ctx.options)),
        "seed": ctx.args.seed,
        "solver": {k: {"status": v["status"], "kkt": v["kkt"]["total"]} for k, v in sorted(solver_reports.items())},
        "episodes": episodes,
    }
    _write(ctx.out / "summary.json", _dump_json(doc))
    _emit({"episodes": {e["name"]: e["status"] for e in episodes}})
    if worst != EXIT_OK:
        failed = [e["name"] for e in episodes if e["status"] != "Success"]
        raise CliError(worst, f"end-to-end run incomplete: {failed or 'solver did not converge'}", "E2EFailed")
    return EXIT_OK


def _option_states_bool(options) -> dict[str, bool]:
    full = default_options()
    full.update(options)
    return full


# argument parsing ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--robot", help="robot description YAML (default: bundled model)")
    common.add_argument("--library", help="motion library YAML (default: bundled library)")
    common.add_argument("--prompts", help="prompt set directory (default: bundled prompts)")
    common.add_argument("--planner", choices=("mock", "live"), default="mock")
    common.add_argument("--model", default=DEFAULT_MODEL, help="planner model name in live mode")
    common.add_argument("--timeout", type=float, default=60.0, help="planner request timeout in seconds")
    common.add_argument("--options", default="", help="function options, e.g. manipulation_mode_selector=on")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="reserved; every command is deterministic")

    parser = argparse.ArgumentParser(
        prog="locomanip",
        description="Plan, optimize and simulate loco-manipulation tasks.",
        epilog=f"Live planning reads its API key from ${API_KEY_ENV}. Exit codes: 0 ok, 1 validation, 2 config, 3 runtime.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="instruction to validated task-graph XML")
    p.add_argument("instruction")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate", parents=[common], help="check a task graph against the library and options")
    p.add_argument("graph")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("optimize", parents=[common], help="solve the whole-body problem for a reference trajectory")
    p.add_argument("reference")
    p.add_argument("--config", help="optimizer config YAML")
    p.add_argument("--track-weight", type=float, default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("run", parents=[common], help="execute a task graph in a simulated world")
    p.add_argument("graph")
    p.add_argument("--world", required=True, help="world YAML or bundled world name")
    p.add_argument("--trajectories", help="directory of <skill>.csv trajectories to use instead of the library's")
    p.add_argument("--max-ticks", type=int, default=5000)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval-rewards", parents=[common], help="component table for a reward fixture")
    p.add_argument("fixture", nargs="?")
    p.set_defaults(func=cmd_eval_rewards)

    p = sub.add_parser("eval-morphology", parents=[common], help="rules-mode decisions on a scenario set")
    p.add_argument("scenarios", nargs="?")
    p.add_argument("--morphology-config")
    p.add_argument("--jobs", type=int, default=4)
    p.set_defaults(func=cmd_eval_morphology)

    p = sub.add_parser("e2e", parents=[common], help="plan, validate, optimize, execute and export every bundled episode")
    p.add_argument("--track-weight", type=float, default=None)
    p.add_argument("--max-ticks", type=int, default=5000)
    p.set_defaults(func=cmd_e2e)
    return parser


def _classify(exc: BaseException) -> int:
    for types, code in ERROR_CODES:
        if isinstance(exc, types):
            return code
    return EXIT_RUNTIME


def _report_error(code: int, kind: str, message: str) -> None:
    sys.stderr.write(f"locomanip: error: {message}\n")
    envelope = {"error": {"exit_code": code, "category": CODE_NAMES[code], "type": kind, "message": message}}
    sys.stderr.write(json.dumps(envelope, sort_keys=True) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return EXIT_OK
        _report_error(EXIT_CONFIG, "UsageError", "invalid command line")
        return EXIT_CONFIG
    try:
        ctx = Context(args)
        if args.planner == "live" and args.command in ("plan", "e2e"):
            ctx.client  # fail fast on a missing credential
        return args.func(ctx)
    except CliError as exc:
        _report_error(exc.code, exc.kind, str(exc))
        return exc.code
    except Exception as exc:  # noqa: BLE001 - every failure leaves through the envelope
        code = _classify(exc)
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        _report_error(code, type(exc).__name__, message)
        return code


if __name__ == "__main__":
    sys.exit(main())
