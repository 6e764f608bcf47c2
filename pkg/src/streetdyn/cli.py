"""Command line: plan, simulate, train, eval."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path

from . import llm
from .lanegraph import LaneGraphError, load_lane_graph
from .metrics import (ROBUSTNESS_SIGMAS, evaluate_suite, format_table, noise_robustness, robustness_svg, rows_to_csv,
                      speed_table, overlay_svg, evaluate_case)
from .pipeline import PlanBundle, plan_scene, read_plan_bundle, simulate, write_plan_bundle, write_trace_bundle
from .plan import ScheduleError, SchemaError
from .planner import PlanningError
from .suite import HORIZON, SHAPES, SPEEDS, desk_env_factory, desk_suite
from .td3 import CheckpointError, DivergenceError, Td3Config, load_policy, log_to_csv, save_policy, td3_train
from .vehicle import EnvConfig, PurePursuitController

log = logging.getLogger("streetdyn")

DATA = resources.files("streetdyn").joinpath("data")


class UsageError(Exception):
    pass


def _resolve_map(value: str) -> Path:
    p = Path(value)
    if p.exists():
        return p
    bundled = DATA.joinpath("maps", f"{value}.json")
    if bundled.is_file():
        return Path(str(bundled))
    raise UsageError(f"map not found: {value}")


def _scenario(name: str) -> dict:
    f = DATA.joinpath("scenarios", f"{name}.json")
    if not f.is_file():
        raise UsageError(f"unknown scenario {name!r}")
    return json.loads(f.read_text())


def scenario_names() -> list[str]:
    return sorted(p.name[:-5] for p in DATA.joinpath("scenarios").iterdir() if p.name.endswith(".json"))


def make_controller(spec: str, env_config: EnvConfig | None = None):
    if spec in ("pure_pursuit", "pp"):
        return PurePursuitController()
    if spec.startswith("policy:"):
        return load_policy(spec[len("policy:"):], env_config)
    raise UsageError(f"unknown controller {spec!r} (use pure_pursuit or policy:<checkpoint>)")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# ---------------------------------------------------------------------------
# commands


def cmd_plan(args) -> int:
    fixtures = args.fixtures
    map_arg = args.map
    if args.scenario:
        sc = _scenario(args.scenario)
        instruction = sc["instruction"]
        map_arg = map_arg or sc["map"]
        fixtures = fixtures or str(DATA.joinpath("fixtures", sc["fixtures"]))
    elif args.instruction_file:
        instruction = Path(args.instruction_file).read_text()
    elif args.instruction:
        instruction = args.instruction
    else:
        raise UsageError("give an instruction, --instruction-file or --scenario")
    if not map_arg:
        raise UsageError("--map is required")
    if args.llm == "remote":
        client = llm.RemoteClient()
    else:
        if not fixtures:
            raise UsageError("fixture mode needs --fixtures DIR")
        client = llm.FixtureClient(fixtures)
    graph = load_lane_graph(_resolve_map(map_arg))
    planned = plan_scene(instruction, graph, client, max_retries=args.retries)
    out = write_plan_bundle(planned, graph, args.out)
    print(f"plan bundle written to {out}; schedule {list(planned.scene.schedule)}; "
          f"residual collisions {len(planned.report.residual)}")
    return 0


def cmd_simulate(args) -> int:
    bundle = read_plan_bundle(args.bundle)
    controller = make_controller(args.controller)
    sim = simulate(bundle, controller)
    out = write_trace_bundle(sim, bundle, args.out)
    print(format_table(("agent_id", "name", "type", "e_pos", "e_vel", "within_road"), sim.rows), end="")
    print(f"collision_rate {sim.collision_rate:.4f}; traces in {out}")
    return 0


def _load_json(path: str | None) -> dict:
    return json.loads(Path(path).read_text()) if path else {}


def cmd_train(args) -> int:
    doc = _load_json(args.config)
    if args.steps is not None:
        doc["total_steps"] = args.steps
    if args.seed is not None:
        doc["seed"] = args.seed
    cfg = Td3Config.full_sized(**doc) if args.full_nets else Td3Config.from_dict(doc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()

    def progress(e):
        if e.episode % 100 == 0:
            log.info("episode %d steps %d return %.2f pos_err %.3f", e.episode, e.steps, e.ret, e.pos_err)

    try:
        result = td3_train(desk_env_factory(), cfg, progress=progress)
    except DivergenceError as exc:
        raise DivergenceError(f"{exc}; lower actor_lr/critic_lr in the TD3 config") from None
    elapsed = time.perf_counter() - start
    save_policy(result.policy, out / "policy.bin")
    _write(out / "train_log.csv", log_to_csv(result.log))
    _write(out / "td3_config.json", json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    cases = desk_suite()
    rows = []
    for name, ctl in (("td3", result.policy), ("pure_pursuit", PurePursuitController())):
        for v, e_pos, e_vel in speed_table(evaluate_suite(cases, ctl)):
            rows.append((name, v, e_pos, e_vel))
    header = ("controller", "speed", "e_pos", "e_vel")
    _write(out / "paired_eval.csv", rows_to_csv(header, rows))
    print(format_table(header, rows), end="")
    print(f"trained {cfg.total_steps} steps in {elapsed:.1f} s; checkpoint {out / 'policy.bin'}")
    return 0


def _suite_cases(path: str | None):
    doc = _load_json(path)
    return desk_suite(doc.get("shapes", SHAPES), doc.get("speeds", SPEEDS), doc.get("horizon", HORIZON))


def cmd_eval(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.traces:
        return _eval_traces(args, out)
    controller = make_controller(args.checkpoint and f"policy:{args.checkpoint}" or args.controller)
    cases = _suite_cases(args.suite)
    header = ("speed", "e_pos", "e_vel")
    table = speed_table(evaluate_suite(cases, controller))
    _write(out / "errors.csv", rows_to_csv(header, table))
    print(format_table(header, table), end="")
    for c in cases:
        trace, _, _ = evaluate_case(c.planned, controller)
        _write(out / "plots" / f"{c.shape}_{c.speed:g}.svg", overlay_svg(c.planned, trace, c.name))
    if args.robustness:
        sigmas = tuple(args.sigma) if args.sigma else ROBUSTNESS_SIGMAS
        rows = []
        by_sigma = {s: [] for s in sigmas}
        for c in cases:
            for s, e_pos, e_vel in noise_robustness(c.planned, controller, sigmas, range(args.seeds)):
                by_sigma[s].append((e_pos, e_vel))
        for s in sigmas:
            vals = by_sigma[s]
            if vals:
                rows.append((s, sum(v[0] for v in vals) / len(vals), sum(v[1] for v in vals) / len(vals)))
        rheader = ("sigma", "e_pos", "e_vel")
        _write(out / "robustness.csv", rows_to_csv(rheader, rows))
        if rows:
            _write(out / "plots" / "robustness.svg", robustness_svg(rows))
        print(format_table(rheader, rows), end="")
    return 0


def _eval_traces(args, out: Path) -> int:
    from .metrics import position_velocity_error
    from .vehicle import DynamicsTrace

    if not args.plans:
        raise UsageError("--traces needs --plans PLAN_BUNDLE")
    bundle: PlanBundle = read_plan_bundle(args.plans)
    rows = []
    for aid, planned in sorted(bundle.trajectories.items()):
        f = Path(args.traces) / "traces" / f"{aid}.csv"
        trace = DynamicsTrace.from_csv(f.read_text(), aid)
        rows.append((aid, *position_velocity_error(trace, planned)))
    header = ("agent_id", "e_pos", "e_vel")
    _write(out / "errors.csv", rows_to_csv(header, rows))
    print(format_table(header, rows), end="")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="streetdyn", description="Street-scene multi-actor dynamics generation.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="turn an instruction into a plan bundle")
    p.add_argument("instruction", nargs="?")
    p.add_argument("--instruction-file")
    p.add_argument("--scenario", help=f"bundled scenario name")
    p.add_argument("--map", help="lane-graph JSON path or bundled map name")
    p.add_argument("--llm", choices=("fixture", "remote"), default="fixture")
    p.add_argument("--fixtures", help="fixture directory for --llm fixture")
    p.add_argument("--retries", type=int, default=llm.MAX_RETRIES)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="execute a plan bundle")
    p.add_argument("bundle")
    p.add_argument("--controller", default="pure_pursuit", help="pure_pursuit or policy:<checkpoint>")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the TD3 tracking policy on the desk suite")
    p.add_argument("--config", help="TD3 config JSON")
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--full-nets", action="store_true", help="use the full-size actor/critic widths")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="error tables on the desk suite or for a trace bundle")
    p.add_argument("--checkpoint")
    p.add_argument("--controller", default="pure_pursuit")
    p.add_argument("--suite", help="suite JSON with shapes/speeds/horizon")
    p.add_argument("--traces", help="trace bundle to score against --plans")
    p.add_argument("--plans")
    p.add_argument("--robustness", action="store_true")
    p.add_argument("--sigma", type=float, action="append")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return ap


EXPECTED = (UsageError, llm.LlmError, LaneGraphError, PlanningError, SchemaError, ScheduleError,
            CheckpointError, DivergenceError, FileNotFoundError, ValueError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except llm.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EXPECTED as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
