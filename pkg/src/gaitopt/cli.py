"""Command-line entry points: run scenarios, replay logs, validate configs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .scenario import SHIPPED_SCENARIOS, ScenarioConfig
from .sim import Simulation, SimulationLog


def _load_scenario(ref: str) -> ScenarioConfig:
    path = Path(ref)
    if path.exists():
        return ScenarioConfig.from_file(path)
    if ref in SHIPPED_SCENARIOS:
        return ScenarioConfig.shipped(ref)
    raise FileNotFoundError(
        f"scenario {ref!r} is neither a file nor one of {', '.join(SHIPPED_SCENARIOS)}"
    )


def cmd_run(args) -> int:
    config = _load_scenario(args.scenario)
    if args.serve is not None:
        from .server import serve

        serve(config, port=args.serve, seed=args.seed, log_path=args.log)
        return 0

    sim = Simulation(config, seed=args.seed)
    if not args.headless:
        print(f"scenario {config.name}: {config.steps} steps, seed {args.seed}")
    last_report = -1
    while not sim.finished:
        sim.tick()
        if not args.headless and sim.steps_done != last_report:
            last_report = sim.steps_done
            print(f"  t={sim.t:7.3f}s  step {sim.steps_done}/{config.steps}")
    if args.log:
        sim.log.dump_jsonl(args.log)
        if not args.headless:
            print(f"log written to {args.log}")
    replans = sim.log.query("replan")
    failures = [e for e in sim.log.query("event") if e["event"] == "solver_failure"]
    if not args.headless:
        print(f"done: {len(replans)} plans, {len(failures)} solver failures")
        if sim.solve_stats:
            per_iter = [
                t for s in sim.solve_stats for t in s["per_iteration_ms"]
            ]
            print(
                f"solve wall time: mean {sum(s['wall_s'] for s in sim.solve_stats) / len(sim.solve_stats):.3f}s, "
                f"per-iteration mean {sum(per_iter) / len(per_iter):.1f}ms"
            )
    return 1 if failures and config.on_solver_failure == "halt" else 0


def cmd_replay(args) -> int:
    log = SimulationLog.load_jsonl(args.log)
    if args.serve is not None:
        from .server import serve_replay

        serve_replay(log, port=args.serve)
        return 0
    counts = {}
    for record in log.records:
        counts[record["kind"]] = counts.get(record["kind"], 0) + 1
    start = log.records[0]["t"] if log.records else 0.0
    end = log.records[-1]["t"] if log.records else 0.0
    print(f"{len(log.records)} records over {end - start:.2f}s")
    for kind in sorted(counts):
        print(f"  {kind}: {counts[kind]}")
    for record in log.query("replan"):
        print(
            f"  replan t={record['t']:7.3f} iters={record['iterations']} "
            f"eq={record['eq_residual']:.1e} viol={record['ineq_violation']:.1e} "
            f"defect={record['defect']:.1e}"
        )
    return 0


def cmd_check(args) -> int:
    try:
        config = _load_scenario(args.scenario)
        # dry-build one planning problem to surface geometry/config errors
        from .nominal import generate_nominal_sequence
        from .ocp import build_locomotion_problem
        from .scenario import pinch_nominal_footholds

        state = config.initial_state()
        schedule = config.schedule()
        nominal = generate_nominal_sequence(state, config.goal, schedule, config.terrain)
        nominal = pinch_nominal_footholds(nominal, config.nominal_pinch)
        lp = build_locomotion_problem(
            state, schedule, nominal, config.terrain,
            config.weights, config.reach, config.friction, config.robot,
        )
    except Exception as exc:
        print(f"INVALID: {exc}", file=sys.stderr)
        return 1
    print(
        f"OK: {config.name}: horizon {schedule.horizon} phases, "
        f"{lp.grid.node_count} nodes, {config.steps} steps"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaitopt",
        description="Online base/footstep trajectory optimization scenarios",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario")
    run_p.add_argument("scenario", help="scenario file or shipped name")
    run_p.add_argument("--headless", action="store_true", help="no progress output")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--log", help="write the JSONL log here")
    run_p.add_argument("--serve", type=int, metavar="PORT",
                       help="serve the live console API instead of running headless")
    run_p.set_defaults(func=cmd_run)

    replay_p = sub.add_parser("replay", help="inspect or re-stream a log")
    replay_p.add_argument("log")
    replay_p.add_argument("--serve", type=int, metavar="PORT",
                          help="stream the log to the console UI")
    replay_p.set_defaults(func=cmd_replay)

    check_p = sub.add_parser("check", help="validate a scenario file")
    check_p.add_argument("scenario")
    check_p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
