"""Command line entry point: train, eval, replay, benchmarks and selftest."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import bench, config
from .curriculum import train_curriculum
from .errors import ConvexNavError
from .harness import ScenarioBank, evaluate, make_test_bank, metrics_csv, metrics_table, write_outputs
from .replay import write_replay
from .selftest import run_selftest


def parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _load_values(path: str | None, require: bool) -> dict:
    return config.load(path, require) if path else config.defaults()


def cmd_train(args) -> int:
    values = config.load(args.config, require=True)
    values = config.with_overrides(values, seed=args.seed, start_stage=args.stage, final_stage=args.final_stage,
                                   budget_seconds=args.budget)
    out = Path(args.out)
    config.write_resolved(values, out)
    t0 = time.perf_counter()
    result = train_curriculum(config.env_config(values), config.ppo_config(values), config.curriculum_config(values), out)
    summary = {
        "stage": result.stage,
        "reason": result.reason,
        "updates": result.updates,
        "episodes": result.episodes,
        "train_seconds": result.elapsed,
        "wall_seconds": time.perf_counter() - t0,
        "success_rolling": result.success_rolling,
        "checkpoints": {str(k): v for k, v in result.checkpoints.items()},
        "last_checkpoint": result.last_checkpoint,
    }
    (out / "train_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


def _bank(args) -> ScenarioBank:
    if args.bank:
        return ScenarioBank.load(args.bank)
    if args.stage is None:
        raise ConvexNavError("eval needs --bank or --stage")
    return make_test_bank(args.stage, args.episodes, args.seed or 0)


def cmd_eval(args) -> int:
    values = _load_values(args.config, require=False)
    env_cfg = config.env_config(values)
    bank = _bank(args)
    result = evaluate(args.checkpoint, bank, args.deterministic, env_cfg, args.workers, args.record)
    rows = [(bank.stage, result.metrics)]
    print(metrics_table(rows))
    print()
    print(metrics_csv(rows), end="")
    if args.out:
        config.write_resolved(values, args.out)
        write_outputs(args.out, bank.stage, result)
        if args.record and args.replay_episodes:
            for seed in list(result.traces)[: args.replay_episodes]:
                write_replay(result.traces, seed, args.out)
    return 0


def cmd_replay(args) -> int:
    svg, js = write_replay(args.traces, args.episode, args.out, args.every)
    print(svg)
    print(js)
    return 0


def cmd_make_bank(args) -> int:
    bank = make_test_bank(args.stage, args.episodes, args.offset)
    bank.save(args.out)
    print(args.out)
    return 0


def _report(reports) -> int:
    for r in reports:
        print(r.line())
    failed = [r.name for r in reports if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_bench_geom(args) -> int:
    return _report([
        bench.geometry_suite(n=args.n, seed=args.seed or 0),
        bench.containment_agreement_suite(n=args.n),
        bench.action_suite(n=args.n),
        bench.lidar_suite(n_worlds=max(1, args.n // 10)),
    ])


def cmd_bench_mpc(args) -> int:
    return _report([
        bench.discretization_suite(),
        bench.mpc_suite(n=args.n, seed=args.seed or 2),
        bench.qp_oracle_suite(n=max(1, args.n // 5)),
        bench.stop_cost_suite(),
    ])


def cmd_selftest(args) -> int:
    return _report(run_selftest(quick=not args.full))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="convexnav", description="Convex-region navigation: training, evaluation and checks")
    p.add_argument("--log-level", default="INFO")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run the curriculum from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--stage", type=int, help="start stage")
    t.add_argument("--final-stage", type=int)
    t.add_argument("--budget", type=float, help="wall-clock seconds")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint (or a random policy) on a scenario bank")
    e.add_argument("--config")
    e.add_argument("--checkpoint", help="omit for a uniform random policy")
    e.add_argument("--bank")
    e.add_argument("--stage", type=int)
    e.add_argument("--episodes", type=int, default=1000, help="bank size when --stage is used")
    e.add_argument("--seed", type=int, help="offset into the held-out seed range")
    e.add_argument("--deterministic", type=parse_bool, default=True)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--record", action="store_true", help="write traces.jsonl")
    e.add_argument("--replay-episodes", type=int, default=0, help="render this many recorded episodes")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("replay", help="render one recorded episode to SVG and JSON")
    r.add_argument("--traces", required=True)
    r.add_argument("--episode", type=int, required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--every", type=int, default=5)
    r.set_defaults(func=cmd_replay)

    b = sub.add_parser("make-bank", help="write a held-out scenario bank")
    b.add_argument("--stage", type=int, required=True)
    b.add_argument("--episodes", type=int, default=1000)
    b.add_argument("--offset", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_make_bank)

    g = sub.add_parser("bench-geom", help="geometry, action and lidar oracle suites")
    g.add_argument("--n", type=int, default=10_000)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_bench_geom)

    m = sub.add_parser("bench-mpc", help="dynamics, MPC and QP oracle suites")
    m.add_argument("--n", type=int, default=500)
    m.add_argument("--seed", type=int)
    m.set_defaults(func=cmd_bench_mpc)

    s = sub.add_parser("selftest", help="run every derived oracle check")
    s.add_argument("--full", action="store_true", help="full-size randomized suites")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConvexNavError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": args.command}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
