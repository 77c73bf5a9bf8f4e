"""Command line: ``firewatch {simulate,train,evaluate,render}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

from firewatch import harness, learner, nn
from firewatch.config import load_config
from firewatch.errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="scenario YAML (defaults apply when omitted)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field, e.g. --set pf.n_particles=20 (repeatable)")
    p.add_argument("--policy", help="dqn | random | heuristic | planner")
    p.add_argument("--filter", help="ekf | pf | ekf+pf-eval")
    p.add_argument("--weights", help="Q-network weight file")
    p.add_argument("--error-rate", type=float)
    p.add_argument("--fire-steps", type=int)


def _overrides(args) -> list[str]:
    out = list(args.overrides)
    for flag, key in (("policy", "policy.kind"), ("filter", "filter"), ("weights", "policy.weights"),
                      ("error_rate", "error_rate"), ("fire_steps", "fire_steps")):
        value = getattr(args, flag, None)
        if value is not None:
            out.append(f"{key}={value}")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="firewatch", description="Two-aircraft wildfire monitoring simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run one episode and write its artifacts")
    _common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="run directory (default: <output.directory>/<name>/seed_<seed>)")

    p = sub.add_parser("train", help="train the shared Q-network")
    _common(p)
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for weights, training log and config copy")
    p.add_argument("--init-weights", help="continue from an existing weight file")

    p = sub.add_parser("evaluate", help="seeded sweep over one or more configurations")
    _common(p)
    p.add_argument("--out", help="sweep directory")
    p.add_argument("--seeds", type=int, help="use seeds 0..N-1 instead of the config's list")
    p.add_argument("--overfire", type=_floats, help="comma-separated overfire penalties to sweep")
    p.add_argument("--error-rates", type=_floats, help="comma-separated observation error rates to sweep")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("render", help="write rasters from a run directory's snapshots")
    p.add_argument("run_dir")
    p.add_argument("--out")
    return parser


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    seed = cfg.seeds[0] if args.seed is None else args.seed
    out = Path(args.out) if args.out else Path(cfg.output.directory) / cfg.name / f"seed_{seed:04d}"
    t0 = time.time()
    rec, _ = harness.run_episode(cfg, seed, out)
    print(json.dumps({"run_dir": str(out), "seconds": round(time.time() - t0, 2), **asdict(rec)}))
    return EXIT_OK


def cmd_train(args) -> int:
    overrides = _overrides(args)
    if args.episodes is not None:
        overrides.append(f"train.episodes={args.episodes}")
    cfg = load_config(args.config, overrides, check_weights=False)
    cfg = replace(cfg, policy=replace(cfg.policy, kind="dqn"))
    dqn = cfg.dqn_config()
    out = Path(args.out) if args.out else Path(cfg.output.directory) / cfg.name / "train"
    out.mkdir(parents=True, exist_ok=True)
    init = nn.load_weights(args.init_weights) if args.init_weights else None
    t0 = time.time()

    def progress(row):
        ep, ret, loss, eps = row
        print(f"episode {ep:4d}  return {ret:9.1f}  loss {loss:9.4f}  eps {eps:.3f}  {time.time() - t0:7.0f}s", flush=True)

    result = learner.train(harness.WildfireEnv(cfg), dqn, seed=args.seed, network=init, progress=progress)
    weights = out / "qnet.fwq"
    learner.save_training(result, weights, out / "training_log.csv")
    replace(cfg, policy=replace(cfg.policy, weights=str(weights.resolve()))).save(out / "config.yaml")
    print(json.dumps({"weights": str(weights), "updates": result.updates, "seconds": round(time.time() - t0, 1)}))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    overrides = _overrides(args)
    if args.seeds is not None:
        if args.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        overrides.append(f"seeds={list(range(args.seeds))}")
    cfg = load_config(args.config, overrides)
    out = Path(args.out) if args.out else Path(cfg.output.directory) / cfg.name / "sweep"
    configs = harness.variants(cfg, args.overfire, args.error_rates)
    rows = harness.sweep(configs, out, workers=args.workers)
    for r in rows:
        print(json.dumps(r))
    return EXIT_OK


def cmd_render(args) -> int:
    run_dir = Path(args.run_dir)
    if not (run_dir / "snapshots.npz").is_file():
        raise ConfigError(f"{run_dir} has no snapshots.npz")
    for p in harness.render(run_dir, args.out):
        print(p)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "evaluate": cmd_evaluate, "render": cmd_render}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
