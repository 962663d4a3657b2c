"""Command-line entry point.

    fairl generate [--kind objectworld|cop]
    fairl train [--approximator nn|gp]
    fairl bench accuracy|scalability|extension
    fairl cop
    fairl score A.json B.json

Global flags ``--seed``, ``--config`` and ``--out`` may appear before or
after the subcommand. Errors go to stderr as a single ``error: <Type>: msg``
line with exit status 1; usage errors exit with 2.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path


from . import harness, serialize
from .cop import CopConfig, cop_generate
from .learner import FairlConfig, train_gp, train_nn
from .mdp import pearson_correlation
from .objectworld import ObjectworldConfig, generate


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default,
                        help="random seed (default: the config's seed, else 0)")
    parser.add_argument("--config", type=Path, default=default, help="JSON config file")
    parser.add_argument("--out", type=Path, default=default, help="output directory (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairl", description=__doc__.split("\n\n")[0])
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="emit an environment as JSON")
    p.add_argument("--kind", choices=("objectworld", "cop"), default=None)

    p = sub.add_parser("train", parents=[common], help="train one learner on one environment")
    p.add_argument("--approximator", choices=("nn", "gp"), default=None)

    p = sub.add_parser("bench", parents=[common], help="run a benchmark sweep, CSV out")
    p.add_argument("experiment", choices=("accuracy", "scalability", "extension"))

    sub.add_parser("cop", parents=[common], help="run the COP benchmark, CSV out")

    p = sub.add_parser("score", parents=[common], help="correlation between two reward files")
    p.add_argument("a", type=Path)
    p.add_argument("b", type=Path)
    return parser


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def _load_config(args) -> dict:
    cfg = serialize.read_json(args.config) if args.config else {}
    if args.seed is None:
        args.seed = int(cfg.get("seed", 0))
    return cfg


def cmd_generate(args) -> None:
    cfg = _load_config(args)
    env_cfg = dict(cfg.get("env", cfg))
    kind = args.kind or env_cfg.pop("kind", "objectworld")
    env_cfg.pop("kind", None)
    env_cfg["seed"] = args.seed
    if kind == "cop":
        bundle = cop_generate(CopConfig(**env_cfg))[0]
    else:
        bundle = generate(ObjectworldConfig(**env_cfg))
    _emit(serialize.dumps(serialize.env_to_dict(bundle)), args.out, "env.json")


def cmd_train(args) -> None:
    cfg = _load_config(args)
    env_cfg = dict(cfg.get("env", {}))
    env_cfg.pop("kind", None)
    env = generate(ObjectworldConfig(**{**env_cfg, "seed": args.seed}))
    trajs = harness.demonstrations(
        env, cfg.get("demo_b", 1.0), cfg.get("n_trajectories", 125), cfg.get("horizon", 40), args.seed
    )
    approximator = args.approximator or cfg.get("approximator", "nn")
    fairl_cfg = FairlConfig.from_dict(cfg.get("learner", {}))
    trainer = train_gp if approximator == "gp" else train_nn
    params, r, _, _, report = trainer(env, trajs, fairl_cfg, args.seed)

    corr, degenerate = pearson_correlation(r, env.true_reward, return_flag=True)
    checkpoint = serialize.checkpoint_to_dict(params, fairl_cfg, report, args.seed)
    reward = {"reward": r.tolist(), "correlation": corr, "degenerate": degenerate}
    if args.out is None:
        sys.stdout.write(serialize.dumps({"checkpoint": checkpoint, **reward}))
        return
    args.out.mkdir(parents=True, exist_ok=True)
    serialize.write_json(checkpoint, args.out / "checkpoint.json")
    serialize.write_json(reward, args.out / "reward.json")
    (args.out / "iterations.csv").write_text(serialize.iteration_csv(report))


def _experiment(args, kind: str) -> harness.ExperimentConfig:
    cfg = _load_config(args)
    cfg.setdefault("experiment", kind)
    if cfg["experiment"] != kind:
        raise ValueError(f"config is for {cfg['experiment']!r}, not {kind!r}")
    cfg["seed"] = args.seed
    if kind in ("accuracy", "scalability") and not cfg.get("learners"):
        cfg["learners"] = [{"label": "fairl-nn", "approximator": "nn"}]
    return harness.ExperimentConfig.from_dict(cfg)


def cmd_bench(args) -> None:
    config = _experiment(args, args.experiment)
    rows = harness.run(config)
    _emit(harness.write_csv(rows), args.out, f"{args.experiment}.csv")


def cmd_cop(args) -> None:
    config = _experiment(args, "cop")
    _emit(harness.write_csv(harness.run(config)), args.out, "cop.csv")


def cmd_score(args) -> None:
    a = serialize.reward_from_json(serialize.read_json(args.a))
    b = serialize.reward_from_json(serialize.read_json(args.b))
    print(repr(pearson_correlation(a, b)))


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "bench": cmd_bench,
    "cop": cmd_cop,
    "score": cmd_score,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
