"""Command-line entry point.  Exit codes: 0 ok, 1 failed theorem check, 2 configuration error."""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .runner import CsvFormatError, RunError, run

VERBS = {"train": "train", "compare": "compare", "theorem1": "theorem1",
         "theorem2": "theorem2", "sweep-gamma": "sweep"}
EXIT_OK, EXIT_THEOREM, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--env", help="adventure-seeker or cartpole")
    common.add_argument("--seed", type=int, help="first seed")
    common.add_argument("--seeds", type=int, metavar="N", help="number of seeds / runs")
    common.add_argument("--episodes", type=int, help="episodes per run")
    common.add_argument("--lambda", dest="lam", type=float,
                        help="fear factor (training) or the single factor used by theorem suites")
    common.add_argument("--fear-radius", type=int, help="danger labels per catastrophe (k_r)")
    common.add_argument("--k-lambda", type=int, help="fear phase-in steps")
    common.add_argument("--gamma", type=float, help="discount (agent, or evaluation discount in theorem2)")
    common.add_argument("--gamma-plan", type=float, help="planning discount for theorem2")
    common.add_argument("--out", help="output directory")
    common.add_argument("--instances", type=int, help="tabular instances for theorem suites")
    common.add_argument("--flip", type=float, help="classifier flip probability")
    common.add_argument("--normalize", action="store_true", default=None,
                        help="rescale shaped rewards into [0, 1] (theorem2 / sweep)")
    common.add_argument("--jobs", type=int, help="parallel worker processes")

    parser = _Parser(prog="intrinsic-fear", description="Intrinsic-fear DQN experiments and bound checks.")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for verb in VERBS:
        sub.add_parser(verb, parents=[common])
    return parser


def _overrides(args, mode: str) -> dict:
    training = mode in ("train", "compare")
    o = {"mode": mode, "env": args.env, "seed": args.seed, "seeds": args.seeds,
         "episodes": args.episodes, "out": args.out, "instances": args.instances, "flip": args.flip,
         "normalize": args.normalize, "jobs": args.jobs, "gamma_plan": args.gamma_plan,
         "agent.k_r": args.fear_radius, "agent.k_lambda": args.k_lambda}
    if training:
        o["agent.lam"] = args.lam
        o["agent.gamma"] = args.gamma
    else:
        o["lambdas"] = None if args.lam is None else (args.lam,)
        o["gamma"] = args.gamma
    return {k: v for k, v in o.items() if v is not None}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    mode = VERBS[args.verb]
    try:
        cfg = load_config(args.config, _overrides(args, mode))
        result = run(cfg)
    except (ConfigError, RunError, CsvFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(result.report)
    return EXIT_OK if result.passed else EXIT_THEOREM


if __name__ == "__main__":
    sys.exit(main())
