"""Command-line entry point: ``deepq train|eval|trace|gradcheck``.

Failures print a single JSON line ``{"error": <kind>, "message": ...}`` to
stderr and exit with status 1.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .checkpoint import load_checkpoint
from .config import load_config, parse_config
from .environments import make_env
from .errors import DeepQError, InputError
from .harness import evaluate, make_phi, trace_values, train, write_trace_csv
from .nn import gradcheck

GRADCHECK_TOLERANCE = 1e-4


def _checkpoint_setup(args):
    """Checkpoint, environment and the preprocessing the network was trained with.

    The checkpoint does not record preprocessing, so it is rebuilt from
    ``--config`` (default: the built-in profile for ``--env``).
    """
    params, _ = load_checkpoint(args.checkpoint)
    if args.config:
        config = load_config(args.config)
        if config.env_name != args.env:
            raise InputError(f"--env {args.env} but the config trains on {config.env_name}")
    else:
        config = parse_config(f"env.name = {args.env}")
    env = config.make_env()
    expected = config.geometry(env)
    g = params.geometry
    if g.input_shape != expected.input_shape or g.num_actions != expected.num_actions:
        raise InputError(f"checkpoint expects input {g.input_shape} and {g.num_actions} actions; "
                         f"{args.env} with this preprocessing gives {expected.input_shape} "
                         f"and {expected.num_actions}")
    if args.frame_skip is None:
        args.frame_skip = config.agent.frame_skip
    return params, env, make_phi(config.preproc(env))


def cmd_train(args):
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if overrides:
        config = config.replace(**overrides)
    result = train(config)
    print(json.dumps({"output_dir": str(result.output_dir), **result.summary}))


def cmd_eval(args):
    params, env, phi = _checkpoint_setup(args)
    avg, returns = evaluate(params, env, phi, args.episodes, args.epsilon, args.seed, args.frame_skip)
    print(json.dumps({"avg_reward": avg, "episodes": len(returns), "epsilon": args.epsilon}))


def cmd_trace(args):
    params, env, phi = _checkpoint_setup(args)
    rows = trace_values(params, env, phi, args.seed, args.max_steps, args.frame_skip)
    if args.output:
        write_trace_csv(rows, args.output)
    else:
        write_trace_csv(rows, sys.stdout)


def cmd_gradcheck(args):
    errors = gradcheck(args.instances, args.seed)
    worst = max(errors)
    ok = worst < GRADCHECK_TOLERANCE
    print(json.dumps({"instances": len(errors), "max_relative_error": worst,
                      "tolerance": GRADCHECK_TOLERANCE, "passed": ok}))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepq", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a Q-network from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("eval", cmd_eval, "evaluate a checkpoint"),
                                 ("trace", cmd_trace, "greedy value trace as CSV")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--env", required=True, choices=["catch", "gridworld"])
        p.add_argument("--config", help="training config, to rebuild its preprocessing")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--frame-skip", type=int, help="default: the config's agent.frame_skip")
        if name == "eval":
            p.add_argument("--episodes", type=int, default=100)
            p.add_argument("--epsilon", type=float, default=0.05)
        else:
            p.add_argument("--max-steps", type=int, default=1000)
            p.add_argument("--output")
        p.set_defaults(func=func)

    p = sub.add_parser("gradcheck", help="finite-difference check of the Q-network gradients")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args) or 0
    except DeepQError as exc:
        print(json.dumps({"error": exc.kind, "message": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return 1
    except ValueError as exc:
        print(json.dumps({"error": "input", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
