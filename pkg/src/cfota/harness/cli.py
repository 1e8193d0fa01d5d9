"""Command-line front end.

    cfota simulate         train and record rounds.csv / summary.json
    cfota bound            evaluate the convergence bound only
    cfota compare-cellular same antenna budget, distributed vs central
    cfota verify-moments   Monte-Carlo check of combining statistics
    cfota sweep            repeat a run along one config axis

Every subcommand accepts --config (YAML), repeated --set overrides,
--seed, --reps and --out.  verify-moments exits nonzero when a check
fails; config errors exit with status 2.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .. import bounds as _bounds
from . import experiments
from .config import (
    ConfigError,
    apply_override,
    build_spec,
    default_config,
    load_config,
    merge_config,
)


def _common(parser):
    parser.add_argument("--config", help="YAML experiment file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one leaf key, e.g. fl.eta=0.05",
    )
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--reps", type=int, help="repetitions / sample count")
    parser.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cfota",
        description="Over-the-air federated learning on cell-free networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "run the experiment and record per-round metrics"),
        ("bound", "evaluate the closed-form convergence bound"),
        ("compare-cellular", "cell-free versus single-site, equal antennas"),
        ("verify-moments", "Monte-Carlo check of the combining statistics"),
        ("sweep", "repeat the experiment along one config axis"),
    ):
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "sweep":
            p.add_argument("--axis", required=True, help="dotted config key")
            p.add_argument(
                "--values", required=True, help="comma-separated values"
            )
    return parser


def _spec_from_args(args):
    data = default_config()
    if args.config:
        data = merge_config(data, load_config(args.config))
    for assignment in args.overrides:
        apply_override(data, assignment)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.reps is not None and args.command != "verify-moments":
        data["repetitions"] = args.reps
    return build_spec(data)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = _spec_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "simulate":
            summary, _ = experiments.run_experiment(spec, out_dir=args.out)
            print(
                f"terminal loss {summary['terminal_loss_mean']:.6g} "
                f"(hash {summary['config_hash']}, "
                f"{spec.repetitions} repetition(s))"
            )
            if args.out:
                print(f"wrote {os.path.join(args.out, 'rounds.csv')}")

        elif args.command == "bound":
            bundle = experiments.build_network(spec.network, spec.csi, spec.seed)
            task = experiments.build_task(
                spec.task, spec.network.num_uts, spec.seed
            )
            theta0 = np.zeros(task.dim)
            inputs, constants, traj = experiments.bound_trajectory_for(
                spec, task, bundle, theta0
            )
            rows = [
                (
                    t,
                    _bounds.a_coeff(
                        inputs.eta_at(t), inputs.mu, inputs.local_steps
                    ),
                    _bounds.b_coeff(inputs, constants, t),
                    traj[t],
                    float(_bounds.loss_gap_bound(traj[t], inputs.smoothness)),
                )
                for t in range(spec.fl.rounds + 1)
            ]
            print(
                f"gamma {constants.gamma:.6g}  gamma_tilde "
                f"{constants.gamma_tilde:.6g}  kappa {constants.kappa:.6g}  "
                f"kappa_tilde {constants.kappa_tilde:.6g}"
            )
            print(f"bound at round {spec.fl.rounds}: {traj[-1]:.6g}")
            if args.out:
                os.makedirs(args.out, exist_ok=True)
                experiments.write_bound_csv(
                    os.path.join(args.out, "bound.csv"), rows
                )
                print(f"wrote {os.path.join(args.out, 'bound.csv')}")

        elif args.command == "compare-cellular":
            summary = experiments.compare_cellular(spec, out_dir=args.out)
            print(
                f"cell-free terminal loss "
                f"{summary['cellfree_terminal_loss_mean']:.6g} vs cellular "
                f"{summary['cellular_terminal_loss_mean']:.6g} "
                f"({summary['cellfree_wins']}/{spec.repetitions} wins)"
            )

        elif args.command == "verify-moments":
            frames = args.reps if args.reps else 200_000
            passed, checks, _ = experiments.verify_moments(
                spec, frames, out_dir=args.out
            )
            for check in checks:
                print(check.line())
            if not passed:
                print("verification FAILED", file=sys.stderr)
                return 1
            print("verification passed")

        elif args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            import yaml

            parsed = [yaml.safe_load(v) for v in values]
            rows = experiments.sweep(spec, args.axis, parsed, out_dir=args.out)
            for value, rep, loss, dist, power in rows:
                print(
                    f"{args.axis}={value} rep={rep} loss={loss:.6g} "
                    f"dist_sq={dist:.6g}"
                )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # divergence and friends: report, fail
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
