"""Command-line interface: run / scatter / validate / gen-instance."""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .env import RngStream, generate_instance


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nashbandit",
                                     description="Linear-bandit simulator with Nash-regret instrumentation")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment")
    run.add_argument("--config", help="experiment config JSON path")
    run.add_argument("--preset", choices=["paper-figure1"], help="shipped experiment preset")
    run.add_argument("--scale", type=float, default=1.0, help="preset scale factor")
    run.add_argument("--seed", type=int, help="master seed override")
    run.add_argument("--out", help="output directory override")
    run.add_argument("--workers", type=int, help="worker process count override")
    run.add_argument("--stride", type=int, help="summary stride override")
    run.add_argument("--replicas", type=int, help="replica count override")
    run.add_argument("--horizon", type=int, help="horizon override")

    sc = sub.add_parser("scatter", help="per-round pulled-mean scatter from completed logs")
    sc.add_argument("--runs", required=True, help="experiment output directory")
    sc.add_argument("--out", help="output SVG path")
    sc.add_argument("--max-points", type=int, default=5000)
    sc.add_argument("--window", type=int, nargs=2, metavar=("START", "END"),
                    help="restrict to rounds in [START, END]")

    va = sub.add_parser("validate", help="run the property-check suites")
    va.add_argument("--suite", default="all", choices=["design", "geometry", "concentration", "all"])
    va.add_argument("--seed", type=int, default=0)
    va.add_argument("--trials", type=int, default=100_000)
    va.add_argument("--out", help="JSON report path")
    va.add_argument("--inject-mgf-defect", action="store_true", help=argparse.SUPPRESS)

    gi = sub.add_parser("gen-instance", help="draw and serialize a bandit instance")
    gi.add_argument("--d", type=int, required=True)
    gi.add_argument("--n-arms", type=int, required=True)
    gi.add_argument("--max-mean", type=float, default=0.5)
    gi.add_argument("--model", default="bernoulli",
                    choices=["bernoulli", "poisson", "scaled-bernoulli"])
    gi.add_argument("--kind", default="gaussian", choices=["gaussian", "sphere"])
    gi.add_argument("--scale-bound", type=float, default=1.0)
    gi.add_argument("--seed", type=int, default=0)
    gi.add_argument("--out", required=True)
    return parser


def _cmd_run(args) -> int:
    if bool(args.config) == bool(args.preset):
        print("run: exactly one of --config or --preset is required", file=sys.stderr)
        return 2
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = harness.ExperimentConfig.from_json(fh.read())
    else:
        cfg = harness.preset_config(args.preset, scale=args.scale)
    for attr, value in (("master_seed", args.seed), ("out_dir", args.out),
                        ("workers", args.workers), ("stride", args.stride),
                        ("replicas", args.replicas), ("horizon", args.horizon)):
        if value is not None:
            setattr(cfg, attr, value)
    harness.run_experiment(cfg)
    print(f"wrote artifacts to {cfg.out_dir}")
    return 0


def _cmd_scatter(args) -> int:
    window = tuple(args.window) if args.window else None
    path = harness.write_scatter(args.runs, out_path=args.out,
                                 max_points=args.max_points, window=window)
    print(f"wrote {path}")
    return 0


def _cmd_validate(args) -> int:
    report = harness.validate(suite=args.suite, seed=args.seed, trials=args.trials,
                              inject_defect=args.inject_mgf_defect)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text + "\n")
    print(text)
    if not report["passed"]:
        failing = [c["name"] for c in report["checks"] if not c["passed"]]
        print("FAILING: " + ", ".join(failing), file=sys.stderr)
        return 1
    return 0


def _cmd_gen_instance(args) -> int:
    inst = generate_instance(args.d, args.n_arms, args.max_mean, args.model,
                             rng=RngStream(args.seed, 0, "instance"),
                             kind=args.kind, scale_bound=args.scale_bound)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(inst.to_json() + "\n")
    print(f"wrote {args.out} (digest {inst.digest()})")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "scatter":
            return _cmd_scatter(args)
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_gen_instance(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
