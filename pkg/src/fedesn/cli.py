"""Command-line entry point.

Thin shell over the library: ``run`` executes one scenario from a config
file, ``train`` stops after the training phase, ``capacity`` tabulates
closed-form versus brute-force memory capacity, ``sweep`` repeats runs over
a parameter grid.  Exit codes: 0 ok, 2 config problem, 3 numerical failure,
4 I/O problem.
"""

import argparse
import csv
import dataclasses
import logging
import sys

import numpy as np

from .capacity import (
    CapacityQuery,
    EmpiricalMcConfig,
    mc_closed_form,
    mc_empirical,
    mc_empirical_multi_input,
    mc_empirical_series,
)
from .config import ConfigError, default_config_text, load_scenario_config
from .esn import ReservoirSpec
from .scenario import ScenarioConfig, ScenarioError, run_scenario, sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

log = logging.getLogger(__name__)


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fedesn",
        description="wireless VR presence-break simulator and reservoir numerics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--dump-links", action="store_true", help="write link_budget.csv")
    _add_common(p_run)

    p_train = sub.add_parser("train", help="train only; write residuals and summary")
    p_train.add_argument("config")
    _add_common(p_train)

    p_cap = sub.add_parser("capacity", help="closed-form vs empirical capacity table")
    p_cap.add_argument("--topology", default="single",
                       choices=["single", "parallel", "series", "multi_input"])
    p_cap.add_argument("--neurons", type=int, nargs="+", default=[10])
    p_cap.add_argument("--ring-weight", type=float, nargs="+", default=[0.9])
    p_cap.add_argument("--depth", type=int, default=1)
    p_cap.add_argument("--rho", type=float, default=0.0,
                       help="pairwise input correlation (multi_input)")
    p_cap.add_argument("--inputs", type=int, default=2, help="components (multi_input)")
    p_cap.add_argument("--length", type=int, default=20000)
    _add_common(p_cap)

    p_sweep = sub.add_parser("sweep", help="repeat runs over a parameter grid")
    p_sweep.add_argument("param", help="ScenarioConfig field, e.g. n_bs")
    p_sweep.add_argument("values", help="comma-separated values, e.g. 3,5,7,9")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--seeds", type=int, default=20)
    p_sweep.add_argument("--workers", type=int, default=1)
    _add_common(p_sweep)

    p_def = sub.add_parser("print-config", help="print a config with every default")
    _add_common(p_def)
    return parser


def _load_config(path, args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    return load_scenario_config(path, overrides)


def _cmd_run(args, train_only=False):
    try:
        cfg = _load_config(args.config, args)
    except FileNotFoundError as exc:
        print(f"config not found: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if train_only:
        cfg = dataclasses.replace(cfg, t_eval=1, arms=("federated",))
    try:
        result = run_scenario(
            cfg, out_dir=args.out, dump_links=getattr(args, "dump_links", False)
        )
    except ScenarioError as exc:
        print(f"scenario failed: {exc}", file=sys.stderr)
        return EXIT_IO if exc.phase == "write" else EXIT_NUMERIC
    for arm in result.arms.values():
        nr = "" if np.isnan(arm.nrmse) else f" nrmse={arm.nrmse:.4f}"
        print(
            f"{arm.name}: total_bip={arm.total_bip:.3f} "
            f"mean_omega={arm.mean_omega:.3f}{nr}"
        )
    print(f"converged users: {result.converged_users}/{cfg.n_users}")
    if cfg.max_rounds and result.converged_users < cfg.n_users and train_only:
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_capacity(args):
    cfg = EmpiricalMcConfig(length=args.length, seed=0)
    writer = csv.writer(sys.stdout)
    writer.writerow(
        ["topology", "n_neurons", "ring_weight", "depth", "mc_closed", "mc_empirical", "rel_err"]
    )
    for n in args.neurons:
        for w in args.ring_weight:
            if args.topology == "multi_input":
                rho = np.full((args.inputs, args.inputs), args.rho)
                np.fill_diagonal(rho, 1.0)
                query = CapacityQuery(
                    "multi_input", n, w,
                    sigmas=tuple([1.0] * args.inputs),
                    rho=tuple(map(tuple, rho)),
                )
                emp = mc_empirical_multi_input(query, cfg)
            elif args.topology == "series":
                query = CapacityQuery("series", n, w, depth=args.depth)
                emp = mc_empirical_series(ReservoirSpec(n, w, seed=args.seed or 0), args.depth, cfg)
            else:
                query = CapacityQuery(args.topology, n, w, depth=args.depth)
                emp = mc_empirical(
                    ReservoirSpec(n, w, seed=args.seed or 0), args.topology, args.depth, cfg
                )
            closed = mc_closed_form(query)
            writer.writerow(
                [args.topology, n, w, args.depth,
                 f"{closed:.6f}", f"{emp:.6f}", f"{abs(emp - closed) / closed:.4f}"]
            )
    return EXIT_OK


def _cmd_sweep(args):
    try:
        cfg = _load_config(args.config, args)
        values = [int(v) if v.strip().isdigit() else float(v) for v in args.values.split(",")]
    except FileNotFoundError as exc:
        print(f"config not found: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = sweep(args.param, values, cfg, n_seeds=args.seeds, workers=args.workers)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioError as exc:
        print(f"scenario failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = sys.stdout
    if args.out:
        try:
            out = open(args.out, "w", newline="")
        except OSError as exc:
            print(f"cannot open output: {exc}", file=sys.stderr)
            return EXIT_IO
    writer = csv.writer(out)
    writer.writerow([args.param, "arm", "mean_total_bip", "std_total_bip"])
    for value, arm, mean, std in rows:
        writer.writerow([value, arm, f"{mean:.4f}", f"{std:.4f}"])
    if out is not sys.stdout:
        out.close()
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "train":
        return _cmd_run(args, train_only=True)
    if args.command == "capacity":
        return _cmd_capacity(args)
    if args.command == "sweep":
        return _cmd_sweep(args)
    if args.command == "print-config":
        print(default_config_text(), end="")
        return EXIT_OK
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
