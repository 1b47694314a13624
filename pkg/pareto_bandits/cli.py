from argparse import ArgumentParser
from pathlib import Path

import numpy as np


def float_list(list_str):
    """Comma-separated floats, e.g. "0.5,0.7"."""
    result = [float(x) for x in list_str.split(",") if x.strip()]

    if len(result) == 0:
        raise ValueError("empty list")

    return result


def alpha_grid(grid_str):
    """Either comma-separated values or start:stop:num, which expands to num evenly spaced values."""
    if ":" in grid_str:
        parts = grid_str.split(":")
        if len(parts) != 3:
            raise ValueError("incorrect number of grid fields")
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
        if num < 1:
            raise ValueError("grid needs at least one point")
        result = [float(x) for x in np.linspace(start, stop, num)]
    else:
        result = float_list(grid_str)

    if any(not 0 <= x <= 1 for x in result):
        raise ValueError("grid values must lie in [0, 1]")
    return result


def positive_int(int_str):
    result = int(int_str)

    if result < 1:
        raise ValueError("must be at least 1")

    return result


def _add_output_args(parser, formats=True):
    parser.add_argument("--out", type=Path, help="output directory (default: the config's output, else results/<hash>)")
    parser.add_argument("--force", action="store_true", help="overwrite existing result files")
    if formats:
        parser.add_argument("--format", choices=["table", "plot"], default="table", help="csv tables or svg plots")


def _add_experiment_args(parser):
    parser.add_argument("config", help="path to a json config, or the name of a bundled one (e.g. intrinsic_fast)")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--trials", type=positive_int, help="override the number of trials")
    parser.add_argument("--parallelism", type=positive_int, help="number of trials run concurrently")
    _add_output_args(parser)


def build_parser():
    parser = ArgumentParser(prog="pareto-bandits", description="LinUCB++ model selection experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run an experiment and export mean regret curves")
    _add_experiment_args(run)

    sweep = commands.add_parser("sweep", help="run an experiment over a list of d_star values")
    _add_experiment_args(sweep)

    rates = commands.add_parser("rates", help="tabulate Pareto frontier rates and their pointwise order")
    rates.add_argument("--beta", type=float_list, default=[0.5, 0.6, 0.75, 0.9], help="B1,B2,... - frontier betas")
    rates.add_argument("--grid", type=alpha_grid, default=alpha_grid("0:1:11"), help="A1,A2,... or START:STOP:NUM")
    rates.add_argument("--theta0", type=float_list, default=[], help="T1,T2,... - lower-bound curves to add")
    _add_output_args(rates, formats=False)

    lowerbound = commands.add_parser("lowerbound", help="build and export the adversarial instance family")
    lowerbound.add_argument("--T", type=positive_int, required=True, help="horizon")
    lowerbound.add_argument("--alpha-prime", type=float, required=True, help="hardness of the budgeted problem")
    lowerbound.add_argument("--alpha", type=float, required=True, help="hardness of the penalized problem")
    lowerbound.add_argument("--budget", type=float, required=True, help="regret budget B")
    lowerbound.add_argument("--d", type=positive_int, help="ambient dimension (default: ceil(T^alpha))")
    lowerbound.add_argument("--support", type=positive_int, default=1, help="coordinate holding theta_0")
    lowerbound.add_argument("--expressive", action="store_true", help="add the all-zero arm")
    lowerbound.add_argument("--simulate", action="store_true", help="run LinUCB on every instance of the family")
    lowerbound.add_argument("--seed", type=int, default=0, help="noise seed of --simulate")
    _add_output_args(lowerbound, formats=False)

    verify = commands.add_parser("verify", help="run the fast property checks")
    verify.add_argument("--seed", type=int, default=0)

    return parser


def parse_args(argv=None):
    """Parse command-line arguments for pareto-bandits."""
    return build_parser().parse_args(argv)
