import sys
import logging
from pathlib import Path

from tqdm import tqdm

from pareto_bandits.cli import parse_args
from pareto_bandits.core import RateFunction
from pareto_bandits.experiment import ExperimentConfig, ExperimentInterrupted, TrialError, run_experiment
from pareto_bandits.lowerbound import average_regret_demo, build_adversarial_family
from pareto_bandits.results import (
    check_writable, export_instance, export_results, family_record, ordering_table, output_paths, rate_table,
    write_table
)
from pareto_bandits.util import format_exception
from pareto_bandits.verify import verify

logger = logging.getLogger("pareto_bandits")


class ProgressBar:
    """Feeds percentage progress callbacks into a tqdm bar."""

    def __init__(self, desc):
        self.bar = tqdm(total=100, desc=desc, unit="%", leave=False)
        self.current = 0

    def __call__(self, percent):
        self.bar.update(percent - self.current)
        self.current = percent

    def close(self):
        self.bar.close()


def _config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config)
    return config.replace(
        seed=args.seed,
        trials=args.trials,
        parallelism=args.parallelism,
        output=str(args.out) if args.out is not None else None,
    )


def _out_dir(config: ExperimentConfig) -> Path:
    return Path(config.output) if config.output else Path("results") / config.hash


def run(args):
    config = _config(args)
    if args.command == "sweep" and not config.is_sweep:
        raise ValueError(f"config {args.config} has a single d_star = {config.d_star}; a sweep needs a list")

    out_dir = _out_dir(config)
    check_writable(output_paths(out_dir, args.format, config.is_sweep), args.force)

    progress = ProgressBar(f"{args.command} {config.hash}")
    try:
        result = run_experiment(config, progress)
    except TrialError as e:
        if e.partial is not None:
            partial_dir = out_dir / "partial"
            export_results(e.partial, partial_dir, "table", force=True)
            logger.error("partial results of the completed trials written to %s", partial_dir)
        raise
    finally:
        progress.close()

    export_results(result, out_dir, args.format, args.force)
    return 0


def rates(args):
    functions = [RateFunction.pareto(beta) for beta in args.beta]
    functions += [RateFunction.lower_bound(theta0) for theta0 in args.theta0]

    table = rate_table(functions, args.grid)
    orderings = ordering_table(functions, args.grid)
    print(table.to_string(index=False))
    print()
    print(orderings.to_string(index=False))

    if args.out is not None:
        paths = [args.out / "rates.csv", args.out / "orderings.csv"]
        check_writable(paths, args.force)
        args.out.mkdir(parents=True, exist_ok=True)
        metadata = {"beta": args.beta, "theta0": args.theta0, "grid": args.grid}
        write_table(table, paths[0], metadata)
        write_table(orderings, paths[1], metadata)
    return 0


def lowerbound(args):
    family = build_adversarial_family(
        args.T, args.alpha_prime, args.alpha, args.budget, args.expressive, d=args.d, support=args.support
    )
    logger.info(
        "family: K = %d instances, Delta = %.6g, d = %d, regret floor 2^-10 T^(1+alpha) / B = %.2f",
        family.K, family.delta, family.d, family.floor
    )

    if args.out is not None:
        export_instance(family_record(family), args.out / "family.json", args.force)

    if args.simulate:
        progress = tqdm(total=family.K + 1, desc="instances", leave=False)
        try:
            demo = average_regret_demo(family, seed=args.seed, progress=lambda done: progress.update(1))
        finally:
            progress.close()
        print(f"regret on theta_0:              {demo.regret_null:.2f} (budget {demo.budget:g})")
        print(f"average regret on theta_1..K:   {demo.average_regret:.2f} (floor {demo.floor:.2f})")
    return 0


COMMANDS = {
    "run": run,
    "sweep": run,
    "rates": rates,
    "lowerbound": lowerbound,
    "verify": lambda args: verify(args.seed),
}


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        return COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, FileExistsError) as e:
        logger.error("%s", e)
        logger.debug(format_exception(e))
        return 2
    except ExperimentInterrupted as e:
        logger.error("%s", e)
        return 130
    except Exception as e:
        logger.error(format_exception(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
