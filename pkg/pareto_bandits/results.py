"""Result files: delimited tables with an embedded metadata line, SVG charts and json instance records."""
import json
import logging
from pathlib import Path
from typing import List, Tuple

import pandas as pd

from .chart import plot_curves, plot_sweep
from .core import ActionSet, RateFunction, RewardModel, compare_rates
from .experiment import CURVE_COLUMNS, SWEEP_COLUMNS, AggregateResult
from .lowerbound import AdversarialFamily

logger = logging.getLogger(__name__)

FORMATS = ("table", "plot")
CURVES_FILE = "curves"
SWEEP_FILE = "sweep"


def check_writable(paths, force):
    if force:
        return
    existing = [str(path) for path in paths if path.exists()]
    if existing:
        raise FileExistsError(f"refusing to overwrite {', '.join(existing)} (use --force)")


def output_paths(out_dir: Path, fmt: str, sweep: bool = False) -> List[Path]:
    """Files export_results writes: both tables, or the one chart of a single run or a sweep."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")

    out_dir = Path(out_dir)
    if fmt == "table":
        return [out_dir / f"{CURVES_FILE}.csv", out_dir / f"{SWEEP_FILE}.csv"]
    return [out_dir / f"{SWEEP_FILE if sweep else CURVES_FILE}.svg"]


def write_table(table: pd.DataFrame, path: Path, metadata: dict):
    """Write a csv table whose first line is a `#` comment holding the metadata as json."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("# " + json.dumps(metadata, sort_keys=True) + "\n")
        table.to_csv(f, index=False, lineterminator="\n")
    logger.info("wrote %s", path)


def load_table(path: Path) -> Tuple[pd.DataFrame, dict]:
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
    metadata = json.loads(first[1:]) if first.startswith("#") else {}
    table = pd.read_csv(path, comment="#", float_precision="round_trip")
    return table, metadata


def export_results(result: AggregateResult, out_dir: Path, fmt: str = "table", force: bool = False) -> List[Path]:
    """Write `result` into out_dir as csv tables (fmt="table") or svg charts (fmt="plot")."""
    paths = output_paths(out_dir, fmt, sweep=len(result.sweep) > 0 and not len(result.curves))
    check_writable(paths, force)
    Path(out_dir).mkdir(parents=True, exist_ok=True)

    if fmt == "table":
        write_table(result.curves[CURVE_COLUMNS], paths[0], result.metadata)
        write_table(result.sweep[SWEEP_COLUMNS], paths[1], result.metadata)
        return paths

    config_hash = result.metadata.get("config_hash", "")
    for path in paths:
        if path.stem == CURVES_FILE:
            plot_curves(result.curves, path, config_hash)
        else:
            plot_sweep(result.sweep, path, config_hash)
    return paths


def load_results(out_dir: Path) -> AggregateResult:
    """Read back the tables written by export_results(fmt="table")."""
    out_dir = Path(out_dir)
    curves, metadata = load_table(out_dir / f"{CURVES_FILE}.csv")
    sweep, _ = load_table(out_dir / f"{SWEEP_FILE}.csv")
    return AggregateResult(curves, sweep, metadata)


# Instances ============================================================================================================
def instance_record(actions: ActionSet, model: RewardModel) -> dict:
    return {
        "arms": actions.arms.tolist(),
        "theta_star": model.theta_star.tolist(),
        "noise_std": model.noise_std,
    }


def load_instance(record: dict) -> Tuple[ActionSet, RewardModel]:
    return ActionSet(record["arms"]), RewardModel.from_theta(record["theta_star"], record["noise_std"])


def family_record(family: AdversarialFamily) -> dict:
    """Parameters, gap and floor of the family, with every instance in the shared instance schema."""
    alpha_prime, alpha = family.alphas
    return {
        "T": family.T,
        "alpha_prime": alpha_prime,
        "alpha": alpha,
        "budget": family.budget,
        "d": family.d,
        "K": family.K,
        "rho_offset": family.rho_offset,
        "support": family.support,
        "expressive": family.expressive,
        "delta": family.delta,
        "floor": family.floor,
        "instances": [instance_record(actions, model) for actions, model in family.instances],
    }


def export_instance(record: dict, path: Path, force: bool = False) -> Path:
    path = Path(path)
    check_writable([path], force)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(record, f, ensure_ascii=False, indent=4)
    logger.info("wrote %s", path)
    return path


# Rate frontier ========================================================================================================
def rate_table(rates: List[RateFunction], grid) -> pd.DataFrame:
    """One row per hardness level alpha, one column per rate function (named by its label)."""
    table = pd.DataFrame({"alpha": list(grid)})
    for rate in rates:
        table[rate.label] = rate.on_grid(grid)
    return table


def ordering_table(rates: List[RateFunction], grid) -> pd.DataFrame:
    """Pointwise order of every pair of rate functions on the grid."""
    rows = [
        {"a": a.label, "b": b.label, "order": compare_rates(a, b, grid).value}
        for i, a in enumerate(rates) for b in rates[i + 1:]
    ]
    return pd.DataFrame(rows, columns=["a", "b", "order"])
