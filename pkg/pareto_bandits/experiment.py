"""Experiment harness: configuration, instance generation, paired multi-trial execution and aggregation."""
import json
import math
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

import pareto_bandits as package
from .core import ActionSet, RewardModel, RegretTrace, expressive_closure, hardness_level
from .corral import corral_dims, default_learning_rate, run_corral_within_schedule, run_smooth_corral
from .environment import Environment
from .linucbpp import build_schedule, run_linucb_plus_plus
from .policies import DEFAULT_LAMBDA, run_linucb, run_linucb_oracle, run_ucb
from .simulation import Simulation
from .util import config_hash

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["algorithm", "step", "mean_regret", "band_halfwidth"]
SWEEP_COLUMNS = ["algorithm", "d_star", "alpha", "mean_terminal_regret", "band_halfwidth"]

ARM_DISTRIBUTIONS = ("sphere", "ball")
ETA_RULES = ("sqrt_MT", "T_beta")
RUNTIME_KEYS = ("parallelism", "output")


class TrialError(RuntimeError):
    """A trial failed. Carries the trial index, the algorithm and, once known, the partial aggregate."""

    def __init__(self, trial: int, algorithm: str, detail: str):
        super().__init__(trial, algorithm, detail)
        self.trial = trial
        self.algorithm = algorithm
        self.detail = detail
        self.partial: Optional["AggregateResult"] = None

    def __str__(self):
        return f"trial {self.trial}, algorithm {self.algorithm}: {self.detail}"


class ExperimentInterrupted(TrialError):
    """The run was terminated before every trial completed. `trial` is the first trial left unfinished."""


# Configuration ========================================================================================================
@dataclass(frozen=True)
class ExperimentConfig:
    T: int
    K: int
    d: int
    d_star: Union[int, Tuple[int, ...]]
    noise_std: float = 0.1
    lam: float = DEFAULT_LAMBDA
    beta: float = 0.5
    norm_bonus: Optional[float] = 0.0
    width_scale: float = 1.0
    eta_rule: Union[str, float] = "sqrt_MT"
    trials: int = 20
    seed: int = 0
    algorithms: Tuple[str, ...] = ("linucb++", "linucb", "smooth_corral")
    expressive: bool = False
    arm_distribution: str = "sphere"
    parallelism: int = 1
    output: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.d_star, (list, tuple)):
            object.__setattr__(self, "d_star", tuple(int(d_star) for d_star in self.d_star))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))

        if self.T < 2:
            raise ValueError(f"T = {self.T} < 2")
        if self.K < 1 or self.d < 1:
            raise ValueError("K and d must be at least 1")
        for d_star in self.d_stars:
            if not 1 <= d_star <= self.d:
                raise ValueError(f"1 <= d_star <= d violated: d_star = {d_star}, d = {self.d}")
            if d_star > self.T:
                raise ValueError(f"d_star <= T violated: d_star = {d_star}, T = {self.T}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if not 0.5 <= self.beta < 1:
            raise ValueError(f"beta = {self.beta} outside [1/2, 1)")
        if self.norm_bonus is not None and self.norm_bonus < 0:
            raise ValueError("norm_bonus must be nonnegative, or null for 2 ln T")
        if self.width_scale < 0:
            raise ValueError("width_scale must be nonnegative")
        if isinstance(self.eta_rule, str):
            if self.eta_rule not in ETA_RULES:
                raise ValueError(f"unknown eta rule {self.eta_rule!r}, expected one of {ETA_RULES} or a number")
        elif self.eta_rule <= 0:
            raise ValueError("a numeric eta must be positive")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if len(self.algorithms) == 0:
            raise ValueError("no algorithms configured")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {name!r}, registered: {', '.join(ALGORITHMS)}")
        if self.arm_distribution not in ARM_DISTRIBUTIONS:
            raise ValueError(f"unknown arm distribution {self.arm_distribution!r}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")

    @property
    def d_stars(self) -> Tuple[int, ...]:
        return self.d_star if isinstance(self.d_star, tuple) else (self.d_star,)

    @property
    def is_sweep(self) -> bool:
        return isinstance(self.d_star, tuple)

    @classmethod
    def from_dict(cls, data: dict):
        """Build from the flat json keys. Unknown keys are errors."""
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")

        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown configuration key(s): {', '.join(unknown)}")

        for required in ("T", "K", "d", "d_star"):
            if required not in data:
                raise ValueError(f"configuration is missing {required!r}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: Union[str, Path]):
        """Load a json config from a path or by the name of a bundled config (e.g. "intrinsic_fast")."""
        path = Path(path)
        if not path.exists():
            bundled = package.dir / "data" / f"{path.stem}.json"
            if path.suffix in ("", ".json") and path.parent == Path(".") and bundled.exists():
                path = bundled
            else:
                raise FileNotFoundError(f"no config file {path} and no bundled config named {path.stem!r}")

        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self, runtime: bool = True) -> dict:
        """Flat json form. With runtime=False the keys that cannot change results (parallelism, output) are left out."""
        data = {}
        for f in fields(self):
            if not runtime and f.name in RUNTIME_KEYS:
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            data["lambda" if f.name == "lam" else f.name] = value
        return data

    def replace(self, **overrides):
        """Copy with the given non-None fields overridden."""
        return replace(self, **{key: value for key, value in overrides.items() if value is not None})

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict(runtime=False))

    def learning_rate(self) -> float:
        if self.eta_rule == "sqrt_MT":
            return default_learning_rate(self.d, self.T)
        if self.eta_rule == "T_beta":
            return self.T ** -self.beta
        return float(self.eta_rule)


# Instances ============================================================================================================
def sample_sphere_arms(d: int, K: int, rng: np.random.Generator) -> ActionSet:
    """K arms drawn uniformly from the unit sphere in R^d."""
    if d < 1 or K < 1:
        raise ValueError("d and K must be at least 1")
    arms = rng.standard_normal((K, d))
    arms /= np.linalg.norm(arms, axis=1, keepdims=True)
    return ActionSet(arms)


def sample_ball_arms(d: int, K: int, rng: np.random.Generator) -> ActionSet:
    """K arms drawn uniformly from the unit ball in R^d."""
    if d < 1 or K < 1:
        raise ValueError("d and K must be at least 1")
    directions = rng.standard_normal((K, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = rng.random(K) ** (1.0 / d)
    return ActionSet(directions * radii[:, None])


def make_sparse_model(d: int, d_star: int, noise_std: float = 0.1) -> RewardModel:
    """theta_star with its first d_star coordinates equal to 1/sqrt(d_star) and the rest zero."""
    if not 1 <= d_star <= d:
        raise ValueError(f"1 <= d_star <= d violated: d_star = {d_star}, d = {d}")
    theta = np.zeros(d)
    theta[:d_star] = 1.0 / math.sqrt(d_star)
    return RewardModel(theta, d_star, noise_std)


def make_instance(config: ExperimentConfig, d_star: int, trial_seed: int) -> Tuple[ActionSet, RewardModel]:
    """Fresh arms for one trial; with expressive=True closed under truncation at the LinUCB++ dims."""
    rng = np.random.default_rng([trial_seed, 0])
    sample = sample_ball_arms if config.arm_distribution == "ball" else sample_sphere_arms
    actions = sample(config.d, config.K, rng)

    if config.expressive:
        schedule = build_schedule(config.T, config.beta, config.d)
        actions = expressive_closure(actions, schedule.dims[:schedule.active])

    return actions, make_sparse_model(config.d, d_star, config.noise_std)


def trial_seeds(seed: int, trials: int) -> List[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(trials)]


# Algorithms ===========================================================================================================
Runner = Callable[[ActionSet, RewardModel, ExperimentConfig, int, Environment], RegretTrace]

ALGORITHMS: Dict[str, Runner] = {
    "linucb++": lambda actions, model, config, seed, env: run_linucb_plus_plus(
        actions, model, config.T, config.beta, seed, env=env, lam=config.lam, norm_bonus=config.norm_bonus,
        width_scale=config.width_scale, expressive=config.expressive
    ),
    "linucb": lambda actions, model, config, seed, env: run_linucb(
        actions, model, config.T, seed, env=env, lam=config.lam, width_scale=config.width_scale
    ),
    "linucb_oracle": lambda actions, model, config, seed, env: run_linucb_oracle(
        actions, model, config.T, seed, env=env, lam=config.lam, width_scale=config.width_scale
    ),
    "smooth_corral": lambda actions, model, config, seed, env: run_smooth_corral(
        actions, model, config.T, config.learning_rate(), corral_dims(config.d), seed, env=env, lam=config.lam,
        width_scale=config.width_scale
    ),
    "linucb++_corral": lambda actions, model, config, seed, env: run_corral_within_schedule(
        actions, model, config.T, config.beta, seed, env=env, lam=config.lam, width_scale=config.width_scale
    ),
    "ucb": lambda actions, model, config, seed, env: run_ucb(actions, model, config.T, seed, env=env),
}
ALGORITHM_NAMES = list(ALGORITHMS)


def algorithm_seed(trial_seed: int, name: str) -> int:
    return int(np.random.SeedSequence([trial_seed, ALGORITHM_NAMES.index(name)]).generate_state(1)[0])


def run_trial(config: ExperimentConfig, d_star: int, trial: int, trial_seed: int) -> Dict[str, np.ndarray]:
    """Run every configured algorithm on one instance and one shared noise stream.

    Returns the cumulative regret curve of each algorithm.
    """
    try:
        actions, model = make_instance(config, d_star, trial_seed)
    except Exception as e:
        raise TrialError(trial, "instance", f"{type(e).__name__}: {e}") from e
    env = Environment(actions, model, trial_seed)

    curves = {}
    for name in config.algorithms:
        try:
            trace = ALGORITHMS[name](actions, model, config, algorithm_seed(trial_seed, name), env)
        except Exception as e:
            raise TrialError(trial, name, f"{type(e).__name__}: {e}") from e
        if len(trace) != config.T:
            raise TrialError(trial, name, f"trace has {len(trace)} steps, expected {config.T}")
        curves[name] = np.asarray(trace.cumulative)

    logger.debug("trial %d (d_star=%d) done: %s", trial, d_star, {n: round(float(c[-1]), 2) for n, c in curves.items()})
    return curves


# Aggregation ==========================================================================================================
@dataclass
class AggregateResult:
    """Mean cumulative regret curves with 2-sigma bands, the terminal-regret sweep table and run metadata."""
    curves: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=CURVE_COLUMNS))
    sweep: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=SWEEP_COLUMNS))
    metadata: dict = field(default_factory=dict)

    @classmethod
    def combine(cls, results: Sequence["AggregateResult"], metadata: dict = None):
        curves = [r.curves for r in results if len(r.curves)]
        sweeps = [r.sweep for r in results if len(r.sweep)]
        return cls(
            curves=pd.concat(curves, ignore_index=True) if curves else pd.DataFrame(columns=CURVE_COLUMNS),
            sweep=pd.concat(sweeps, ignore_index=True) if sweeps else pd.DataFrame(columns=SWEEP_COLUMNS),
            metadata=dict(metadata) if metadata is not None else (dict(results[0].metadata) if results else {}),
        )

    @property
    def algorithms(self) -> List[str]:
        table = self.curves if len(self.curves) else self.sweep
        return list(dict.fromkeys(table["algorithm"]))


def _band(frame: pd.DataFrame) -> pd.Series:
    """Two sample standard deviations across columns, zero for a single column."""
    return 2.0 * frame.std(axis=1, ddof=1).fillna(0.0)


def _curve_table(cumulative: Sequence[np.ndarray], algorithm: str) -> pd.DataFrame:
    lengths = {len(c) for c in cumulative}
    if len(lengths) != 1:
        raise ValueError(f"traces of mixed lengths {sorted(lengths)}")

    frame = pd.DataFrame(np.column_stack(cumulative))
    table = pd.DataFrame({
        "algorithm": algorithm,
        "step": np.arange(1, frame.shape[0] + 1),
        "mean_regret": frame.mean(axis=1),
        "band_halfwidth": _band(frame),
    })
    return table[CURVE_COLUMNS]


def aggregate_trials(traces: Sequence[RegretTrace], algorithm: str = "trial") -> AggregateResult:
    """Per-step mean and 2 x sample std (n - 1 denominator) of the cumulative regret of equally long traces."""
    if len(traces) == 0:
        raise ValueError("no traces to aggregate")
    return AggregateResult(curves=_curve_table([trace.cumulative for trace in traces], algorithm))


def _sweep_rows(config: ExperimentConfig, d_star: int, trial_curves: Sequence[Dict[str, np.ndarray]]):
    alpha = hardness_level(config.T, d_star)
    for name in config.algorithms:
        terminal = pd.DataFrame([[curves[name][-1] for curves in trial_curves]])
        yield {
            "algorithm": name,
            "d_star": d_star,
            "alpha": alpha,
            "mean_terminal_regret": float(terminal.mean(axis=1).iloc[0]),
            "band_halfwidth": float(_band(terminal).iloc[0]),
        }


def _aggregate(config: ExperimentConfig, by_d_star: Dict[int, List[Dict[str, np.ndarray]]], seeds) -> AggregateResult:
    metadata = {
        "config_hash": config.hash,
        "seed": config.seed,
        "trial_seeds": seeds,
        "config": config.to_dict(runtime=False),
    }

    curves = pd.DataFrame(columns=CURVE_COLUMNS)
    if not config.is_sweep and by_d_star.get(config.d_star):
        trial_curves = by_d_star[config.d_star]
        curves = pd.concat(
            [_curve_table([c[name] for c in trial_curves], name) for name in config.algorithms], ignore_index=True
        )

    rows = []
    if config.is_sweep:
        for d_star, trial_curves in by_d_star.items():
            if trial_curves:
                rows.extend(_sweep_rows(config, d_star, trial_curves))
    sweep = pd.DataFrame(rows, columns=SWEEP_COLUMNS)

    return AggregateResult(curves, sweep, metadata)


def _partial(config: ExperimentConfig, simulation: Simulation, keys, seeds) -> AggregateResult:
    by_d_star = {d_star: [] for d_star in config.d_stars}
    for index in sorted(simulation.results):
        by_d_star[keys[index]].append(simulation.results[index])
    return _aggregate(config, by_d_star, seeds)


def run_experiment(config: ExperimentConfig, progress_advanced: Callable[[int], None] = None) -> AggregateResult:
    """Run `trials` paired trials for every d_star of the config and aggregate them.

    A failing trial raises TrialError with `partial` set to the aggregate of the trials completed before it. An
    interrupted run raises ExperimentInterrupted, carrying the same partial aggregate.
    """
    seeds = trial_seeds(config.seed, config.trials)
    jobs, keys = [], []
    for d_star in config.d_stars:
        for trial, trial_seed in enumerate(seeds):
            jobs.append((run_trial, (config, d_star, trial, trial_seed)))
            keys.append(d_star)

    logger.info(
        "running %d trial(s) x %d d_star value(s) of %s (config %s)",
        config.trials, len(config.d_stars), ", ".join(config.algorithms), config.hash
    )
    simulation = Simulation(config.parallelism, progress_advanced)
    try:
        results = simulation.run(jobs)
    except TrialError as e:
        e.partial = _partial(config, simulation, keys, seeds)
        raise

    if simulation.terminate_flag and len(results) < len(jobs):
        missing = min(set(range(len(jobs))) - set(simulation.results))
        error = ExperimentInterrupted(
            missing % config.trials, "all", f"interrupted after {len(results)} of {len(jobs)} trial runs"
        )
        error.partial = _partial(config, simulation, keys, seeds)
        raise error

    by_d_star = {d_star: [] for d_star in config.d_stars}
    for key, curves in zip(keys, results):
        by_d_star[key].append(curves)

    result = _aggregate(config, by_d_star, seeds)
    logger.info("experiment %s finished", config.hash)
    return result
