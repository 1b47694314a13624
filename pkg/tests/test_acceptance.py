"""Desk-scale regret orderings. Minutes of runtime: run with --runslow."""
import numpy as np
import pytest

from pareto_bandits.experiment import ExperimentConfig, run_experiment, run_trial, trial_seeds
from pareto_bandits.results import export_results

pytestmark = pytest.mark.slow


def _terminal(curves):
    return curves.groupby("algorithm", sort=False)["mean_regret"].last()


@pytest.fixture(scope="module")
def fast_config():
    return ExperimentConfig.from_file("intrinsic_fast").replace(algorithms=("linucb++", "linucb", "smooth_corral"))


@pytest.fixture(scope="module")
def fast_result(fast_config):
    return run_experiment(fast_config)


class TestFixedIntrinsicDimension:
    def test_linucbpp_has_lowest_terminal_regret(self, fast_result):
        terminal = _terminal(fast_result.curves)
        assert terminal["linucb++"] < terminal["linucb"]
        assert terminal["linucb++"] < terminal["smooth_corral"]

    def test_linucbpp_flattens_out(self, fast_result, fast_config):
        curves = fast_result.curves
        increments = {}
        for name in ("linucb++", "linucb"):
            mean = curves.loc[curves["algorithm"] == name, "mean_regret"].to_numpy()
            increments[name] = mean[-1] - mean[fast_config.T - 500 - 1]
        assert increments["linucb++"] < increments["linucb"]

    def test_deterministic_tables(self, fast_result, fast_config, tmp_path):
        export_results(fast_result, tmp_path / "a")
        export_results(run_experiment(fast_config), tmp_path / "b")
        for name in ("curves.csv", "sweep.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestSweep:
    def test_linucb_flat_and_linucbpp_below(self):
        config = ExperimentConfig.from_file("intrinsic_sweep_fast").replace(algorithms=("linucb++", "linucb"))
        sweep = run_experiment(config).sweep

        linucb = sweep[sweep["algorithm"] == "linucb"].set_index("d_star")["mean_terminal_regret"]
        linucbpp = sweep[sweep["algorithm"] == "linucb++"].set_index("d_star")["mean_terminal_regret"]
        assert (linucb.max() - linucb.min()) / linucb.mean() < 0.15
        assert np.all(linucbpp < linucb)


class TestOracleSandwich:
    def test_oracle_beats_ambient_linucb(self):
        config = ExperimentConfig.from_file("intrinsic").replace(algorithms=("linucb", "linucb_oracle"), trials=20)
        wins = 0
        for trial, seed in enumerate(trial_seeds(config.seed, config.trials)):
            curves = run_trial(config, config.d_star, trial, seed)
            wins += curves["linucb_oracle"][-1] < curves["linucb"][-1]
        assert wins >= 16
