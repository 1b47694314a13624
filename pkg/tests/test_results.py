import json

import numpy as np
import pandas as pd
import pytest

from pareto_bandits.core import RateFunction, RegretTrace
from pareto_bandits.experiment import SWEEP_COLUMNS, AggregateResult, aggregate_trials
from pareto_bandits.lowerbound import build_adversarial_family
from pareto_bandits.results import (
    export_instance, export_results, family_record, instance_record, load_instance, load_results, load_table,
    ordering_table, output_paths, rate_table
)

METADATA = {"config_hash": "0123456789ab", "seed": 0, "trial_seeds": [11, 12, 13]}


def _trace(regrets):
    return RegretTrace(arms=np.zeros(len(regrets), dtype=int), rewards=np.zeros(len(regrets)), regrets=regrets)


@pytest.fixture
def curves_result():
    rng = np.random.default_rng(0)
    tables = [
        aggregate_trials([_trace(rng.random(40)) for _ in range(3)], name).curves for name in ("linucb++", "linucb")
    ]
    return AggregateResult(curves=pd.concat(tables, ignore_index=True), metadata=dict(METADATA))


@pytest.fixture
def sweep_result():
    sweep = pd.DataFrame([
        {"algorithm": name, "d_star": d_star, "alpha": np.log(d_star) / np.log(2500),
         "mean_terminal_regret": 10.0 * d_star + offset, "band_halfwidth": 1.5}
        for name, offset in (("linucb++", 0.0), ("linucb", 20.0), ("smooth_corral", 40.0)) for d_star in (5, 15, 25)
    ], columns=SWEEP_COLUMNS)
    return AggregateResult(sweep=sweep, metadata=dict(METADATA))


class TestTables:
    def test_round_trip(self, tmp_path, curves_result):
        paths = export_results(curves_result, tmp_path)
        assert [path.name for path in paths] == ["curves.csv", "sweep.csv"]

        loaded = load_results(tmp_path)
        pd.testing.assert_frame_equal(loaded.curves, curves_result.curves)
        assert loaded.metadata == METADATA
        assert list(loaded.sweep.columns) == SWEEP_COLUMNS
        assert len(loaded.sweep) == 0

    def test_metadata_line(self, tmp_path, curves_result):
        export_results(curves_result, tmp_path)
        lines = (tmp_path / "curves.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("# ")
        assert json.loads(lines[0][2:])["config_hash"] == "0123456789ab"
        assert lines[1] == "algorithm,step,mean_regret,band_halfwidth"
        assert lines[2].startswith("linucb++,1,")

    def test_sweep_table(self, tmp_path, sweep_result):
        export_results(sweep_result, tmp_path)
        table, metadata = load_table(tmp_path / "sweep.csv")
        assert metadata == METADATA
        pd.testing.assert_frame_equal(table, sweep_result.sweep)

    def test_refuses_overwrite(self, tmp_path, curves_result):
        export_results(curves_result, tmp_path)
        with pytest.raises(FileExistsError):
            export_results(curves_result, tmp_path)
        export_results(curves_result, tmp_path, force=True)

    def test_unknown_format(self, tmp_path, curves_result):
        with pytest.raises(ValueError):
            export_results(curves_result, tmp_path, "xlsx")


class TestOutputPaths:
    def test_tables(self, tmp_path):
        assert output_paths(tmp_path, "table") == [tmp_path / "curves.csv", tmp_path / "sweep.csv"]
        assert output_paths(tmp_path, "table", sweep=True) == output_paths(tmp_path, "table")

    def test_plots(self, tmp_path):
        assert output_paths(tmp_path, "plot") == [tmp_path / "curves.svg"]
        assert output_paths(tmp_path, "plot", sweep=True) == [tmp_path / "sweep.svg"]

    def test_match_exported_files(self, tmp_path, curves_result, sweep_result):
        assert export_results(curves_result, tmp_path / "a", "plot") == output_paths(tmp_path / "a", "plot")
        assert export_results(sweep_result, tmp_path / "b", "plot") == output_paths(tmp_path / "b", "plot", True)
        assert export_results(curves_result, tmp_path / "c") == output_paths(tmp_path / "c", "table")

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            output_paths(tmp_path, "xlsx")


class TestPlots:
    def test_one_curve_per_algorithm(self, tmp_path, curves_result):
        paths = export_results(curves_result, tmp_path, "plot")
        assert [path.name for path in paths] == ["curves.svg"]

        svg = paths[0].read_text(encoding="utf-8")
        assert svg.count('id="curve-') == 2
        assert svg.count('id="band-') == 2
        assert 'id="curve-linucb++"' in svg
        assert "config_hash=0123456789ab" in svg

    def test_sweep_plot(self, tmp_path, sweep_result):
        paths = export_results(sweep_result, tmp_path, "plot")
        assert [path.name for path in paths] == ["sweep.svg"]
        assert paths[0].read_text(encoding="utf-8").count('id="curve-') == 3

    def test_deterministic_bytes(self, tmp_path, curves_result):
        first = export_results(curves_result, tmp_path / "a", "plot")[0]
        second = export_results(curves_result, tmp_path / "b", "plot")[0]
        assert first.read_bytes() == second.read_bytes()

    def test_refuses_overwrite(self, tmp_path, sweep_result):
        export_results(sweep_result, tmp_path, "plot")
        with pytest.raises(FileExistsError):
            export_results(sweep_result, tmp_path, "plot")


class TestInstances:
    def test_instance_record(self):
        family = build_adversarial_family(256, 0.0, 0.5, 16)
        actions, model = family.instances[3]
        restored_actions, restored_model = load_instance(json.loads(json.dumps(instance_record(actions, model))))

        np.testing.assert_array_equal(restored_actions.arms, actions.arms)
        np.testing.assert_array_equal(restored_model.theta_star, model.theta_star)
        assert restored_model.noise_std == 0.5

    def test_family_record(self, tmp_path):
        family = build_adversarial_family(2500, 0.0, 0.5, 50, expressive=True)
        path = export_instance(family_record(family), tmp_path / "lb" / "family.json")

        record = json.loads(path.read_text(encoding="utf-8"))
        assert (record["K"], record["d"], record["rho_offset"]) == (25, 50, 25)
        assert record["delta"] == pytest.approx(0.015625)
        assert record["floor"] == pytest.approx(2.44140625)
        assert record["expressive"] is True
        assert len(record["instances"]) == 26
        assert len(record["instances"][0]["arms"]) == 27

        with pytest.raises(FileExistsError):
            export_instance(record, path)
        export_instance(record, path, force=True)


class TestRateTables:
    def test_rate_table(self):
        table = rate_table([RateFunction.pareto(0.5), RateFunction.lower_bound(0.6)], [0.0, 0.5, 1.0])
        assert list(table.columns) == ["alpha", "pareto(beta=0.5)", "lower_bound(theta0=0.6)"]
        np.testing.assert_allclose(table["pareto(beta=0.5)"], [0.5, 1.0, 1.0])
        np.testing.assert_allclose(table["lower_bound(theta0=0.6)"], [0.6, 0.9, 1.0])

    def test_ordering_table(self):
        rates = [RateFunction.pareto(0.5), RateFunction.pareto(0.7), RateFunction.constant(1.0)]
        table = ordering_table(rates, [0.0, 0.4])
        assert len(table) == 3
        assert table["order"].tolist() == ["incomparable", "a_strictly_smaller", "a_strictly_smaller"]
