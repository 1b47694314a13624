import math

import numpy as np
import pytest

from pareto_bandits.core import ActionSet, RewardModel, expressive_closure
from pareto_bandits.environment import Environment
from pareto_bandits.experiment import make_sparse_model, sample_sphere_arms
from pareto_bandits.linucbpp import (
    LinUCBPlusPlus, build_schedule, extend_action_set, finalize_mixture_arm, flatten_mixture, mixture_mean,
    resolve_virtual_arm, run_linucb_plus_plus
)
from pareto_bandits.policies import LinUCB, confidence_width
from pareto_bandits.util import NumericalError


class TestSchedule:
    def test_reference_horizon(self):
        schedule = build_schedule(2500, 0.5, 500)
        assert schedule.p == 6
        assert schedule.dims == (128, 64, 32, 16, 8, 4)
        assert schedule.lengths == (128, 256, 512, 1024, 2048, 2500)
        assert schedule.active == 5
        assert schedule.executed_lengths == (128, 256, 512, 1024, 580)

    def test_dims_capped_by_ambient_dimension(self):
        assert build_schedule(2500, 0.5, 10).dims == (10, 10, 10, 10, 8, 4)

    def test_iterations(self):
        iterations = list(build_schedule(2500, 0.5, 500).iterations())
        assert iterations[0] == (1, 128, 128)
        assert iterations[-1] == (5, 8, 580)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            build_schedule(1, 0.5, 10)
        with pytest.raises(ValueError):
            build_schedule(100, 1.0, 10)
        with pytest.raises(ValueError):
            build_schedule(100, 0.4, 10)

    def test_properties(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            T = int(rng.integers(2, 10 ** 6))
            beta = float(rng.choice([0.5, 0.6, 0.75, 0.9]))
            schedule = build_schedule(T, beta, int(rng.integers(1, 5000)))
            p = schedule.p

            assert p == max(math.ceil(beta * math.log2(T) - 1e-12), 1)
            assert sum(schedule.lengths) >= T
            assert sum(schedule.executed_lengths) == T
            assert all(a >= b for a, b in zip(schedule.dims, schedule.dims[1:]))
            assert all(a <= b for a, b in zip(schedule.lengths, schedule.lengths[1:]))
            for i, (dim, length) in enumerate(zip(schedule.dims, schedule.lengths), start=1):
                if dim == 2 ** (p + 2 - i) and length == 2 ** (p + i):
                    assert dim * length <= 2 ** (2 * p + 2)


class TestExtendedActionSet:
    def test_first_iteration(self):
        actions = ActionSet(np.eye(4) * 0.5)
        extended = extend_action_set(actions, 2, [])
        assert extended.matrix.shape == (4, 2)
        assert extended.n_virtual == 0

    def test_one_virtual_arm(self):
        actions = ActionSet([[0.6, 0.8], [0.8, -0.6]])
        virtual = finalize_mixture_arm([3, 1], 4, 1)
        extended = extend_action_set(actions, 2, [virtual])

        np.testing.assert_array_equal(extended.matrix, [[0.6, 0.8, 0.0], [0.8, -0.6, 0.0], [0.0, 0.0, 1.0]])
        assert extended.provenance == (("arm", 0), ("arm", 1), ("virtual", 1))
        assert extended.virtual_iteration(2) == 1
        assert extended.virtual_iteration(0) == 0

    def test_block_structure(self):
        rng = np.random.default_rng(1)
        actions = sample_sphere_arms(6, 5, rng)
        virtual = [finalize_mixture_arm(np.eye(5 + j, dtype=int)[0] * 4, 4, j + 1) for j in range(3)]
        extended = extend_action_set(actions, 3, virtual)

        np.testing.assert_array_equal(extended.matrix[:5, :3], actions.truncated(3))
        np.testing.assert_array_equal(extended.matrix[:5, 3:], 0)
        np.testing.assert_array_equal(extended.matrix[5:, :3], 0)
        np.testing.assert_array_equal(extended.matrix[5:, 3:], np.eye(3))

    def test_rejects_gaps(self):
        actions = ActionSet(np.eye(2))
        with pytest.raises(ValueError):
            extend_action_set(actions, 2, [finalize_mixture_arm([1, 1, 0], 2, 2)])


class TestMixtureArms:
    def test_point_mass(self):
        arm = finalize_mixture_arm([128, 0, 0], 128, 1)
        np.testing.assert_array_equal(arm.frequencies, [1, 0, 0])

    def test_frequencies(self):
        np.testing.assert_array_equal(finalize_mixture_arm([64, 64], 128, 1).frequencies, [0.5, 0.5])

    def test_rejects_lost_pulls(self):
        with pytest.raises(ValueError):
            finalize_mixture_arm([64, 63], 128, 1)

    def test_resolve_point_mass(self):
        arm = finalize_mixture_arm(np.eye(8, dtype=int)[5] * 10, 10, 1)
        rng = np.random.default_rng(0)
        assert {resolve_virtual_arm(arm, [arm], rng) for _ in range(100)} == {5}

    def test_resolve_two_levels(self):
        first = finalize_mixture_arm([0, 0, 0, 7], 7, 1)
        second = finalize_mixture_arm([0, 0, 0, 0, 9], 9, 2)
        rng = np.random.default_rng(1)
        assert {resolve_virtual_arm(second, [first, second], rng) for _ in range(100)} == {3}

    def test_resolve_matches_flattened_mixture(self):
        first = finalize_mixture_arm([0, 10], 10, 1)
        second = finalize_mixture_arm([5, 0, 5], 10, 2)
        registry = [first, second]

        np.testing.assert_allclose(flatten_mixture(second, registry), [0.5, 0.5])
        rng = np.random.default_rng(2)
        draws = np.array([resolve_virtual_arm(second, registry, rng) for _ in range(10 ** 5)])
        assert abs(np.mean(draws == 0) - 0.5) < 0.01
        assert mixture_mean(second, registry, [1.0, 0.0]) == pytest.approx(0.5)

    def test_corrupted_registry(self):
        second = finalize_mixture_arm([0, 0, 4], 4, 2)
        with pytest.raises(NumericalError):
            resolve_virtual_arm(second, [], np.random.default_rng(3))


@pytest.fixture(scope="module")
def played():
    rng = np.random.default_rng(11)
    actions = sample_sphere_arms(24, 60, rng)
    env = Environment(actions, make_sparse_model(24, 3, 0.1), noise_seed=5)
    algorithm = LinUCBPlusPlus(env, 900, 0.5, seed=2)
    trace = algorithm.run()
    return env, algorithm, trace


class TestLinUCBPlusPlus:
    def test_trace(self, played):
        env, algorithm, trace = played
        assert len(trace) == 900
        assert np.all(np.diff(trace.cumulative) >= 0)
        assert trace.rows is not None and trace.iterations is not None
        assert trace.iterations[0] == 1 and trace.iterations[-1] == algorithm.schedule.active

    def test_iteration_summaries(self, played):
        env, algorithm, trace = played
        schedule = algorithm.schedule
        assert [s.length for s in algorithm.summaries] == list(schedule.executed_lengths)
        assert [s.dim for s in algorithm.summaries] == list(schedule.dims[:schedule.active])
        assert sum(s.pseudo_regret for s in algorithm.summaries) == pytest.approx(trace.total_regret)

    def test_virtual_rows_resolve_to_real_arms(self, played):
        env, algorithm, trace = played
        real = trace.rows < env.K
        np.testing.assert_array_equal(trace.arms[real], trace.rows[real])
        assert np.all(trace.arms < env.K)

    def test_mixture_mean_identity(self, played):
        env, algorithm, trace = played
        rng = np.random.default_rng(7)
        for arm, summary in zip(algorithm.virtual_arms[:3], algorithm.summaries):
            target = mixture_mean(arm, algorithm.virtual_arms, env.means)
            if arm.iteration == 1:
                assert target == pytest.approx(summary.mean_pseudo_reward, rel=1e-9, abs=1e-12)

            draws = np.array([resolve_virtual_arm(arm, algorithm.virtual_arms, rng) for _ in range(10 ** 5)])
            means = env.means[draws]
            standard_error = means.std(ddof=1) / math.sqrt(draws.size)
            assert abs(means.mean() - target) <= 4 * standard_error + 1e-12

    def test_mixture_reward_noise(self, played):
        env, algorithm, trace = played
        rng = np.random.default_rng(8)
        arm = algorithm.virtual_arms[1]
        target = mixture_mean(arm, algorithm.virtual_arms, env.means)
        rewards = np.array([
            env.pull(step, resolve_virtual_arm(arm, algorithm.virtual_arms, rng)) for step in range(20000)
        ])
        assert np.mean((rewards - target) ** 2) <= 2.0

    def test_deterministic(self, played):
        env, _, trace = played
        again = LinUCBPlusPlus(env, 900, 0.5, seed=2).run()
        np.testing.assert_array_equal(trace.arms, again.arms)
        np.testing.assert_array_equal(trace.rows, again.rows)

    def test_expressive_flag(self):
        rng = np.random.default_rng(5)
        actions = sample_sphere_arms(64, 20, rng)
        model = make_sparse_model(64, 4)
        with pytest.raises(ValueError):
            run_linucb_plus_plus(actions, model, 300, 0.5, expressive=True)

        schedule = build_schedule(300, 0.5, 64)
        closed = expressive_closure(actions, schedule.dims[:schedule.active])
        assert len(run_linucb_plus_plus(closed, model, 300, 0.5, expressive=True)) == 300

    def test_rejects_beta(self):
        actions = ActionSet(np.eye(2))
        with pytest.raises(ValueError):
            run_linucb_plus_plus(actions, RewardModel.from_theta([1.0, 0.0]), 100, beta=1.0)


class TestWidth:
    def test_norm_bonus_defaults_to_two_log_t(self, played):
        env, algorithm, _ = played
        assert algorithm.norm_bonus == pytest.approx(2 * math.log(900))
        assert LinUCBPlusPlus(env, 900, norm_bonus=0.0).norm_bonus == 0.0

    def test_width_scale_reaches_the_learner(self, monkeypatch):
        env = Environment(sample_sphere_arms(8, 20, np.random.default_rng(4)), make_sparse_model(8, 2), noise_seed=1)
        widths = []
        original = LinUCB.__init__

        def record(self, candidates, width, **kwargs):
            widths.append((width, kwargs["norm_bonus"]))
            original(self, candidates, width, **kwargs)

        monkeypatch.setattr(LinUCB, "__init__", record)
        LinUCBPlusPlus(env, 300, seed=1, norm_bonus=0.5, width_scale=0.25).run()
        assert len(widths) == build_schedule(300, 0.5, env.d).active
        for i, (width, norm_bonus) in enumerate(widths, start=1):
            assert width == pytest.approx(0.25 * confidence_width(300, env.K + i - 1))
            assert norm_bonus == 0.5


class TestNoiselessRegret:
    def test_average_regret_falls_with_the_horizon(self):
        """Intrinsic dimension inside every window and exact rewards: regret grows sublinearly in T."""
        horizons = (1000, 4000, 16000)
        totals = np.zeros(len(horizons))
        for seed in range(3):
            actions = sample_sphere_arms(8, 100, np.random.default_rng([seed, 8]))
            model = make_sparse_model(8, 3, noise_std=0.0)
            for k, T in enumerate(horizons):
                trace = run_linucb_plus_plus(actions, model, T, 0.5, seed, norm_bonus=0.0, width_scale=0.1)
                totals[k] += trace.total_regret

        average = totals / np.array(horizons)
        assert average[1] < average[0]
        assert average[2] < average[1]
        assert totals[2] < 8 * totals[0]
