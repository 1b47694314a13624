"""Fast property checks of the schedule, ridge, mixture, KL, lower-bound and rate-ordering machinery."""
import math
import time
import logging
from dataclasses import dataclass
from typing import Callable, List

import numpy as np
from scipy import integrate, stats

from .core import RateFunction, RateOrder, compare_rates, pareto_rate
from .environment import Environment
from .experiment import make_sparse_model, sample_sphere_arms
from .linucbpp import LinUCBPlusPlus, build_schedule, mixture_mean, resolve_virtual_arm
from .lowerbound import build_adversarial_family, gaussian_kl, kl_decomposition_audit, regret_floor
from .policies import RidgeState, ridge_solve, ridge_update, run_linucb

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def check_schedule(rng) -> str:
    for _ in range(1000):
        T = int(rng.integers(2, 10 ** 6 + 1))
        beta = float(rng.uniform(0.5, 0.99))
        d = int(rng.integers(1, 2000))
        schedule = build_schedule(T, beta, d)
        p = schedule.p
        assert sum(schedule.lengths) >= T, f"lengths of (T={T}, beta={beta}) sum below T"
        assert schedule.dims == tuple(min(2 ** (p + 2 - i), d) for i in range(1, p + 1))
        assert schedule.lengths == tuple(min(2 ** (p + i), T) for i in range(1, p + 1))
        assert sum(schedule.executed_lengths) == T

    schedule = build_schedule(2500, 0.5, 500)
    assert schedule.p == 6
    assert schedule.dims == (128, 64, 32, 16, 8, 4)
    assert schedule.lengths == (128, 256, 512, 1024, 2048, 2500)
    return "1000 sampled schedules cover T; T=2500 case exact"


def check_ridge(rng) -> str:
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(1, 21))
        n = int(rng.integers(1, 201))
        lam = float(rng.uniform(0.05, 2.0))
        features = rng.standard_normal((n, m))
        features /= np.maximum(np.linalg.norm(features, axis=1, keepdims=True), 1.0)
        rewards = rng.standard_normal(n)

        state = RidgeState(m, lam)
        for x, r in zip(features, rewards):
            ridge_update(state, x, r)
        oracle = ridge_solve(features, rewards, lam)
        error = np.linalg.norm(state.theta_hat - oracle) / max(np.linalg.norm(oracle), 1e-300)
        worst = max(worst, error)
        assert error < 1e-8, f"relative error {error:.3g} (m={m}, n={n})"
    return f"100 update sequences, worst relative error {worst:.2g}"


def check_mixture_mean(rng) -> str:
    actions = sample_sphere_arms(20, 50, rng)
    env = Environment(actions, make_sparse_model(20, 4, 0.1), noise_seed=7)
    algorithm = LinUCBPlusPlus(env, 600, 0.5, seed=3)
    algorithm.run()

    details = []
    for arm, summary in zip(algorithm.virtual_arms[:2], algorithm.summaries):
        draws = np.array([resolve_virtual_arm(arm, algorithm.virtual_arms, rng) for _ in range(10 ** 5)])
        rewards = env.means[draws]
        standard_error = rewards.std(ddof=1) / math.sqrt(draws.size)
        target = mixture_mean(arm, algorithm.virtual_arms, env.means)
        if arm.iteration == 1:
            assert math.isclose(target, summary.mean_pseudo_reward, rel_tol=1e-9, abs_tol=1e-12)
        assert abs(rewards.mean() - target) <= 4 * standard_error + 1e-12, (
            f"iteration {arm.iteration}: Monte Carlo mean {rewards.mean():.5f} vs {target:.5f}"
        )
        deviation = abs(rewards.mean() - target) / max(standard_error, 1e-300)
        details.append(f"iteration {arm.iteration} within {deviation:.2f} SE")
    return "; ".join(details)


def _quadrature_kl(mu1, mu2, std=0.5):
    p, q = stats.norm(mu1, std), stats.norm(mu2, std)
    value, _ = integrate.quad(lambda x: p.pdf(x) * (p.logpdf(x) - q.logpdf(x)), mu1 - 12 * std, mu1 + 12 * std)
    return value


def check_kl(rng) -> str:
    grid = np.linspace(-1, 1, 20)
    worst = max(abs(gaussian_kl(a, b) - _quadrature_kl(a, b)) for a in grid for b in grid)
    assert worst < 1e-6, f"quadrature mismatch {worst:.3g}"

    family = build_adversarial_family(256, 0.0, 0.5, 16)
    actions, model = family.instances[0]
    for seed in range(50):
        trace = run_linucb(actions, model, 256, seed, env=Environment(actions, model, seed))
        for i in range(1, family.K + 1):
            lhs, rhs = kl_decomposition_audit(trace, family, i)
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, rhs), f"audit (seed {seed}, i={i}): {lhs} != {rhs}"
    return f"quadrature within {worst:.2g}; 50 traces audited"


def check_family(rng) -> str:
    built = 0
    while built < 50:
        T = int(rng.integers(64, 2001))
        alpha = float(rng.uniform(0.3, 1.0))
        alpha_prime = float(rng.uniform(0.0, alpha))
        B = float(T ** alpha * rng.uniform(1.0, 4.0))
        try:
            family = build_adversarial_family(T, alpha_prime, alpha, B)
        except ValueError:
            continue
        built += 1

        assert math.isclose(family.delta, 2 ** -5 * family.K / B) and family.delta <= 2 ** -5
        assert np.all(np.linalg.norm(family.thetas, axis=1) <= 1 + 1e-12)
        assert np.all(np.linalg.norm(family.action_set.arms, axis=1) <= 1 + 1e-12)
        assert math.isclose(np.linalg.norm(family.thetas[0]), family.delta / 2)
        assert np.flatnonzero(family.thetas[0]).tolist() == [family.support - 1]
        means_0 = family.action_set.arms @ family.thetas[0]
        assert np.all(means_0[1:] == 0)
        for i in (1, family.K):
            means = family.action_set.arms @ family.thetas[i]
            assert int(np.argmax(means)) == i and math.isclose(means[i], family.delta)
            assert math.isclose(means[i] - means[0], family.delta / 2)

    floor = regret_floor(2500, 0.5, 50)
    assert math.isclose(floor, 2 ** -10 * 2500 ** 1.5 / 50, rel_tol=1e-9)
    return f"50 families valid; floor(2500, 0.5, 50) = {floor:.1f}"


def check_rate_ordering(rng) -> str:
    a, b = RateFunction.pareto(0.5), RateFunction.pareto(0.7)
    assert pareto_rate(0.5, 0.0) == 0.5 and pareto_rate(0.5, 0.4) == 0.9
    order = compare_rates(a, b, [0.0, 0.4])
    assert order is RateOrder.INCOMPARABLE, order
    return "pareto(0.5) and pareto(0.7) incomparable on {0, 0.4}"


CHECKS: List[Callable] = [
    check_schedule, check_ridge, check_mixture_mean, check_kl, check_family, check_rate_ordering
]


def run_checks(seed: int = 0) -> List[CheckResult]:
    results = []
    for check in CHECKS:
        name = check.__name__[len("check_"):]
        start = time.perf_counter()
        try:
            detail = check(np.random.default_rng([seed, len(results)]))
            passed = True
        except AssertionError as e:
            detail, passed = f"failed: {e}", False

        result = CheckResult(name, passed, detail, time.perf_counter() - start)
        log = logger.info if passed else logger.error
        log("%s %s (%.2f s): %s", "PASS" if passed else "FAIL", name, result.seconds, detail)
        results.append(result)
    return results


def verify(seed: int = 0) -> int:
    """Run every check; exit status 0 when all pass, 1 otherwise."""
    results = run_checks(seed)
    failed = [result.name for result in results if not result.passed]
    if failed:
        logger.error("%d of %d checks failed: %s", len(failed), len(results), ", ".join(failed))
        return 1
    logger.info("all %d checks passed", len(results))
    return 0
