"""Adversarial instance family behind the cost-of-adaptivity lower bound.

Instance theta_0 hides a single small coordinate among the first T^alpha' coordinates; instances theta_1..theta_K each
add a gap Delta on a coordinate rho(i) beyond T^alpha / 2. Under theta_0 the arms e_rho(i) are all worth zero, so an
algorithm that keeps its regret on theta_0 below B cannot afford to explore them, and pays on average over the
theta_i instead.
"""
import math
import logging
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from .core import ActionSet, RewardModel, RegretTrace
from .environment import Environment
from .policies import run_linucb

logger = logging.getLogger(__name__)

LOWER_BOUND_NOISE_STD = 0.5
"""Gaussian noise N(0, 1/4) of every lower-bound instance."""

POWER_TOLERANCE = 1e-9


def _power(T, alpha):
    return T ** alpha


def _floor(value):
    return math.floor(value + POWER_TOLERANCE)


def _check_preconditions(T, alpha_prime, alpha, B, d=None):
    if T < 2:
        raise ValueError(f"T = {T} < 2")
    if not 0 <= alpha_prime < alpha <= 1:
        raise ValueError(f"0 <= alpha' < alpha <= 1 violated by alpha' = {alpha_prime}, alpha = {alpha}")

    scale = _power(T, alpha)
    if scale > B * (1 + POWER_TOLERANCE):
        raise ValueError(f"T^alpha <= B violated: T^alpha = {scale:.6g} > B = {B}")

    K = _floor(scale / 2)
    bound = max(scale / 4, _power(T, alpha_prime), 2)
    if K < bound - POWER_TOLERANCE:
        raise ValueError(
            f"floor(T^alpha / 2) >= max(T^alpha / 4, T^alpha', 2) violated: {K} < {bound:.6g}"
        )
    if d is not None and d < scale - POWER_TOLERANCE:
        raise ValueError(f"d >= T^alpha violated: d = {d} < {scale:.6g}")
    return K


@dataclass(frozen=True, eq=False)
class AdversarialFamily:
    """Reward vectors theta_0..theta_K over one shared action set.

    Action index 0 is a_0 = e_support, index i in 1..K is a_i = e_rho(i), and with expressive=True index K + 1 is the
    all-zero arm. Coordinates are 1-based in rho and support, like the construction they implement.
    """
    thetas: np.ndarray
    action_set: ActionSet
    delta: float
    K: int
    rho_offset: int
    alphas: Tuple[float, float]
    budget: float
    T: int
    d: int
    support: int
    expressive: bool
    floor: float

    def rho(self, i: int) -> int:
        if not 1 <= i <= self.K:
            raise ValueError(f"instance index {i} outside [1, {self.K}]")
        return self.rho_offset + i

    def model(self, i: int) -> RewardModel:
        if not 0 <= i <= self.K:
            raise ValueError(f"instance index {i} outside [0, {self.K}]")
        return RewardModel.from_theta(self.thetas[i], LOWER_BOUND_NOISE_STD)

    @property
    def instances(self) -> List[Tuple[ActionSet, RewardModel]]:
        return [(self.action_set, self.model(i)) for i in range(self.K + 1)]


def build_adversarial_family(
    T: int, alpha_prime: float, alpha: float, B: float, expressive: bool = False, d: int = None, support: int = 1
) -> AdversarialFamily:
    """Build theta_i = theta_0 + Delta e_rho(i), rho(i) = floor(T^alpha / 2) + i, Delta = 2^-5 K / B."""
    d = math.ceil(_power(T, alpha) - POWER_TOLERANCE) if d is None else d
    K = _check_preconditions(T, alpha_prime, alpha, B, d)
    support_range = _floor(_power(T, alpha_prime))
    if not 1 <= support <= support_range:
        raise ValueError(f"1 <= support <= floor(T^alpha') violated: support = {support}, bound {support_range}")

    rho_offset = K
    delta = 2 ** -5 * K / B

    theta_0 = np.zeros(d)
    theta_0[support - 1] = delta / 2
    thetas = np.tile(theta_0, (K + 1, 1))
    for i in range(1, K + 1):
        thetas[i, rho_offset + i - 1] += delta
    thetas.setflags(write=False)

    arms = np.zeros((K + 2 if expressive else K + 1, d))
    arms[0, support - 1] = 1.0
    for i in range(1, K + 1):
        arms[i, rho_offset + i - 1] = 1.0

    family = AdversarialFamily(
        thetas=thetas,
        action_set=ActionSet(arms),
        delta=delta,
        K=K,
        rho_offset=rho_offset,
        alphas=(alpha_prime, alpha),
        budget=B,
        T=T,
        d=d,
        support=support,
        expressive=expressive,
        floor=regret_floor(T, alpha, B),
    )
    _check_family(family)
    return family


def _check_family(family: AdversarialFamily):
    if family.delta > 2 ** -5 + POWER_TOLERANCE:
        raise ValueError(f"Delta = {family.delta:.6g} > 2^-5")

    norms = np.linalg.norm(family.thetas, axis=1)
    if np.any(norms > 1 + POWER_TOLERANCE):
        raise ValueError(f"instance norm {norms.max():.6g} > 1")
    if not math.isclose(norms[0], family.delta / 2):
        raise ValueError("||theta_0|| != Delta / 2")
    if family.support > family.rho_offset:
        raise ValueError("theta_0 support overlaps the rho(i) coordinates")


def gaussian_kl(mu1: float, mu2: float) -> float:
    """KL divergence between N(mu1, 1/4) and N(mu2, 1/4)."""
    return 2.0 * (mu1 - mu2) ** 2


def kl_decomposition_audit(trace: RegretTrace, family: AdversarialFamily, i: int) -> Tuple[float, float]:
    """Both sides of KL(P_0, P_i) = 2 E_0[N_i(T)] Delta^2 evaluated on one trace generated under theta_0.

    The left side sums the per-pull divergences of the arms actually played; the right side counts pulls of a_i.
    """
    if trace.action_digest is not None and trace.action_digest != family.action_set.digest:
        raise ValueError("trace was not generated on the family's action set")
    if len(trace) and trace.arms.max() >= family.action_set.K:
        raise ValueError("trace plays arms outside the family's action set")
    family.rho(i)

    played = family.action_set.arms[trace.arms]
    means_0 = played @ family.thetas[0]
    means_i = played @ family.thetas[i]
    lhs = float(np.sum([gaussian_kl(m0, mi) for m0, mi in zip(means_0, means_i)]))

    pulls = int(np.count_nonzero(trace.arms == i))
    rhs = 2.0 * pulls * family.delta ** 2
    return lhs, rhs


def regret_floor(T: int, alpha: float, B: float) -> float:
    """Worst-case regret 2^-10 T^{1+alpha} / B forced on hardness alpha by a regret budget B on easier problems."""
    if T < 2:
        raise ValueError(f"T = {T} < 2")
    if not 0 < alpha <= 1:
        raise ValueError(f"0 < alpha <= 1 violated by alpha = {alpha}")
    if B <= 0:
        raise ValueError(f"B = {B} must be positive")
    if _power(T, alpha) > B * (1 + POWER_TOLERANCE):
        raise ValueError(f"T^alpha <= B violated: T^alpha = {_power(T, alpha):.6g} > B = {B}")
    return 2 ** -10 * T ** (1 + alpha) / B


@dataclass
class AverageRegret:
    regret_null: float
    average_regret: float
    floor: float
    budget: float
    regrets: np.ndarray


def average_regret_demo(
    family: AdversarialFamily, runner: Callable[..., RegretTrace] = run_linucb, seed: int = 0, T: int = None,
    progress: Callable[[int], None] = None
) -> AverageRegret:
    """Run one algorithm on theta_0 and every theta_i; report regret on theta_0 and the average over theta_1..theta_K.

    All instances share the noise stream `seed`.
    """
    T = family.T if T is None else T
    regrets = np.zeros(family.K + 1)
    for i, (actions, model) in enumerate(family.instances):
        env = Environment(actions, model, seed)
        regrets[i] = runner(actions, model, T, seed, env=env).total_regret
        if progress is not None:
            progress(i + 1)

    result = AverageRegret(
        regret_null=float(regrets[0]),
        average_regret=float(regrets[1:].mean()),
        floor=family.floor,
        budget=family.budget,
        regrets=regrets,
    )
    logger.info(
        "regret on theta_0: %.2f (budget %.2f); average over %d alternatives: %.2f (floor %.2f)",
        result.regret_null, result.budget, family.K, result.average_regret, result.floor
    )
    return result
