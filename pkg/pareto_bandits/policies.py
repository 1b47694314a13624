"""Base learners: ridge-regression state, the LinUCB and UCB selection rules, and the baselines built on them."""
import math
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ActionSet, RewardModel, RegretTrace
from .environment import Environment
from .util import NumericalError, argmax_first

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.1
DEFAULT_UCB_SCALE = 2.0
MIN_DENOMINATOR = 1e-12


# Ridge regression =====================================================================================================
@dataclass
class RidgeState:
    """Regularized least squares in dimension `dim`, tracking V^-1 with V = lam*I + sum A A^T."""
    dim: int
    lam: float = DEFAULT_LAMBDA
    gram_inverse: Optional[np.ndarray] = None
    moment: Optional[np.ndarray] = None
    theta_hat: Optional[np.ndarray] = None
    t: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("ridge dimension must be at least 1")
        if self.lam <= 0:
            raise ValueError("ridge regularizer lambda must be positive")

        if self.gram_inverse is None:
            self.gram_inverse = np.eye(self.dim) / self.lam
        if self.moment is None:
            self.moment = np.zeros(self.dim)
        if self.theta_hat is None:
            self.theta_hat = self.gram_inverse @ self.moment


def ridge_update(state: RidgeState, arm, reward: float) -> RidgeState:
    """Fold one observation into the state with a rank-one update of V^-1."""
    arm = np.asarray(arm, dtype=float)
    if arm.shape != (state.dim,):
        raise ValueError(f"arm of shape {arm.shape} does not match ridge dimension {state.dim}")
    if np.linalg.norm(arm) > 1 + 1e-9:
        raise ValueError(f"arm norm {np.linalg.norm(arm):.6g} > 1")

    u = state.gram_inverse @ arm
    denominator = 1.0 + arm @ u
    if denominator < MIN_DENOMINATOR:
        raise NumericalError(f"rank-one denominator {denominator:.3g} below {MIN_DENOMINATOR}: corrupted Gram inverse")

    gram_inverse = state.gram_inverse - np.outer(u, u) / denominator
    state.gram_inverse = 0.5 * (gram_inverse + gram_inverse.T)
    state.moment = state.moment + reward * arm
    state.theta_hat = state.gram_inverse @ state.moment
    state.t += 1
    return state


def ridge_solve(features, rewards, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """Dense solve of (lam*I + X^T X) theta = X^T y."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    rewards = np.asarray(rewards, dtype=float)
    gram = lam * np.eye(features.shape[1]) + features.T @ features
    return np.linalg.solve(gram, features.T @ rewards)


# Selection rules ======================================================================================================
def confidence_width(T: int, K: int, delta: Optional[float] = None) -> float:
    """LinUCB width 2*sqrt(ln(2TK/delta)); delta defaults to T^-1/2, the expected-regret tuning."""
    if T < 1 or K < 1:
        raise ValueError("T and K must be at least 1")
    if delta is None:
        delta = T ** -0.5 if T > 1 else 0.5
    if not 0 < delta < 1:
        raise ValueError(f"delta = {delta} outside (0, 1)")
    return 2.0 * math.sqrt(math.log(2.0 * T * K / delta))


def linucb_select(
    state: RidgeState, candidate_arms, width: float, norm_bonus: float = 0.0, quadratic: Optional[np.ndarray] = None
) -> int:
    """Optimistic choice argmax <theta_hat, a> + (width + norm_bonus) * ||a||_{V^-1}, ties to the lowest index.

    `quadratic` holds precomputed a^T V^-1 a of the candidates and is computed from the state when omitted.
    """
    candidates = np.atleast_2d(np.asarray(candidate_arms, dtype=float))
    if candidates.size == 0:
        raise ValueError("no candidate arms")
    if candidates.shape[1] != state.dim:
        raise ValueError(f"candidates of dimension {candidates.shape[1]} do not match ridge dimension {state.dim}")
    if width < 0 or norm_bonus < 0:
        raise ValueError("width and norm_bonus must be nonnegative")

    if quadratic is None:
        quadratic = np.einsum("ij,jk,ik->i", candidates, state.gram_inverse, candidates)
    elif quadratic.shape != (candidates.shape[0],):
        raise ValueError(f"{quadratic.size} quadratic forms for {candidates.shape[0]} candidates")
    scores = candidates @ state.theta_hat + (width + norm_bonus) * np.sqrt(np.maximum(quadratic, 0.0))
    return argmax_first(scores)


@dataclass
class UcbState:
    """Pull counts and empirical means of a finite set of arms."""
    counts: np.ndarray
    means: np.ndarray
    scale: float = DEFAULT_UCB_SCALE

    @classmethod
    def fresh(cls, n_arms: int, scale: float = DEFAULT_UCB_SCALE):
        return cls(np.zeros(n_arms, dtype=np.int64), np.zeros(n_arms), scale)

    @property
    def rounds(self) -> int:
        return int(self.counts.sum())


def ucb_select(state: UcbState, t: int) -> int:
    """Unpulled arms first (lowest index), then argmax mean + scale * sqrt(2 ln t / count)."""
    if state.counts.size == 0:
        raise ValueError("no arms to select from")
    if t < 1:
        raise ValueError("round index t must be at least 1")

    unpulled = np.flatnonzero(state.counts == 0)
    if unpulled.size:
        return int(unpulled[0])

    bonus = state.scale * np.sqrt(2.0 * math.log(t) / state.counts)
    return argmax_first(state.means + bonus)


def ucb_update(state: UcbState, arm: int, reward: float) -> UcbState:
    state.counts[arm] += 1
    state.means[arm] += (reward - state.means[arm]) / state.counts[arm]
    return state


# Learners =============================================================================================================
class LinUCB:
    """LinUCB over a fixed candidate matrix.

    The quadratic forms a^T V^-1 a of all candidates are cached and downdated with every rank-one update, so a
    round costs O(n*m + m^2) instead of O(n*m^2).
    """

    def __init__(self, candidates, width: float, norm_bonus: float = 0.0, lam: float = DEFAULT_LAMBDA):
        self.candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
        if self.candidates.size == 0:
            raise ValueError("no candidate arms")
        if width < 0 or norm_bonus < 0:
            raise ValueError("width and norm_bonus must be nonnegative")

        self.width = width
        self.norm_bonus = norm_bonus
        self.state = RidgeState(self.candidates.shape[1], lam)
        self._quadratic = np.einsum("ij,ij->i", self.candidates, self.candidates) / lam

    @property
    def n_arms(self):
        return self.candidates.shape[0]

    def select(self) -> int:
        return linucb_select(self.state, self.candidates, self.width, self.norm_bonus, self._quadratic)

    def update(self, arm: int, reward: float):
        x = self.candidates[arm]
        u = self.state.gram_inverse @ x
        denominator = 1.0 + x @ u

        ridge_update(self.state, x, reward)
        self._quadratic -= (self.candidates @ u) ** 2 / denominator


class UCB:
    """UCB over a finite set of arms."""

    def __init__(self, n_arms: int, scale: float = DEFAULT_UCB_SCALE):
        if n_arms < 1:
            raise ValueError("no arms to select from")
        self.state = UcbState.fresh(n_arms, scale)

    @property
    def n_arms(self):
        return self.state.counts.size

    def select(self) -> int:
        return ucb_select(self.state, self.state.rounds + 1)

    def update(self, arm: int, reward: float):
        ucb_update(self.state, arm, reward)


# Baselines ============================================================================================================
def run_linucb(
    actions: ActionSet, model: RewardModel, T: int, seed: int = 0, *, env: Environment = None, dim: int = None,
    lam: float = DEFAULT_LAMBDA, delta: float = None, width_scale: float = 1.0
) -> RegretTrace:
    """Plain LinUCB on the first `dim` coordinates of every arm (ambient dimension when dim is None)."""
    env = env or Environment(actions, model, seed)
    dim = env.d if dim is None else dim

    learner = LinUCB(env.actions.truncated(dim), width_scale * confidence_width(T, env.K, delta), lam=lam)
    recorder = env.recorder(T)
    while not recorder.done:
        arm = learner.select()
        learner.update(arm, recorder.pull(arm))

    return recorder.trace()


def run_linucb_oracle(actions: ActionSet, model: RewardModel, T: int, seed: int = 0, **kwargs) -> RegretTrace:
    """LinUCB told the intrinsic dimension d_star."""
    return run_linucb(actions, model, T, seed, dim=max(model.intrinsic_dim, 1), **kwargs)


def run_ucb(
    actions: ActionSet, model: RewardModel, T: int, seed: int = 0, *, env: Environment = None,
    scale: float = DEFAULT_UCB_SCALE
) -> RegretTrace:
    """UCB treating every arm as independent."""
    env = env or Environment(actions, model, seed)

    learner = UCB(env.K, scale)
    recorder = env.recorder(T)
    while not recorder.done:
        arm = learner.select()
        learner.update(arm, recorder.pull(arm))

    return recorder.trace()
