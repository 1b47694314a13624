"""Foundational bandit types and the hardness-level / rate-function calculus."""
import math
import hashlib
import logging
from enum import Enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .util import TIE_TOLERANCE, argmax_first

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-9


def _frozen(array, dtype=float):
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


# Domain types =========================================================================================================
@dataclass(frozen=True, eq=False)
class ActionSet:
    """A fixed, finite set of K arms in ambient dimension d, stored as a K x d matrix."""
    arms: np.ndarray

    def __post_init__(self):
        arms = _frozen(self.arms)
        if arms.ndim != 2:
            raise ValueError(f"arms must be a K x d matrix, got shape {arms.shape}")
        if arms.shape[0] < 1 or arms.shape[1] < 1:
            raise ValueError("an action set needs at least one arm of dimension at least 1")

        norms = np.linalg.norm(arms, axis=1)
        if np.any(norms > 1 + NORM_TOLERANCE):
            worst = int(np.argmax(norms))
            raise ValueError(f"arm {worst} has norm {norms[worst]:.6g} > 1")

        object.__setattr__(self, "arms", arms)

    @property
    def K(self) -> int:
        return self.arms.shape[0]

    @property
    def d(self) -> int:
        return self.arms.shape[1]

    def __len__(self):
        return self.K

    def truncated(self, dim: int) -> np.ndarray:
        """First dim coordinates of every arm, as a K x dim matrix."""
        if not 1 <= dim <= self.d:
            raise ValueError(f"truncation dimension {dim} outside [1, {self.d}]")
        return self.arms[:, :dim]

    @cached_property
    def digest(self) -> str:
        """Hash identifying this exact action set."""
        return hashlib.sha256(self.arms.tobytes() + str(self.arms.shape).encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class RewardModel:
    """Hidden reward parameter theta_star with intrinsic dimension d_star and Gaussian noise scale."""
    theta_star: np.ndarray
    intrinsic_dim: int
    noise_std: float = 0.1

    def __post_init__(self):
        theta = _frozen(self.theta_star)
        if theta.ndim != 1:
            raise ValueError("theta_star must be a vector")
        if np.linalg.norm(theta) > 1 + NORM_TOLERANCE:
            raise ValueError(f"||theta_star|| = {np.linalg.norm(theta):.6g} > 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if not 0 <= self.intrinsic_dim <= theta.size:
            raise ValueError(f"intrinsic_dim {self.intrinsic_dim} outside [0, {theta.size}]")
        if self.intrinsic_dim != support_size(theta):
            raise ValueError(
                f"intrinsic_dim {self.intrinsic_dim} does not match the last nonzero coordinate {support_size(theta)}"
            )

        object.__setattr__(self, "theta_star", theta)

    @classmethod
    def from_theta(cls, theta_star, noise_std=0.1):
        """Build a model whose intrinsic dimension is the index of the last nonzero coordinate."""
        return cls(np.asarray(theta_star, dtype=float), support_size(theta_star), noise_std)

    @property
    def d(self) -> int:
        return self.theta_star.size

    def mean_rewards(self, actions: ActionSet) -> np.ndarray:
        """Expected reward <theta_star, a> of every arm."""
        if actions.d != self.d:
            raise ValueError(f"action set dimension {actions.d} does not match model dimension {self.d}")
        return actions.arms @ self.theta_star


def support_size(theta) -> int:
    """1-based index of the last nonzero coordinate (0 for the zero vector)."""
    nonzero = np.flatnonzero(np.asarray(theta))
    return int(nonzero[-1]) + 1 if nonzero.size else 0


@dataclass(frozen=True, eq=False)
class RegretTrace:
    """Per-step record of a run: played real arm, realized reward and instantaneous pseudo-regret.

    rows and iterations are only filled by schedule-based algorithms: the row of the extended action set
    that was chosen and the iteration it was chosen in.
    """
    arms: np.ndarray
    rewards: np.ndarray
    regrets: np.ndarray
    rows: Optional[np.ndarray] = None
    iterations: Optional[np.ndarray] = None
    action_digest: Optional[str] = None
    cumulative: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "arms", _frozen(self.arms, dtype=np.int64))
        object.__setattr__(self, "rewards", _frozen(self.rewards))
        object.__setattr__(self, "regrets", _frozen(self.regrets))
        for name in ("rows", "iterations"):
            if getattr(self, name) is not None:
                object.__setattr__(self, name, _frozen(getattr(self, name), dtype=np.int64))

        if not self.arms.size == self.rewards.size == self.regrets.size:
            raise ValueError("arms, rewards and regrets must have the same length")
        if np.any(self.regrets < -TIE_TOLERANCE):
            raise ValueError("instantaneous pseudo-regret must be nonnegative")

        object.__setattr__(self, "cumulative", _frozen(np.cumsum(np.maximum(self.regrets, 0.0))))

    def __len__(self):
        return self.arms.size

    @property
    def total_regret(self) -> float:
        return float(self.cumulative[-1]) if len(self) else 0.0


@dataclass(frozen=True)
class RateFunction:
    """A regret-exponent profile alpha -> theta(alpha) on [0, 1], with a label for exported tables."""
    evaluator: Callable[[float], float]
    label: str

    def __call__(self, alpha: float) -> float:
        return self.evaluator(alpha)

    def on_grid(self, grid: Iterable[float]) -> np.ndarray:
        return np.array([self(alpha) for alpha in grid], dtype=float)

    @classmethod
    def pareto(cls, beta: float):
        """The frontier rate theta_beta(alpha) = min(max(beta, 1 + alpha - beta), 1)."""
        _check_beta(beta)
        return cls(lambda alpha: pareto_rate(beta, alpha), f"pareto(beta={beta:g})")

    @classmethod
    def lower_bound(cls, theta0: float):
        """Pointwise lower bound that any rate function with theta(0) = theta0 must dominate."""
        return cls(lambda alpha: rate_lower_bound(theta0, alpha), f"lower_bound(theta0={theta0:g})")

    @classmethod
    def constant(cls, value: float):
        if not 0 <= value <= 1:
            raise ValueError("a constant rate must lie in [0, 1]")
        return cls(lambda alpha: value, f"constant({value:g})")


class RateOrder(Enum):
    A_STRICTLY_SMALLER = "a_strictly_smaller"
    B_STRICTLY_SMALLER = "b_strictly_smaller"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


# Hardness and rate calculus ===========================================================================================
def _check_unit(name, value):
    if not 0 <= value <= 1:
        raise ValueError(f"{name} = {value} outside [0, 1]")


def _check_beta(beta):
    if not 0.5 <= beta < 1:
        raise ValueError(f"beta = {beta} outside [1/2, 1)")


def hardness_level(T: int, d_star: int) -> float:
    """Hardness level alpha = log_T(d_star) of a problem with horizon T and intrinsic dimension d_star."""
    if T < 2:
        raise ValueError(f"T = {T} < 2 makes log base T degenerate")
    if not 1 <= d_star <= T:
        raise ValueError(f"d_star = {d_star} outside [1, T = {T}]")

    if d_star == 1:
        return 0.0
    return math.log(d_star) / math.log(T)


def pareto_rate(beta: float, alpha: float) -> float:
    """Rate achieved at hardness alpha by a Pareto optimal algorithm tuned with beta."""
    _check_beta(beta)
    _check_unit("alpha", alpha)
    return min(max(beta, 1 + (alpha - beta)), 1.0)


def rate_lower_bound(theta0: float, alpha: float) -> float:
    """Smallest rate at hardness alpha compatible with achieving theta0 at alpha = 0."""
    if not 0.5 <= theta0 <= 1:
        raise ValueError(f"theta(0) = {theta0} outside [1/2, 1]")
    _check_unit("alpha", alpha)
    return min(max(theta0, 1 + (alpha - theta0)), 1.0)


def compare_rates(a: RateFunction, b: RateFunction, grid: Sequence[float]) -> RateOrder:
    """Pointwise order of two rate functions restricted to a grid of hardness levels."""
    if len(grid) == 0:
        raise ValueError("comparison grid is empty")
    for alpha in grid:
        _check_unit("grid value", alpha)

    diff = a.on_grid(grid) - b.on_grid(grid)
    a_wins = bool(np.any(diff < -TIE_TOLERANCE))
    b_wins = bool(np.any(diff > TIE_TOLERANCE))

    if a_wins and b_wins:
        return RateOrder.INCOMPARABLE
    if a_wins:
        return RateOrder.A_STRICTLY_SMALLER
    if b_wins:
        return RateOrder.B_STRICTLY_SMALLER
    return RateOrder.EQUAL


# Action set operations ================================================================================================
def expressive_closure(actions: ActionSet, dims: Iterable[int]) -> ActionSet:
    """Augment the action set with every truncate-and-pad [a^(dim); 0] of its arms.

    Original arms keep their positions; new vectors are appended in arm-major order and bit-exact duplicates are
    dropped.
    """
    if actions is None or actions.K == 0:
        raise ValueError("cannot close an empty action set")

    dims = sorted(set(int(dim) for dim in dims))
    for dim in dims:
        if not 1 <= dim <= actions.d:
            raise ValueError(f"truncation dimension {dim} outside [1, {actions.d}]")

    seen = {arm.tobytes() for arm in actions.arms}
    extra = []
    for arm in actions.arms:
        for dim in dims:
            truncated = np.zeros(actions.d)
            truncated[:dim] = arm[:dim]
            key = truncated.tobytes()
            if key not in seen:
                seen.add(key)
                extra.append(truncated)

    if not extra:
        return actions

    logger.debug("expressive closure added %d arms to %d", len(extra), actions.K)
    return ActionSet(np.vstack([actions.arms, np.array(extra)]))


def best_arm_and_gap(actions: ActionSet, model: RewardModel):
    """Index of the best arm (lowest index on ties) and the per-arm gaps <theta_star, a_star - a>."""
    means = model.mean_rewards(actions)
    best = argmax_first(means)
    gaps = means[best] - means
    gaps[gaps <= TIE_TOLERANCE] = 0.0
    return best, gaps
