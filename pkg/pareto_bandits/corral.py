"""Smooth Corral: a log-barrier master spreading pulls over smoothed base learners.

The master keeps a distribution over M bases, samples one per round, feeds it the round and updates the distribution
by online mirror descent with the log-barrier regularizer on the importance-weighted loss (1 - reward) / 2. The
sampling distribution is mixed with a floor so no base dies, and a base whose probability drops below 1/threshold
has its step size multiplied by e^{1/ln T} and its threshold reset to 2/p.

Bases are smoothed: a deterministic base (LinUCB, UCB) plays, instead of its current choice, a uniformly random entry
of the history of its choices. Each master round costs one environment pull, fed to the chosen base, and one replayed
update of a base that was not chosen.
"""
import math
import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .core import ActionSet, RewardModel, RegretTrace
from .environment import Environment
from .linucbpp import (
    IterationSummary, VirtualMixtureArm, build_schedule, finalize_mixture_arm, resolve_virtual_arm,
    summarize_iteration
)
from .policies import DEFAULT_LAMBDA, DEFAULT_UCB_SCALE, LinUCB, UCB, confidence_width
from .util import NumericalError

logger = logging.getLogger(__name__)

SIMPLEX_TOLERANCE = 1e-9


@dataclass
class CorralState:
    """Master state.

    base_probabilities is the floored distribution bases are sampled from; omd_probabilities is the mirror-descent
    iterate before flooring.
    """
    base_probabilities: np.ndarray
    omd_probabilities: np.ndarray
    learning_rate: float
    step_sizes: np.ndarray
    thresholds: np.ndarray
    loss_totals: np.ndarray
    floor: float
    growth: float
    t: int = 0

    @classmethod
    def fresh(cls, M: int, learning_rate: float, T: int, floor: float = None):
        """Uniform start, per-base step size M * learning_rate, threshold 2M, floor 1/(2MT)."""
        if M < 1:
            raise ValueError("the master needs at least one base")
        if learning_rate <= 0:
            raise ValueError(f"learning rate {learning_rate} must be positive")
        if T < 2:
            raise ValueError("horizon T must be at least 2")

        floor = 1.0 / (2 * M * T) if floor is None else floor
        if not 0 <= floor <= 1.0 / M:
            raise ValueError(f"probability floor {floor} outside [0, 1/M]")

        uniform = np.full(M, 1.0 / M)
        return cls(
            base_probabilities=uniform.copy(),
            omd_probabilities=uniform.copy(),
            learning_rate=learning_rate,
            step_sizes=np.full(M, M * learning_rate),
            thresholds=np.full(M, 2.0 * M),
            loss_totals=np.zeros(M),
            floor=floor,
            growth=math.exp(1.0 / math.log(T)),
        )

    @property
    def M(self) -> int:
        return self.base_probabilities.size


class SmoothedBase:
    """Wraps a deterministic learner with select()/update() so that it replays its own past choices.

    `observations` logs the (slot, reward) pairs the base really received. A round in which the base is not chosen
    may hand it one of them again through replay().
    """

    def __init__(self, learner, smoothing: bool = True):
        self.learner = learner
        self.smoothing = smoothing
        self.history: List[int] = []
        self.observations: List[Tuple[int, float]] = []
        self.replays = 0

    @property
    def can_replay(self) -> bool:
        return self.smoothing and len(self.observations) > 0

    def propose(self, rng: np.random.Generator) -> int:
        choice = self.learner.select()
        if not self.smoothing:
            return choice

        self.history.append(choice)
        return self.history[int(rng.integers(len(self.history)))]

    def observe(self, slot: int, reward: float):
        self.observations.append((slot, reward))
        self.learner.update(slot, reward)

    def replay(self, rng: np.random.Generator):
        """Update the learner once more on a uniformly random logged observation."""
        if not self.can_replay:
            return
        slot, reward = self.observations[int(rng.integers(len(self.observations)))]
        self.learner.update(slot, reward)
        self.replays += 1


def corral_loss(reward: float) -> float:
    return min(max((1.0 - reward) / 2.0, 0.0), 1.0)


def _log_barrier_step(probabilities, step_sizes, losses):
    """Mirror-descent step 1/p_new = 1/p + eta_i (loss_i - lam), with lam chosen so that p_new sums to 1."""
    inverse = 1.0 / probabilities

    def excess(lam):
        return np.sum(1.0 / (inverse + step_sizes * (losses - lam))) - 1.0

    low = losses.min()
    if excess(low) >= 0:
        lam = low
    else:
        high = np.min(inverse / step_sizes + losses)
        high -= 1e-12 * max(1.0, abs(high))
        lam = brentq(excess, low, high, xtol=1e-15, rtol=1e-15, maxiter=500)

    updated = 1.0 / (inverse + step_sizes * (losses - lam))
    if np.any(updated < 0) or abs(updated.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise NumericalError(f"log-barrier step left the simplex (sum {updated.sum():.12g})")
    return updated / updated.sum()


def corral_step(state: CorralState, bases: Sequence[SmoothedBase], env_step: Callable[[int, int], float], rng):
    """One master round.

    env_step(base index, slot) pulls the environment for the slot chosen by that base and returns the reward. One
    non-chosen base drawn uniformly among those able to replay gets a replayed update.
    Returns (state, chosen base index, reward).
    """
    if len(bases) != state.M:
        raise ValueError(f"{len(bases)} bases for a master over {state.M}")

    if state.M == 1:
        chosen = 0
    else:
        cdf = np.cumsum(state.base_probabilities)
        chosen = min(int(np.searchsorted(cdf / cdf[-1], rng.random(), side="right")), state.M - 1)

    base = bases[chosen]
    slot = base.propose(rng)
    reward = env_step(chosen, slot)
    base.observe(slot, reward)

    state.t += 1
    if state.M == 1:
        return state, chosen, reward

    idle = [i for i, other in enumerate(bases) if i != chosen and other.can_replay]
    if idle:
        bases[idle[int(rng.integers(len(idle)))]].replay(rng)

    losses = np.zeros(state.M)
    losses[chosen] = corral_loss(reward) / state.base_probabilities[chosen]
    state.loss_totals += losses

    state.omd_probabilities = _log_barrier_step(state.omd_probabilities, state.step_sizes, losses)
    mixed = (1.0 - state.M * state.floor) * state.omd_probabilities + state.floor
    if np.any(mixed < state.floor - SIMPLEX_TOLERANCE) or abs(mixed.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise NumericalError("base probabilities left the floored simplex")
    state.base_probabilities = mixed

    for i in np.flatnonzero(1.0 / mixed > state.thresholds):
        state.thresholds[i] = 2.0 / mixed[i]
        state.step_sizes[i] *= state.growth
        logger.debug(
            "round %d: base %d probability %.3g, step size raised to %.4g", state.t, i, mixed[i], state.step_sizes[i]
        )

    return state, chosen, reward


# Smooth Corral over truncated LinUCB bases ============================================================================
def corral_dims(d: int) -> List[int]:
    """Base dimensions 2^0, 2^1, ..., 2^ceil(log2 d), capped at d."""
    top = math.ceil(math.log2(d)) if d > 1 else 0
    return sorted({min(2 ** k, d) for k in range(top + 1)})


def default_learning_rate(d: int, T: int) -> float:
    """1 / sqrt(M T) with M = ceil(log2 d)."""
    return 1.0 / math.sqrt(max(math.ceil(math.log2(d)), 1) * T)


class SmoothCorral:
    """Smooth Corral with one LinUCB base per truncation dimension."""

    def __init__(
        self, env: Environment, T: int, eta: float, base_dims: Sequence[int], seed: int = 0, *,
        lam: float = DEFAULT_LAMBDA, delta: float = None, width_scale: float = 1.0, floor: float = None,
        smoothing: bool = True
    ):
        if len(base_dims) == 0:
            raise ValueError("Smooth Corral needs at least one base dimension")
        for dim in base_dims:
            if not 1 <= dim <= env.d:
                raise ValueError(f"base dimension {dim} outside [1, {env.d}]")

        self.env = env
        self.T = T
        self.rng = np.random.default_rng(seed)

        width = width_scale * confidence_width(T, env.K, delta)
        smoothing = smoothing and len(base_dims) > 1
        self.bases = [
            SmoothedBase(LinUCB(env.actions.truncated(dim), width, lam=lam), smoothing) for dim in base_dims
        ]
        self.state = CorralState.fresh(len(self.bases), eta, max(T, 2), floor)
        self.choices: List[int] = []

    def run(self) -> RegretTrace:
        recorder = self.env.recorder(self.T)

        def env_step(base, slot):
            return recorder.pull(slot)

        while not recorder.done:
            _, chosen, _ = corral_step(self.state, self.bases, env_step, self.rng)
            self.choices.append(chosen)

        return recorder.trace()


def run_smooth_corral(
    actions: ActionSet, model: RewardModel, T: int, eta: float, base_dims: Sequence[int], seed: int = 0, *,
    env: Environment = None, **kwargs
) -> RegretTrace:
    env = env or Environment(actions, model, seed)
    return SmoothCorral(env, T, eta, base_dims, seed, **kwargs).run()


# Smooth Corral inside the LinUCB++ schedule ===========================================================================
class CorralSchedule:
    """LinUCB++ schedule where each iteration runs Smooth Corral over a truncated LinUCB and a UCB on virtual arms.

    The learning rate of iteration i is 1/sqrt(d_i * DeltaT_i). No expressiveness is required of the action set.
    """

    def __init__(
        self, env: Environment, T: int, beta: float = 0.5, seed: int = 0, *, lam: float = DEFAULT_LAMBDA,
        delta: float = None, width_scale: float = 1.0, ucb_scale: float = DEFAULT_UCB_SCALE,
        smoothing: bool = True
    ):
        self.env = env
        self.T = T
        self.schedule = build_schedule(T, beta, env.d)
        self.rng = np.random.default_rng(seed)
        self.lam = lam
        self.width = width_scale * confidence_width(T, env.K, delta)
        self.ucb_scale = ucb_scale
        self.smoothing = smoothing

        self.virtual_arms: List[VirtualMixtureArm] = []
        self.summaries: List[IterationSummary] = []
        self.learning_rates: List[float] = []

    def run(self) -> RegretTrace:
        recorder = self.env.recorder(self.T)
        K = self.env.K

        for i, dim, length in self.schedule.iterations():
            full_length = self.schedule.lengths[i - 1]
            eta = 1.0 / math.sqrt(dim * full_length)
            self.learning_rates.append(eta)

            learners = [LinUCB(self.env.actions.truncated(dim), self.width, lam=self.lam)]
            if self.virtual_arms:
                learners.append(UCB(len(self.virtual_arms), self.ucb_scale))
            smoothing = self.smoothing and len(learners) > 1
            bases = [SmoothedBase(learner, smoothing) for learner in learners]
            state = CorralState.fresh(len(bases), eta, full_length)

            counts = np.zeros(K + i - 1, dtype=np.int64)

            def env_step(base, slot):
                if base == 0:
                    row, arm = slot, slot
                else:
                    row = K + slot
                    arm = resolve_virtual_arm(self.virtual_arms[slot], self.virtual_arms, self.rng)
                counts[row] += 1
                return recorder.pull(arm, row=row, iteration=i)

            start = recorder.step
            for _ in range(length):
                corral_step(state, bases, env_step, self.rng)

            self.virtual_arms.append(finalize_mixture_arm(counts, length, i))
            self.summaries.append(summarize_iteration(self.env, i, dim, recorder.arms[start:]))

        return recorder.trace()


def run_corral_within_schedule(
    actions: ActionSet, model: RewardModel, T: int, beta: float = 0.5, seed: int = 0, *, env: Environment = None,
    **kwargs
) -> RegretTrace:
    if not 0.5 <= beta < 1:
        raise ValueError(f"beta = {beta} outside [1/2, 1)")
    env = env or Environment(actions, model, seed)
    return CorralSchedule(env, T, beta, seed, **kwargs).run()
