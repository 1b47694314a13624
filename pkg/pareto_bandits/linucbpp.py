"""LinUCB++: LinUCB run over geometrically growing iterations on an extended linear bandit problem.

Iteration i truncates the arms to their first d_i coordinates and lifts them into R^{d_i + i - 1}, where every
virtual mixture-arm built by an earlier iteration gets its own unit coordinate. A virtual mixture-arm replays the
empirical arm frequencies of its iteration, so later (lower dimensional) iterations can fall back on what earlier
iterations learned without exploring that space again.
"""
import math
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np

from .core import ActionSet, RewardModel, RegretTrace, expressive_closure
from .environment import Environment
from .policies import DEFAULT_LAMBDA, LinUCB, confidence_width
from .util import NumericalError

logger = logging.getLogger(__name__)


# Schedule =============================================================================================================
@dataclass(frozen=True)
class Schedule:
    """Iteration plan: p iterations with working dims d_i = min(2^{p+2-i}, d) and lengths min(2^{p+i}, T).

    dims, lengths and boundaries hold all p entries of the formulas. Only the first `active` iterations execute:
    the last of them is cut so that play stops exactly at T.
    """
    T: int
    beta: float
    p: int
    dims: Tuple[int, ...]
    lengths: Tuple[int, ...]
    boundaries: Tuple[int, ...]
    active: int

    @property
    def executed_lengths(self) -> Tuple[int, ...]:
        """Number of steps each executed iteration actually plays."""
        starts = (0,) + self.boundaries[:self.active - 1]
        return tuple(min(length, self.T - start) for start, length in zip(starts, self.lengths[:self.active]))

    def iterations(self):
        """Yield (i, d_i, executed length) for every iteration that executes, i starting at 1."""
        for i, (dim, length) in enumerate(zip(self.dims, self.executed_lengths), start=1):
            yield i, dim, length


def build_schedule(T: int, beta: float, d: int) -> Schedule:
    if T < 2:
        raise ValueError(f"T = {T} < 2 leaves no iterations")
    if not 0.5 <= beta < 1:
        raise ValueError(f"beta = {beta} outside [1/2, 1)")
    if d < 1:
        raise ValueError("ambient dimension d must be at least 1")

    p = max(math.ceil(beta * math.log2(T) - 1e-12), 1)
    dims = tuple(min(2 ** (p + 2 - i), d) for i in range(1, p + 1))
    lengths = tuple(min(2 ** (p + i), T) for i in range(1, p + 1))
    boundaries = tuple(int(b) for b in np.cumsum(lengths))
    active = next(i for i, boundary in enumerate(boundaries, start=1) if boundary >= T)

    return Schedule(T, beta, p, dims, lengths, boundaries, active)


# Virtual mixture-arms =================================================================================================
@dataclass(frozen=True, eq=False)
class VirtualMixtureArm:
    """Empirical play frequencies of iteration `iteration` over its slots.

    Slots are the real arms followed by the virtual arms of iterations 1 .. iteration - 1.
    """
    iteration: int
    frequencies: np.ndarray
    counts: np.ndarray

    @property
    def n_real(self) -> int:
        return self.frequencies.size - (self.iteration - 1)

    @cached_property
    def _cdf(self):
        cdf = np.cumsum(self.frequencies)
        return cdf / cdf[-1]

    def sample_slot(self, rng: np.random.Generator) -> int:
        return int(np.searchsorted(self._cdf, rng.random(), side="right"))


def finalize_mixture_arm(counts, delta_T: int, j: int) -> VirtualMixtureArm:
    """Turn the slot pull counts of iteration j into its virtual mixture-arm."""
    counts = np.asarray(counts, dtype=np.int64)
    if j < 1:
        raise ValueError("iterations are numbered from 1")
    if np.any(counts < 0):
        raise ValueError("pull counts must be nonnegative")
    if counts.sum() != delta_T:
        raise ValueError(f"pull counts sum to {counts.sum()}, expected the iteration length {delta_T}")

    frequencies = counts / delta_T
    frequencies.setflags(write=False)
    counts.setflags(write=False)
    return VirtualMixtureArm(j, frequencies, counts)


def _registry_entry(registry: Sequence[VirtualMixtureArm], j: int) -> VirtualMixtureArm:
    if j > len(registry) or registry[j - 1].iteration != j:
        raise NumericalError(f"mixture registry has no entry for iteration {j}")
    return registry[j - 1]


def resolve_virtual_arm(arm: VirtualMixtureArm, registry: Sequence[VirtualMixtureArm], rng: np.random.Generator) -> int:
    """Draw a real arm index from a virtual mixture-arm, chasing sampled virtual slots into earlier iterations.

    registry[j - 1] is the mixture-arm of iteration j. Each chase strictly decreases the iteration, so at most
    `arm.iteration` draws are made.
    """
    current = arm
    for _ in range(arm.iteration):
        slot = current.sample_slot(rng)
        if slot < current.n_real:
            return slot

        j = slot - current.n_real + 1
        if j >= current.iteration:
            raise NumericalError(f"iteration {current.iteration} sampled virtual arm {j} of a later iteration")
        current = _registry_entry(registry, j)

    raise NumericalError(f"virtual arm {arm.iteration} did not resolve within {arm.iteration} draws")


def flatten_mixture(arm: VirtualMixtureArm, registry: Sequence[VirtualMixtureArm]) -> np.ndarray:
    """Exact distribution over real arms induced by resolving `arm`."""
    flat = {}

    def expand(mixture):
        if mixture.iteration not in flat:
            dist = np.array(mixture.frequencies[:mixture.n_real], dtype=float)
            for j in range(1, mixture.iteration):
                weight = mixture.frequencies[mixture.n_real + j - 1]
                if weight > 0:
                    dist += weight * expand(_registry_entry(registry, j))
            flat[mixture.iteration] = dist
        return flat[mixture.iteration]

    return expand(arm)


def mixture_mean(arm: VirtualMixtureArm, registry: Sequence[VirtualMixtureArm], means) -> float:
    """Conditional expected reward of a virtual mixture-arm given the real arms' expected rewards."""
    return float(flatten_mixture(arm, registry) @ np.asarray(means))


# Extended action set ==================================================================================================
@dataclass(frozen=True, eq=False)
class ExtendedActionSet:
    """Matrix of the extended problem: truncated real arms padded with zeros over unit rows for virtual arms.

    provenance[r] is ("arm", k) for real arm k or ("virtual", j) for the virtual arm of iteration j.
    """
    matrix: np.ndarray
    provenance: Tuple[Tuple[str, int], ...]
    n_real: int

    @property
    def n_virtual(self) -> int:
        return len(self.provenance) - self.n_real

    def virtual_iteration(self, row: int) -> int:
        """Iteration of the virtual arm behind `row`, 0 for real arms."""
        kind, index = self.provenance[row]
        return index if kind == "virtual" else 0


def extend_action_set(actions: ActionSet, d_i: int, virtual_arms: Sequence[VirtualMixtureArm]) -> ExtendedActionSet:
    if not 1 <= d_i <= actions.d:
        raise ValueError(f"working dimension {d_i} outside [1, {actions.d}]")

    iterations = sorted(arm.iteration for arm in virtual_arms)
    if iterations != list(range(1, len(iterations) + 1)):
        raise ValueError(f"virtual arms must cover iterations 1..{len(iterations)} exactly, got {iterations}")

    n_virtual = len(iterations)
    matrix = np.zeros((actions.K + n_virtual, d_i + n_virtual))
    matrix[:actions.K, :d_i] = actions.truncated(d_i)
    matrix[actions.K:, d_i:] = np.eye(n_virtual)
    matrix.setflags(write=False)

    provenance = tuple(("arm", k) for k in range(actions.K)) + tuple(("virtual", j) for j in iterations)
    return ExtendedActionSet(matrix, provenance, actions.K)


# Run loop =============================================================================================================
@dataclass
class IterationSummary:
    index: int
    dim: int
    length: int
    mean_pseudo_reward: float
    pseudo_regret: float


class LinUCBPlusPlus:
    """One LinUCB++ run on an environment.

    With expressive=True the action set must already be closed under truncation at the schedule dims. Otherwise the
    run is misspecified: arms are truncated anyway and regret is still measured against the ambient best arm.

    The extended problem is played with width `width_scale * confidence_width` plus `norm_bonus`, which defaults to
    2 ln T, the bonus covering ||theta|| <= 2 ln T on the extended coordinates.
    """

    def __init__(
        self, env: Environment, T: int, beta: float = 0.5, seed: int = 0, *, lam: float = DEFAULT_LAMBDA,
        delta: float = None, norm_bonus: float = None, width_scale: float = 1.0, expressive: bool = False
    ):
        self.env = env
        self.T = T
        self.schedule = build_schedule(T, beta, env.d)
        self.rng = np.random.default_rng(seed)
        self.lam = lam
        self.delta = delta
        self.norm_bonus = 2.0 * math.log(T) if norm_bonus is None else norm_bonus
        self.width_scale = width_scale

        if expressive:
            closed = expressive_closure(env.actions, self.schedule.dims[:self.schedule.active])
            if closed.K != env.K:
                raise ValueError(
                    f"action set is not expressive: closure adds {closed.K - env.K} arms at dims {self.schedule.dims}"
                )

        self.virtual_arms: List[VirtualMixtureArm] = []
        self.summaries: List[IterationSummary] = []

    def resolve(self, extended: ExtendedActionSet, row: int) -> int:
        """Real arm played when `row` of the extended set is chosen."""
        j = extended.virtual_iteration(row)
        if j == 0:
            return row
        return resolve_virtual_arm(self.virtual_arms[j - 1], self.virtual_arms, self.rng)

    def run(self) -> RegretTrace:
        recorder = self.env.recorder(self.T)

        for i, dim, length in self.schedule.iterations():
            extended = extend_action_set(self.env.actions, dim, self.virtual_arms)
            learner = LinUCB(
                extended.matrix, self.width_scale * confidence_width(self.T, len(extended.provenance), self.delta),
                norm_bonus=self.norm_bonus, lam=self.lam
            )

            counts = np.zeros(len(extended.provenance), dtype=np.int64)
            start = recorder.step
            for _ in range(length):
                row = learner.select()
                arm = self.resolve(extended, row)
                learner.update(row, recorder.pull(arm, row=row, iteration=i))
                counts[row] += 1

            self.virtual_arms.append(finalize_mixture_arm(counts, length, i))
            self.summaries.append(summarize_iteration(self.env, i, dim, recorder.arms[start:]))

        return recorder.trace()


def summarize_iteration(env: Environment, i: int, dim: int, played) -> IterationSummary:
    """Audit record of one iteration from the real arms it played."""
    played = np.asarray(played, dtype=np.int64)
    summary = IterationSummary(
        index=i,
        dim=dim,
        length=played.size,
        mean_pseudo_reward=float(env.means[played].mean()),
        pseudo_regret=float(env.gaps[played].sum()),
    )
    logger.debug(
        "iteration %d: d_i=%d, %d steps, mean pseudo-reward %.4f, pseudo-regret %.2f",
        i, dim, summary.length, summary.mean_pseudo_reward, summary.pseudo_regret
    )
    return summary


def run_linucb_plus_plus(
    actions: ActionSet, model: RewardModel, T: int, beta: float = 0.5, seed: int = 0, *, env: Environment = None,
    **kwargs
) -> RegretTrace:
    if not 0.5 <= beta < 1:
        raise ValueError(f"beta = {beta} outside [1/2, 1)")
    env = env or Environment(actions, model, seed)
    return LinUCBPlusPlus(env, T, beta, seed, **kwargs).run()
