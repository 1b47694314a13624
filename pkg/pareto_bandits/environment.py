import numpy as np

from .core import ActionSet, RewardModel, RegretTrace, best_arm_and_gap


class Environment:
    """Linear bandit over a fixed action set.

    The Gaussian noise of a pull is a function of (noise_seed, step, arm) only, so algorithms run on the same
    environment that pull the same real arm at the same step observe the same reward.
    """

    def __init__(self, actions: ActionSet, model: RewardModel, noise_seed: int = 0):
        if actions.d != model.d:
            raise ValueError(f"action set dimension {actions.d} does not match model dimension {model.d}")
        if noise_seed < 0:
            raise ValueError("noise_seed must be nonnegative")

        self.actions = actions
        self.model = model
        self.noise_seed = int(noise_seed)

        self.means = model.mean_rewards(actions)
        self.best_arm, self.gaps = best_arm_and_gap(actions, model)

    @property
    def K(self):
        return self.actions.K

    @property
    def d(self):
        return self.actions.d

    def noise(self, step: int, arm: int) -> float:
        if self.model.noise_std == 0:
            return 0.0
        rng = np.random.default_rng([self.noise_seed, int(step), int(arm)])
        return self.model.noise_std * rng.standard_normal()

    def pull(self, step: int, arm: int) -> float:
        """Realized reward of real arm `arm` at time `step` (0-based)."""
        return float(self.means[arm] + self.noise(step, arm))

    def recorder(self, T: int):
        return TraceRecorder(self, T)


class TraceRecorder:
    """Pulls arms from an environment in step order and accumulates the regret trace."""

    def __init__(self, env: Environment, T: int):
        if T < 1:
            raise ValueError("horizon T must be at least 1")
        self.env = env
        self.T = T

        self.arms = []
        self.rewards = []
        self.regrets = []
        self.rows = []
        self.iterations = []

    @property
    def step(self) -> int:
        """Number of pulls made so far, i.e. the 0-based index of the next step."""
        return len(self.arms)

    @property
    def done(self) -> bool:
        return self.step >= self.T

    def pull(self, arm: int, row: int = None, iteration: int = None) -> float:
        if self.done:
            raise RuntimeError(f"horizon T = {self.T} already reached")

        reward = self.env.pull(self.step, arm)
        self.arms.append(int(arm))
        self.rewards.append(reward)
        self.regrets.append(float(self.env.gaps[arm]))
        if row is not None:
            self.rows.append(int(row))
            self.iterations.append(int(iteration))
        return reward

    def trace(self) -> RegretTrace:
        extended = len(self.rows) == len(self.arms) and len(self.rows) > 0
        return RegretTrace(
            arms=np.array(self.arms, dtype=np.int64),
            rewards=np.array(self.rewards),
            regrets=np.array(self.regrets),
            rows=np.array(self.rows) if extended else None,
            iterations=np.array(self.iterations) if extended else None,
            action_digest=self.env.actions.digest,
        )
