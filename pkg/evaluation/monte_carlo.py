import logging
import math
from dataclasses import dataclass

import numpy as np

from model.transforms import normalize_costs
from model.tree import sample_path
from policies.stopping import make_policy, run_policy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    trials: int

    @property
    def degenerate(self):
        """A single trial has no sample variance; stderr is reported as 0."""
        return self.trials < 2

    def agrees_with(self, exact, sigmas=4):
        return abs(self.mean - float(exact)) <= sigmas * self.stderr + 1e-9


def trial_seeds(seed, trial):
    """Per-trial (path, policy) seeds; independent of scheduling order."""
    return [seed, trial, 0], [seed, trial, 1]


def run_trial(tree, policy_name, seed, trial):
    path_seed, policy_seed = trial_seeds(seed, trial)
    path = sample_path(tree, path_seed)
    return run_policy(make_policy(policy_name, policy_seed), path)


def monte_carlo_cost(tree, policy_name, trials, seed):
    """
    Sample mean and standard error of a policy's cost over independent trials.

    Each trial draws a fresh path and fresh policy randomness from seeds derived
    from (seed, trial index), so results are reproducible given seed.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not tree.has_unit_costs:
        tree = normalize_costs(tree).tree

    costs = np.empty(trials, dtype=float)
    for trial in range(trials):
        costs[trial] = float(run_trial(tree, policy_name, seed, trial).cost)

    mean = float(np.mean(costs))
    if trials < 2:
        logger.warning(f"monte_carlo_cost({policy_name}): single trial, stderr reported as 0")
        return MonteCarloEstimate(mean, 0.0, trials)
    stderr = float(np.std(costs, ddof=1)) / math.sqrt(trials)
    logger.debug(f"monte_carlo_cost({policy_name}): {mean:.6f} ± {stderr:.6f} over {trials} trials")
    return MonteCarloEstimate(mean, stderr, trials)
