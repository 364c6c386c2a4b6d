"""Shared helpers for the test suite.

Randomized tests draw from seeded generators so every run is deterministic;
helpers here build the instances most tests need.
"""

import numpy as np

from budgetmax import ActionSet, TrialData, project_onto_feasible


def random_energies(rng, n, beta_max=0.49, zero_frac=0.3):
    """Energy vector in [0, beta_max] with a sprinkle of exact zeros."""
    z = rng.uniform(0.0, beta_max, n)
    z[rng.random(n) < zero_frac] = 0.0
    return z


def random_action_set(rng, n, beta_max=0.49, zero_frac=0.3):
    return ActionSet.from_energies(random_energies(rng, n, beta_max, zero_frac))


def random_feasible_point(rng, z, scale=1.5):
    """A point of the box-and-budget polytope, biased toward its boundary."""
    return project_onto_feasible(rng.uniform(0.0, scale, len(z)), z)


def random_trial(rng, n, r_scale=2.0, c_scale=1.0, tie_frac=0.0):
    """Random trial; with tie_frac > 0 some rewards are exact duplicates."""
    rewards = rng.uniform(0.0, r_scale, n)
    if tie_frac > 0.0 and n >= 2:
        dup = rng.random(n) < tie_frac
        rewards[dup] = rewards[int(rng.integers(n))]
    costs = rng.uniform(-c_scale, c_scale, n)
    return TrialData.from_arrays(rewards, costs)
