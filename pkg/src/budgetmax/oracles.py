"""Brute-force and closed-form references used for validation.

Everything here trades speed for independence: these routines avoid the
production code paths (no surrogate, no gradient identity, no sampler
shortcuts) so they can catch bugs in them. Sizes are capped to keep the
exhaustive searches honest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ActionSet, BUDGET_SLACK, TrialData
from .sampler import build_draw_plans, build_partition, sample_membership
from .surrogate import reward_order

MAX_EXHAUSTIVE_ACTIONS = 20
MAX_GRID_ACTIONS = 4


class CapacityError(ValueError):
    """Instance too large for an exhaustive oracle."""


@dataclass(frozen=True)
class ComparatorResult:
    """Best fixed subset under the discounted objective, summed over trials."""

    subset: tuple
    discounted_total: float
    feasible: bool


def best_fixed_subset(stream, action_set: ActionSet, alpha: float, delta: float) -> ComparatorResult:
    """Exact maximizer of the summed discounted profit over feasible subsets.

    Depth-first branch and bound over actions in descending-energy order.
    The upper bound adds every remaining action's non-negative additive part
    plus the best possible per-trial reward lift, so pruning (strictly below
    the incumbent) never discards an optimum. Ties in value resolve to the
    lexicographically smallest ascending index tuple; the empty set scores 0.
    """
    n = action_set.n
    if n > MAX_EXHAUSTIVE_ACTIONS:
        raise CapacityError(f"comparator limited to {MAX_EXHAUSTIVE_ACTIONS} actions, got {n}")
    R = stream.rewards
    C = stream.costs
    T = R.shape[0]
    pos = np.maximum(C, 0.0)
    neg = np.minimum(C, 0.0)
    # additive (reward-independent) contribution of including action i
    additive = -(alpha * neg.sum(axis=0) + delta * pos.sum(axis=0))
    z = action_set.z
    order = np.argsort(-z, kind="stable")

    # suffix_max[k, t]: best reward at trial t among actions order[k:]
    suffix_max = np.zeros((n + 1, T))
    for k in range(n - 1, -1, -1):
        suffix_max[k] = np.maximum(suffix_max[k + 1], R[:, order[k]])
    add_gain = np.maximum(additive[order], 0.0)
    suffix_add = np.concatenate([np.cumsum(add_gain[::-1])[::-1], [0.0]])

    best_value = 0.0
    best_subset: tuple = ()

    def consider(value: float, chosen: list) -> None:
        nonlocal best_value, best_subset
        key = tuple(sorted(chosen))
        if value > best_value or (value == best_value and key < best_subset):
            best_value = value
            best_subset = key

    def dfs(k: int, cur_max: np.ndarray, value: float, energy: float, chosen: list) -> None:
        if k == n:
            consider(value, chosen)
            return
        lift = float(np.maximum(suffix_max[k] - cur_max, 0.0).sum())
        if value + alpha * lift + suffix_add[k] < best_value:
            return
        i = int(order[k])
        if energy + z[i] <= 1.0 + BUDGET_SLACK:
            new_max = np.maximum(cur_max, R[:, i])
            gain = alpha * float((new_max - cur_max).sum()) + float(additive[i])
            chosen.append(i)
            dfs(k + 1, new_max, value + gain, energy + float(z[i]), chosen)
            chosen.pop()
        dfs(k + 1, cur_max, value, energy, chosen)

    consider(0.0, [])
    dfs(0, np.zeros(T), 0.0, 0.0, [])
    return ComparatorResult(best_subset, best_value, True)


def _group_plans(w, action_set: ActionSet):
    return build_draw_plans(np.asarray(w, dtype=float), build_partition(action_set))


def exact_selection_probs(w, action_set: ActionSet) -> np.ndarray:
    """P(i in S) for every action, from the independent-draw product form.

    An action with within-class probability p in a class making m full draws
    with residual mass rho is missed with probability (1-p)^m * (1 - rho*p).
    """
    probs = np.zeros(action_set.n)
    for plan in _group_plans(w, action_set):
        if plan.weight_sum <= 0.0:
            continue
        miss = (1.0 - plan.probs) ** plan.full_draws * (1.0 - plan.residual_mass * plan.probs)
        probs[plan.actions] = 1.0 - miss
    return probs


def exact_intersection_prob(w, action_set: ActionSet, subset) -> float:
    """P(S hits ``subset``), exactly, via the same product form per class."""
    members = set(int(i) for i in subset)
    miss = 1.0
    for plan in _group_plans(w, action_set):
        if plan.weight_sum <= 0.0:
            continue
        inside = np.array([int(a) in members for a in plan.actions])
        p = float(np.sum(plan.probs[inside]))
        miss *= (1.0 - p) ** plan.full_draws * (1.0 - plan.residual_mass * p)
    return 1.0 - miss


def exact_expected_profit(w, action_set: ActionSet, trial: TrialData) -> float:
    """Exact E[profit] of the sampler's selection at weights ``w``.

    E[max reward] telescopes over the descending-reward prefixes: the max is
    at least r_{s_j} exactly when the selection hits the top-j prefix. Costs
    enter through the exact per-action marginals.
    """
    w = np.asarray(w, dtype=float)
    order = reward_order(trial.rewards)
    r_sorted = trial.rewards[order]
    drops = r_sorted - np.append(r_sorted[1:], 0.0)
    expected_max = 0.0
    for j in range(action_set.n):
        if drops[j] == 0.0:
            continue
        hit = exact_intersection_prob(w, action_set, order[:j + 1])
        expected_max += drops[j] * hit
    marginals = exact_selection_probs(w, action_set)
    expected_cost = float(trial.costs @ marginals)
    return expected_max - expected_cost


def estimate_selection_probs(w, action_set: ActionSet, n_samples: int, seed: int,
                             chunk: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo per-action selection frequencies and their standard errors."""
    partition = build_partition(action_set)
    rng = np.random.default_rng(seed)
    counts = np.zeros(action_set.n)
    remaining = int(n_samples)
    while remaining > 0:
        m = min(chunk, remaining)
        counts += sample_membership(w, partition, action_set, rng, m).sum(axis=0)
        remaining -= m
    freq = counts / n_samples
    sigma = np.sqrt(freq * (1.0 - freq) / n_samples)
    return freq, sigma


def estimate_hit_rates(w, action_set: ActionSet, subsets, n_samples: int, seed: int,
                       chunk: int = 200_000) -> np.ndarray:
    """Monte Carlo frequencies with which the selection hits each subset."""
    partition = build_partition(action_set)
    rng = np.random.default_rng(seed)
    subset_idx = [np.array(sorted(set(int(i) for i in sub)), dtype=int) for sub in subsets]
    counts = np.zeros(len(subset_idx))
    remaining = int(n_samples)
    while remaining > 0:
        m = min(chunk, remaining)
        member = sample_membership(w, partition, action_set, rng, m)
        for k, idx in enumerate(subset_idx):
            if idx.size:
                counts[k] += int(member[:, idx].any(axis=1).sum())
        remaining -= m
    return counts / n_samples


def finite_diff_gradient(func, w, h: float) -> np.ndarray:
    """Central-difference gradient of ``func`` at ``w``.

    Falls back to a forward difference at coordinates within ``h`` of the
    non-negativity boundary so evaluation points stay in the domain.
    """
    if not h > 0.0:
        raise ValueError("step h must be positive")
    w = np.array(w, dtype=float)
    g = np.zeros_like(w)
    for i in range(w.size):
        up = w.copy()
        up[i] += h
        if w[i] >= h:
            down = w.copy()
            down[i] -= h
            g[i] = (func(up) - func(down)) / (2.0 * h)
        else:
            g[i] = (func(up) - func(w)) / h
    return g


def grid_projection(y, z, resolution: float) -> np.ndarray:
    """Nearest feasible grid point to ``y`` by exhaustive search.

    All coordinates but the last are enumerated outright; for each feasible
    prefix the best last coordinate has a closed form (the grid value nearest
    ``y[-1]`` within the leftover budget), which keeps the search exact at a
    fraction of the full grid's cost. Capped at 4 actions.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    n = y.size
    if n > MAX_GRID_ACTIONS:
        raise CapacityError(f"grid oracle limited to {MAX_GRID_ACTIONS} actions, got {n}")
    if not 0.0 < resolution <= 1.0:
        raise ValueError("resolution must lie in (0, 1]")
    k_top = int(math.floor(1.0 / resolution + 1e-9))
    values = np.minimum(np.arange(k_top + 1) * resolution, 1.0)
    target = int(np.clip(round(y[-1] / resolution), 0, k_top))

    def best_last(budget_left: np.ndarray) -> np.ndarray:
        # grid value for the last coordinate nearest y[-1] within the budget
        if z[-1] <= 0.0:
            return np.full(budget_left.shape, values[target])
        # min against k_top while still float: the raw quotient can overflow int64
        k_max = np.minimum(np.floor(budget_left / (z[-1] * resolution) + 1e-9), k_top)
        return values[np.minimum(target, k_max).astype(int)]

    if n == 1:
        return best_last(np.array([1.0]))

    # mesh over coordinates 1..n-2 (everything between the first and last)
    mid_dims = n - 2
    if mid_dims > 0:
        grids = np.meshgrid(*([values] * mid_dims), indexing="ij")
        mid = np.stack([g.ravel() for g in grids], axis=1)
    else:
        mid = np.zeros((1, 0))
    mid_energy = mid @ z[1:-1]
    mid_dist2 = ((mid - y[1:-1]) ** 2).sum(axis=1)

    best_d2 = np.inf
    best_x = None
    for x0 in values:
        left = 1.0 - x0 * z[0] - mid_energy
        feasible = left >= -1e-12
        if not feasible.any():
            continue
        x_last = best_last(np.maximum(left, 0.0))
        d2 = (x0 - y[0]) ** 2 + mid_dist2 + (x_last - y[-1]) ** 2
        d2 = np.where(feasible, d2, np.inf)
        j = int(np.argmin(d2))
        if d2[j] < best_d2:
            best_d2 = float(d2[j])
            best_x = np.concatenate([[x0], mid[j], [x_last[j]]])
    assert best_x is not None  # x = 0 is always feasible
    return best_x
