"""Randomized subset selection driven by a weight vector.

Actions are grouped into geometric energy classes: class ``q >= 1`` holds the
energies in ``(tau**q * beta, tau**(q-1) * beta]`` and zero-energy actions go
to a class of their own. Given feasible weights ``w``, each class with weight
mass ``S_q`` contributes ``floor(delta * S_q)`` independent draws from the
within-class distribution ``w_i / S_q`` plus one residual draw that yields an
action only with the leftover fractional probability ``delta*S_q -
floor(delta*S_q)``. Duplicates collapse, so the result is a set. Because a
class-``q`` action costs at most ``tau**(q-1) * beta`` energy and receives at
most ``delta * S_q + 1`` draws, the total energy of the union never exceeds
the unit budget: summed over classes it is bounded by ``beta / (1 - tau) +
delta / tau = sqrt(beta) + (1 - sqrt(beta)) = 1``.

Per-action marginals are sandwiched as ``1 - exp(-delta * w_i) <= P(i
selected) <= delta * w_i``, and any fixed subset ``Z`` is hit with
probability at least ``1 - exp(-delta * sum_{i in Z} w_i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ActionSet, Selection
from .projection import is_feasible

# Class key reserved for zero-energy actions (they never strain the budget).
ZERO_CLASS = 0


@dataclass(frozen=True)
class Partition:
    """Energy classes, keyed by class index, plus the thresholds used.

    ``groups`` maps ``q`` to an ascending array of action indices. ``beta``
    is the threshold base (the max energy, or an explicit cap), ``tau`` and
    ``delta`` are derived from it. Actions above a cap are simply absent.
    """

    groups: dict
    beta: float
    tau: float
    delta: float

    def covered_actions(self) -> np.ndarray:
        if not self.groups:
            return np.empty(0, dtype=int)
        return np.sort(np.concatenate([idx for idx in self.groups.values()]))


@dataclass(frozen=True)
class GroupDrawPlan:
    """Draw counts and within-class distribution for one class.

    ``full_draws`` independent draws from ``probs`` over ``actions``, then a
    residual draw that picks from the same distribution with probability
    ``residual_mass`` and otherwise yields nothing.
    """

    group: int
    actions: np.ndarray
    probs: np.ndarray
    weight_sum: float
    full_draws: int
    residual_mass: float


def _class_index(z_i: float, beta: float, tau: float) -> int:
    # q >= 1 such that tau**q * beta < z_i <= tau**(q-1) * beta. The log
    # estimate can be off by one at class boundaries, so correct directly.
    q = max(1, int(math.floor(math.log(z_i / beta) / math.log(tau))) + 1)
    while z_i > tau ** (q - 1) * beta:
        q -= 1
    while z_i <= tau ** q * beta:
        q += 1
    return q


def build_partition(action_set: ActionSet, cap: float | None = None) -> Partition:
    """Group actions by energy class.

    With ``cap=None`` every action is covered and thresholds come from
    ``action_set.beta``, which must be below 1. With an explicit cap the
    thresholds come from the cap and only actions with ``z_i < cap`` are
    covered; the caller is responsible for the rest.
    """
    z = action_set.z
    if cap is None:
        beta = action_set.beta
        if beta >= 1.0:
            raise ValueError("standard partition requires max energy < 1")
        covered = np.arange(z.size)
    else:
        beta = float(cap)
        if not 0.0 < beta < 1.0:
            raise ValueError("cap must lie in (0, 1)")
        covered = np.flatnonzero(z < beta)
    tau = 1.0 - math.sqrt(beta)
    delta = tau * tau

    buckets: dict[int, list[int]] = {}
    for i in covered:
        zi = float(z[i])
        q = ZERO_CLASS if zi == 0.0 else _class_index(zi, beta, tau)
        buckets.setdefault(q, []).append(int(i))
    groups = {q: np.array(sorted(idx), dtype=int) for q, idx in sorted(buckets.items())}
    return Partition(groups=groups, beta=beta, tau=tau, delta=delta)


def build_draw_plans(w, partition: Partition) -> list[GroupDrawPlan]:
    """Per-class draw plans for a weight vector (0/0 treated as no draws)."""
    w = np.asarray(w, dtype=float)
    plans = []
    for q in sorted(partition.groups):
        actions = partition.groups[q]
        weights = w[actions]
        s_q = float(np.sum(weights))
        scaled = partition.delta * s_q
        full = int(math.floor(scaled))
        residual = scaled - full
        probs = weights / s_q if s_q > 0.0 else np.zeros_like(weights)
        plans.append(GroupDrawPlan(q, actions, probs, s_q, full, residual))
    return plans


def _cumulative(probs: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs)
    cum[-1] = 1.0  # guard against cumsum rounding below 1
    return cum


def sample_selection(w, partition: Partition, action_set: ActionSet, rng) -> Selection:
    """Draw one selection. ``w`` must lie in the feasible polytope."""
    w = np.asarray(w, dtype=float)
    if not is_feasible(w, action_set.z):
        raise ValueError("weights must lie in the feasible polytope")
    chosen: list[int] = []
    for plan in build_draw_plans(w, partition):
        if plan.weight_sum <= 0.0:
            continue
        cum = _cumulative(plan.probs)
        if plan.full_draws:
            hits = np.searchsorted(cum, rng.random(plan.full_draws), side="right")
            chosen.extend(plan.actions[hits])
        if rng.random() < plan.residual_mass:
            pick = int(np.searchsorted(cum, rng.random(), side="right"))
            chosen.append(int(plan.actions[pick]))
    return Selection.from_indices(chosen, action_set.z)


def sample_membership(w, partition: Partition, action_set: ActionSet, rng,
                      n_samples: int) -> np.ndarray:
    """Boolean ``(n_samples, n)`` membership matrix of independent selections.

    Each row marks one draw from the same distribution
    :func:`sample_selection` uses; the batch exists because per-draw Python
    loops are far too slow for Monte Carlo validation at 1e6 samples.
    """
    w = np.asarray(w, dtype=float)
    if not is_feasible(w, action_set.z):
        raise ValueError("weights must lie in the feasible polytope")
    member = np.zeros((n_samples, action_set.n), dtype=bool)
    rows = np.arange(n_samples)
    for plan in build_draw_plans(w, partition):
        if plan.weight_sum <= 0.0:
            continue
        cum = _cumulative(plan.probs)
        if plan.full_draws:
            hits = np.searchsorted(cum, rng.random((n_samples, plan.full_draws)),
                                   side="right")
            member[rows[:, None], plan.actions[hits]] = True
        if plan.residual_mass > 0.0:
            take = rng.random(n_samples) < plan.residual_mass
            hits = np.searchsorted(cum, rng.random(n_samples), side="right")
            member[rows[take], plan.actions[hits[take]]] = True
    return member


def analytic_selection_bounds(w, i: int, delta: float) -> tuple[float, float]:
    """Sandwich on the marginal: ``1 - exp(-delta*w_i) <= P(i in S) <= delta*w_i``."""
    w = np.asarray(w, dtype=float)
    wi = float(w[i])
    return 1.0 - math.exp(-delta * wi), delta * wi


def analytic_intersection_lower_bound(w, subset, delta: float) -> float:
    """Lower bound on the probability that the selection hits ``subset``."""
    w = np.asarray(w, dtype=float)
    idx = sorted({int(i) for i in subset})
    mass = float(np.sum(w[idx])) if idx else 0.0
    return 1.0 - math.exp(-delta * mass)
