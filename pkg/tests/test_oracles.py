import itertools

import numpy as np
import numpy.testing as npt
import pytest

from budgetmax import (ActionSet, Stream, TrialData, discounted_profit,
                       is_feasible, surrogate_value)
from budgetmax.oracles import (CapacityError, best_fixed_subset,
                               estimate_hit_rates, estimate_selection_probs,
                               exact_expected_profit, exact_intersection_prob,
                               exact_selection_probs, finite_diff_gradient,
                               grid_projection)
from conftest import random_action_set, random_feasible_point, random_trial


def naive_best_subset(stream, aset, alpha, delta):
    """Plain enumeration with the same lexicographic tie rule."""
    best_value, best_subset = 0.0, ()
    for size in range(aset.n + 1):
        for sub in itertools.combinations(range(aset.n), size):
            if float(np.sum(aset.z[list(sub)])) > 1.0 + 1e-12:
                continue
            total = sum(discounted_profit(sub, stream.trial(t), alpha, delta)
                        for t in range(stream.T))
            if total > best_value or (total == best_value and sub < best_subset):
                best_value, best_subset = total, sub
    return best_value, best_subset


class TestBestFixedSubset:
    def test_negative_cost_example(self):
        # rewards all zero; the two cheapest-to-hold actions that fit win
        aset = ActionSet.from_energies([0.6, 0.6, 0.3])
        stream = Stream(aset, np.zeros((1, 3)), np.array([[-3.0, -2.0, -1.0]]))
        res = best_fixed_subset(stream, aset, alpha=0.5, delta=0.25)
        assert res.subset == (0, 2)
        assert res.discounted_total == pytest.approx(0.5 * 4.0)

    def test_all_zero_stream_prefers_empty_set(self):
        aset = ActionSet.from_energies([0.2, 0.1])
        stream = Stream(aset, np.zeros((3, 2)), np.zeros((3, 2)))
        res = best_fixed_subset(stream, aset, 0.5, 0.5)
        assert res.subset == ()
        assert res.discounted_total == 0.0

    def test_capacity_cap(self):
        aset = ActionSet.from_energies([0.01] * 21)
        stream = Stream(aset, np.zeros((1, 21)), np.zeros((1, 21)))
        with pytest.raises(CapacityError):
            best_fixed_subset(stream, aset, 1.0, 1.0)

    def test_matches_naive_enumeration(self):
        rng = np.random.default_rng(167)
        for _ in range(40):
            n = int(rng.integers(1, 9))
            T = int(rng.integers(1, 6))
            aset = random_action_set(rng, n, beta_max=0.6)
            rewards = rng.uniform(0.0, 2.0, (T, n))
            costs = rng.uniform(-1.0, 1.0, (T, n))
            stream = Stream(aset, rewards, costs)
            alpha = float(rng.uniform(0.1, 1.0))
            delta = float(rng.uniform(0.1, 1.0))
            res = best_fixed_subset(stream, aset, alpha, delta)
            naive_value, naive_sub = naive_best_subset(stream, aset, alpha, delta)
            assert res.discounted_total == pytest.approx(naive_value, abs=1e-9)
            # the returned subset must be optimal up to float-sum noise
            got = sum(discounted_profit(res.subset, stream.trial(t), alpha, delta)
                      for t in range(T))
            assert got >= naive_value - 1e-9

    def test_exact_ties_break_lexicographically(self):
        # integer data, alpha = delta = 1: sums are exact, ties are real.
        # actions 1 and 2 are interchangeable copies; 0 costs money.
        aset = ActionSet.from_energies([0.4, 0.3, 0.3])
        rewards = np.array([[0.0, 2.0, 2.0]])
        costs = np.array([[0.5, 0.0, 0.0]])
        res = best_fixed_subset(Stream(aset, rewards, costs), aset, 1.0, 1.0)
        assert res.discounted_total == 2.0
        assert res.subset == (1,)  # {1}, {2}, {1,2} tie; lexicographic min wins

    def test_beats_every_enumerated_subset(self):
        rng = np.random.default_rng(173)
        aset = random_action_set(rng, 10, beta_max=0.4)
        stream = Stream(aset, rng.uniform(0, 2, (4, 10)), rng.uniform(-1, 1, (4, 10)))
        res = best_fixed_subset(stream, aset, aset.alpha, aset.delta)
        for size in range(11):
            for sub in itertools.combinations(range(10), size):
                if float(np.sum(aset.z[list(sub)])) > 1.0 + 1e-12:
                    continue
                total = sum(discounted_profit(sub, stream.trial(t), aset.alpha, aset.delta)
                            for t in range(4))
                assert res.discounted_total >= total - 1e-9


class TestExactExpectedProfit:
    def test_zero_weights(self):
        aset = ActionSet.from_energies([0.25, 0.1])
        trial = TrialData.from_arrays([1.0, 2.0], [0.3, -0.4])
        assert exact_expected_profit(np.zeros(2), aset, trial) == 0.0

    def test_single_action_closed_form(self):
        # p = delta * w = 0.25; E = p*(r - c) = 0.25 * 3 = 0.75
        aset = ActionSet.from_energies([0.25])
        trial = TrialData.from_arrays([4.0], [1.0])
        assert exact_expected_profit([1.0], aset, trial) == pytest.approx(0.75, abs=1e-15)

    def test_matches_monte_carlo(self):
        from budgetmax import build_partition, sample_membership
        rng = np.random.default_rng(179)
        for case in range(5):
            n = int(rng.integers(1, 7))
            aset = random_action_set(rng, n)
            w = random_feasible_point(rng, aset.z)
            trial = random_trial(rng, n)
            expect = exact_expected_profit(w, aset, trial)
            member = sample_membership(w, build_partition(aset), aset,
                                       np.random.default_rng(300 + case), 200_000)
            best = np.where(member, trial.rewards, -np.inf).max(axis=1)
            best[~member.any(axis=1)] = 0.0
            profits = best - member @ trial.costs
            se = float(profits.std(ddof=1) / np.sqrt(len(profits)))
            assert abs(float(profits.mean()) - expect) <= 4.0 * max(se, 1e-9)

    def test_dominates_negative_surrogate(self):
        rng = np.random.default_rng(181)
        for _ in range(100):
            n = int(rng.integers(1, 7))
            aset = random_action_set(rng, n)
            w = random_feasible_point(rng, aset.z)
            trial = random_trial(rng, n)
            assert exact_expected_profit(w, aset, trial) >= \
                -surrogate_value(w, trial, aset.delta) - 1e-10


class TestEstimators:
    def test_zero_weights_zero_frequency(self):
        aset = ActionSet.from_energies([0.25, 0.0])
        freq, sigma = estimate_selection_probs(np.zeros(2), aset, 1000, seed=1)
        npt.assert_array_equal(freq, 0.0)
        npt.assert_array_equal(sigma, 0.0)

    def test_hit_rate_matches_exact(self):
        rng = np.random.default_rng(191)
        aset = random_action_set(rng, 8)
        w = random_feasible_point(rng, aset.z)
        subsets = [[0], [1, 3], list(range(8))]
        rates = estimate_hit_rates(w, aset, subsets, 200_000, seed=193)
        for sub, rate in zip(subsets, rates):
            exact = exact_intersection_prob(w, aset, sub)
            sigma = max(np.sqrt(exact * (1.0 - exact) / 200_000), 1e-9)
            assert abs(rate - exact) <= 4.0 * sigma


class TestFiniteDiff:
    def test_linear_function_is_exact(self):
        slope = np.array([2.0, -3.0, 0.5])
        g = finite_diff_gradient(lambda v: float(slope @ v), np.array([1.0, 2.0, 0.0]), 1e-5)
        npt.assert_allclose(g, slope, atol=1e-9)

    def test_boundary_uses_forward_difference(self):
        # f(v) = sum sqrt(v): undefined below 0; boundary coordinate works
        g = finite_diff_gradient(lambda v: float(np.sum(np.sqrt(np.abs(v)))),
                                 np.array([0.0, 1.0]), 1e-6)
        assert np.isfinite(g).all()
        assert g[1] == pytest.approx(0.5, abs=1e-4)

    def test_bad_step_rejected(self):
        with pytest.raises(ValueError):
            finite_diff_gradient(lambda v: 0.0, np.zeros(2), 0.0)


class TestGridProjection:
    def test_on_grid_feasible_point_is_fixed(self):
        z = np.array([0.3, 0.2])
        y = np.array([0.25, 0.5])
        npt.assert_allclose(grid_projection(y, z, 0.05), y, atol=1e-12)

    def test_symmetric_example(self):
        got = grid_projection(np.array([1.0, 1.0]), np.array([0.6, 0.6]), 1e-4)
        npt.assert_allclose(got, [5.0 / 6.0, 5.0 / 6.0], atol=2e-4)

    def test_output_is_feasible_grid_point(self):
        rng = np.random.default_rng(197)
        for _ in range(50):
            n = int(rng.integers(1, 5))
            z = rng.uniform(0.0, 1.0, n)
            y = rng.uniform(-0.5, 2.0, n)
            res = 0.01
            x = grid_projection(y, z, res)
            assert is_feasible(x, z, tol=res * float(np.sum(z)) + 1e-9)
            k = np.round(x / res)
            npt.assert_allclose(np.minimum(k * res, 1.0), x, atol=1e-12)

    def test_capacity_cap(self):
        with pytest.raises(CapacityError):
            grid_projection(np.zeros(5), np.zeros(5), 0.1)

    def test_bad_resolution_rejected(self):
        with pytest.raises(ValueError):
            grid_projection(np.zeros(2), np.zeros(2), 0.0)
