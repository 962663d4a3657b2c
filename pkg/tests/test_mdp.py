import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from fairl.mdp import (
    ConvergenceWarning,
    InvalidMdpError,
    Mdp,
    Trajectory,
    boltzmann_distribution,
    greedy_policy,
    pearson_correlation,
    sample_trajectories,
    value_iteration,
    visit_counts,
)
from fairl.objectworld import ObjectworldConfig, generate

from .oracles import brute_force_optimal_values, policy_iteration_values, random_dense_mdp

finite = st.floats(-50, 50, allow_nan=False)


def chain():
    # s0 -> s1 -> s1
    return Mdp.from_transitions(2, 1, [[[(1, 1.0)]], [[(1, 1.0)]]], gamma=0.5)


class TestMdpConstruction:
    def test_rejects_rows_not_summing_to_one(self):
        with pytest.raises(InvalidMdpError):
            Mdp.from_transitions(1, 1, [[[(0, 0.9)]]], gamma=0.5)

    def test_rejects_out_of_range_successor(self):
        with pytest.raises(InvalidMdpError):
            Mdp.from_transitions(1, 1, [[[(3, 1.0)]]], gamma=0.5)

    @pytest.mark.parametrize("gamma", [-0.1, 1.0, 1.5])
    def test_rejects_bad_gamma(self, gamma):
        with pytest.raises(InvalidMdpError):
            Mdp.from_transitions(1, 1, [[[(0, 1.0)]]], gamma=gamma)

    def test_dense_round_trip(self):
        P = random_dense_mdp(np.random.default_rng(0), 6, 3)
        mdp = Mdp.from_dense(P, 0.9)
        assert_allclose(mdp.dense(), P, atol=1e-15)

    def test_expect_and_adjoint_match_dense(self):
        rng = np.random.default_rng(1)
        P = random_dense_mdp(rng, 7, 4)
        mdp = Mdp.from_dense(P, 0.9)
        v = rng.normal(size=7)
        w = rng.normal(size=(7, 4))
        assert_allclose(mdp.expect(v), P @ v, atol=1e-12)
        assert_allclose(mdp.expect_adjoint(w), np.einsum("sak,sa->k", P, w), atol=1e-12)


class TestValueIteration:
    def test_single_self_loop(self):
        mdp = Mdp.from_transitions(1, 1, [[[(0, 1.0)]]], gamma=0.0)
        V, Q = value_iteration(mdp, np.array([2.5]))
        assert_allclose(V, [2.5])
        assert_allclose(Q, [[2.5]])

    def test_two_state_chain_by_hand(self):
        V, Q = value_iteration(chain(), np.array([0.0, 1.0]), tol=1e-12)
        assert_allclose(V, [2.0, 2.0], atol=1e-9)

    def test_matches_brute_force_on_small_windy_grid(self):
        env = generate(ObjectworldConfig(grid_n=2, n_objects=2, seed=3, wind=0.3))
        reward = np.array([1.0, -1.0, 0.0, 0.5])
        V, _ = value_iteration(env.mdp, reward, tol=1e-12)
        oracle = brute_force_optimal_values(env.mdp.dense(), reward, env.mdp.gamma)
        assert_allclose(V, oracle, atol=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force_on_random_mdps(self, seed):
        rng = np.random.default_rng(seed)
        P = random_dense_mdp(rng, 4, 3)
        reward = rng.normal(size=4)
        V, _ = value_iteration(Mdp.from_dense(P, 0.8), reward, tol=1e-12)
        assert_allclose(V, brute_force_optimal_values(P, reward, 0.8), atol=1e-6)

    def test_matches_policy_iteration_on_objectworld(self):
        env = generate(ObjectworldConfig(seed=0))
        V, Q = value_iteration(env.mdp, env.true_reward, tol=1e-12)
        V_pi, Q_pi = policy_iteration_values(env.mdp.dense(), env.true_reward, env.mdp.gamma)
        assert_allclose(V, V_pi, atol=1e-6)
        assert_allclose(Q, Q_pi, atol=1e-6)

    def test_bellman_identities_hold(self):
        env = generate(ObjectworldConfig(seed=2, wind=0.2))
        tol = 1e-9
        V, Q = value_iteration(env.mdp, env.true_reward, tol=tol)
        P = env.mdp.dense()
        assert np.max(np.abs(Q - P @ (env.true_reward + env.mdp.gamma * V))) <= 10 * tol
        assert np.max(np.abs(V - Q.max(axis=1))) <= 10 * tol

    def test_deterministic(self):
        env = generate(ObjectworldConfig(seed=4))
        a = value_iteration(env.mdp, env.true_reward)
        b = value_iteration(env.mdp, env.true_reward)
        assert_array_equal(a[0], b[0])
        assert_array_equal(a[1], b[1])

    def test_non_convergence_warns_with_residual(self):
        env = generate(ObjectworldConfig(seed=0))
        with pytest.warns(ConvergenceWarning) as record:
            value_iteration(env.mdp, env.true_reward, tol=1e-12, max_iter=2)
        assert record[0].message.residual > 1e-12
        assert record[0].message.iterations == 2

    @pytest.mark.parametrize("kwargs", [{"tol": 0.0}, {"max_iter": 0}])
    def test_rejects_bad_arguments(self, kwargs):
        with pytest.raises(ValueError):
            value_iteration(chain(), np.zeros(2), **kwargs)


class TestGreedyPolicy:
    def test_ties_break_to_lowest_index(self):
        assert greedy_policy(np.array([[1.0, 3.0, 3.0]]))[0] == 1

    def test_single_action(self):
        assert greedy_policy(np.array([[5.0]]))[0] == 0

    def test_no_one_step_deviation_improves(self):
        env = generate(ObjectworldConfig(seed=1))
        V, Q = value_iteration(env.mdp, env.true_reward, tol=1e-12)
        pi = greedy_policy(Q)
        P = env.mdp.dense()
        chosen = Q[np.arange(len(pi)), pi]
        for s in range(env.mdp.n_states):
            for a in range(env.mdp.n_actions):
                deviation = P[s, a] @ (env.true_reward + env.mdp.gamma * V)
                assert deviation <= chosen[s] + 1e-9


class TestBoltzmann:
    def test_symmetric_row(self):
        assert_allclose(boltzmann_distribution([1.0, 1.0], 7.0), [0.5, 0.5])

    def test_zero_confidence_is_uniform(self):
        assert_allclose(boltzmann_distribution([3.0, -1.0, 9.0, 0.0], 0.0), [0.25] * 4)

    def test_hand_example(self):
        assert_allclose(boltzmann_distribution([0.0, math.log(3.0)], 1.0), [0.25, 0.75], atol=1e-12)

    def test_large_values_do_not_overflow(self):
        p = boltzmann_distribution([1000.0, 999.0], 10.0)
        assert np.all(np.isfinite(p))

    @given(st.lists(finite, min_size=1, max_size=6), finite, st.floats(0, 5))
    def test_shift_invariance(self, q, c, b):
        q = np.array(q)
        p = boltzmann_distribution(q, b)
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.all(p > 0) or b * np.ptp(q) > 700
        assert_allclose(boltzmann_distribution(q + c, b), p, atol=1e-12)


class TestSampling:
    def test_shape(self):
        env = generate(ObjectworldConfig(seed=0))
        _, Q = value_iteration(env.mdp, env.true_reward)
        trajs = sample_trajectories(env.mdp, Q, 1.0, count=3, horizon=4, seed=0)
        assert len(trajs) == 3
        assert all(len(t) == 4 for t in trajs)

    def test_same_seed_is_identical(self):
        env = generate(ObjectworldConfig(seed=0, wind=0.3))
        _, Q = value_iteration(env.mdp, env.true_reward)
        a = sample_trajectories(env.mdp, Q, 1.0, 20, 10, seed=5)
        b = sample_trajectories(env.mdp, Q, 1.0, 20, 10, seed=5)
        assert [t.steps for t in a] == [t.steps for t in b]

    def test_transitions_follow_the_model(self):
        env = generate(ObjectworldConfig(seed=0))
        _, Q = value_iteration(env.mdp, env.true_reward)
        dest = env.mdp.next_states[:, :, 0]
        for t in sample_trajectories(env.mdp, Q, 1.0, 10, 15, seed=2):
            for (s, a), (s2, _) in zip(t.steps, t.steps[1:]):
                assert dest[s, a] == s2

    def test_large_confidence_acts_greedily(self):
        env = generate(ObjectworldConfig(seed=0))
        _, Q = value_iteration(env.mdp, env.true_reward)
        for t in sample_trajectories(env.mdp, Q, 1e6, 10, 20, seed=1):
            for s, a in t:
                # tied maxima are all greedy
                assert Q[s, a] == Q[s].max()

    def test_zero_confidence_frequency(self):
        mdp = Mdp.from_transitions(1, 2, [[[(0, 1.0)], [(0, 1.0)]]], gamma=0.5)
        trajs = sample_trajectories(mdp, np.array([[0.0, 5.0]]), 0.0, count=100, horizon=1000, seed=0)
        counts = visit_counts(trajs, 1, 2)
        assert counts.sum() == 100_000
        assert abs(counts[0, 0] / counts.sum() - 0.5) <= 0.01


class TestTrajectory:
    def test_pairs_round_trip(self):
        t = Trajectory.from_pairs([(0, 1), (2, 0)])
        assert t.steps == [(0, 1), (2, 0)]

    def test_check_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Trajectory.from_pairs([(5, 0)]).check(3, 2)

    def test_visit_counts(self):
        trajs = [Trajectory.from_pairs([(0, 1), (1, 0), (0, 1)])]
        assert_array_equal(visit_counts(trajs, 2, 2), [[0, 2], [1, 0]])


class TestPearson:
    def test_identity(self):
        assert pearson_correlation([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)

    def test_anti(self):
        assert pearson_correlation([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_example(self):
        assert pearson_correlation([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)

    def test_degenerate_flags(self):
        value, flag = pearson_correlation([1, 1, 1], [1, 2, 3], return_flag=True)
        assert value == 0.0 and flag

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pearson_correlation([1, 2], [1, 2, 3])

    @settings(max_examples=50)
    @given(
        st.lists(st.floats(-10, 10), min_size=3, max_size=10),
        st.floats(0.1, 10),
        st.floats(-10, 10),
    )
    def test_positive_affine_invariance(self, xs, scale, shift):
        x = np.array(xs)
        if np.ptp(x) < 1e-3:
            return
        y = np.sin(np.arange(len(x)) + 0.3)
        assert pearson_correlation(x * scale + shift, y) == pytest.approx(pearson_correlation(x, y), abs=1e-12)
