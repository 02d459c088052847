# -*- coding: utf-8 -*-

"""Tests for training, ranking and evaluation."""

import unittest

import numpy as np
from scipy.stats import chisquare

from dqas_rl.envs import FrozenLakeState, Transition, reset, step
from dqas_rl.noise import NoiseSpec
from dqas_rl.qdqn import make_network, q_values
from dqas_rl.supernet import ArchitectureSample, argmax_architecture, build_pool, placeholder_probs
from dqas_rl.trainer import (
    AdamState, AgentResult, EpisodeRecord, EvalReport, ReplayBuffer, adam_update, epsilon_greedy, evaluate,
    rank_agents, retrain, train_agent,
)
from tests.constants import (
    FIRST_ARCH, FROZENLAKE_SOLUTION, frozenlake_solving_policy, make_supercircuit, tiny_train_config,
)


def _transition(cell: int) -> Transition:
    return Transition(FrozenLakeState(cell), 0, 0.0, FrozenLakeState(cell), False)


def _result(agent: int, returns, episodes_to_solve=None, window: int = 2) -> AgentResult:
    sc = make_supercircuit()
    return AgentResult(
        agent=agent,
        seed=agent,
        window=window,
        records=[EpisodeRecord(i + 1, value, 0.0, 0.0, 1.0, 'tune') for i, value in enumerate(returns)],
        alpha_trace=[],
        supercircuit=sc,
        architecture=FIRST_ARCH,
        network=make_network(sc, 'cartpole'),
        episodes_to_solve=episodes_to_solve,
    )


class TestReplayBuffer(unittest.TestCase):
    """Test the replay memory."""

    def test_eviction(self):
        """Test that the oldest transition is evicted first."""
        buffer = ReplayBuffer(3)
        for cell in range(5):
            buffer.push(_transition(cell))
        self.assertEqual(3, len(buffer))
        self.assertEqual([2, 3, 4], [t.state.cell for t in buffer.transitions])

    def test_sample_distinct(self):
        """Test that a sample holds distinct stored transitions."""
        buffer = ReplayBuffer(10)
        for cell in range(10):
            buffer.push(_transition(cell))
        sample = buffer.sample(6, np.random.default_rng(0))
        cells = [t.state.cell for t in sample]
        self.assertEqual(6, len(set(cells)))

    def test_sample_after_wrapping(self):
        """Test that a full memory samples positions counted from the oldest transition."""
        buffer = ReplayBuffer(4)
        for cell in range(10):
            buffer.push(_transition(cell))
        self.assertEqual([6, 7, 8, 9], [t.state.cell for t in buffer.transitions])
        positions = np.random.default_rng(5).choice(4, size=3, replace=False)
        sample = buffer.sample(3, np.random.default_rng(5))
        self.assertEqual([6 + int(i) for i in positions], [t.state.cell for t in sample])

    def test_invalid(self):
        """Test oversampling and empty capacities."""
        buffer = ReplayBuffer(2)
        buffer.push(_transition(0))
        with self.assertRaises(ValueError):
            buffer.sample(2, np.random.default_rng(0))
        with self.assertRaises(ValueError):
            ReplayBuffer(0)


class TestAdam(unittest.TestCase):
    """Test the Adam update."""

    def test_matches_reference(self):
        """Test three steps against the textbook update."""
        x = np.array([0.5, -1.0, 2.0])
        grads = [np.array([0.1, -0.3, 0.0]), np.array([0.2, 0.1, -0.5]), np.array([-0.4, 0.2, 0.3])]
        state = AdamState.create({'x': x}, {'x': 0.01})
        params = {'x': x}

        m = np.zeros(3)
        v = np.zeros(3)
        expected = x.copy()
        for t, g in enumerate(grads, start=1):
            params, state = adam_update(params, {'x': g}, state)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            expected = expected - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        np.testing.assert_allclose(expected, params['x'], rtol=1e-12)
        self.assertEqual(3, state.t['x'])
        np.testing.assert_array_equal(np.array([0.5, -1.0, 2.0]), x)

    def test_first_step_size(self):
        """Test that the first step moves every coordinate by about the learning rate."""
        x = np.zeros(2)
        params, _ = adam_update({'x': x}, {'x': np.array([3.0, -0.002])}, AdamState.create({'x': x}, {'x': 0.1}))
        np.testing.assert_allclose([-0.1, 0.1], params['x'], rtol=1e-4)

    def test_untouched_groups(self):
        """Test that groups without a gradient keep their values and counters."""
        params = {'a': np.ones(2), 'b': np.ones(3)}
        state = AdamState.create(params, {'a': 0.1, 'b': 0.1})
        new_params, state = adam_update(params, {'a': np.ones(2)}, state)
        np.testing.assert_array_equal(np.ones(3), new_params['b'])
        self.assertEqual(0, state.t['b'])
        self.assertEqual(1, state.t['a'])

    def test_shape_mismatch(self):
        """Test that mismatched shapes are rejected."""
        params = {'a': np.ones(2)}
        with self.assertRaises(ValueError):
            adam_update(params, {'a': np.ones(3)}, AdamState.create(params, {'a': 0.1}))


class TestEpsilonGreedy(unittest.TestCase):
    """Test action selection."""

    def test_greedy_ties(self):
        """Test that the greedy choice prefers the lowest index on ties."""
        rng = np.random.default_rng(0)
        self.assertEqual(1, epsilon_greedy(np.array([0.1, 0.7, 0.7, 0.2]), 0.0, rng))

    def test_uniform(self):
        """Test that epsilon one picks every action equally often."""
        rng = np.random.default_rng(0)
        counts = np.zeros(4)
        for _ in range(4000):
            counts[epsilon_greedy(np.array([0.0, 1.0, 0.0, 0.0]), 1.0, rng)] += 1
        _, p_value = chisquare(counts)
        self.assertGreater(p_value, 0.001)

    def test_invalid_epsilon(self):
        """Test that epsilon must be a probability."""
        with self.assertRaises(ValueError):
            epsilon_greedy(np.zeros(2), 1.5, np.random.default_rng(0))


class TestRanking(unittest.TestCase):
    """Test ranking agents."""

    def test_order(self):
        """Test that earlier solvers come first, then higher trailing returns."""
        results = [
            _result(0, [1.0, 2.0]),
            _result(1, [5.0, 6.0], episodes_to_solve=40),
            _result(2, [9.0, 9.0]),
            _result(3, [3.0, 3.0], episodes_to_solve=12),
        ]
        self.assertEqual([3, 1, 2, 0], [r.agent for r in rank_agents(results, 4)])
        self.assertEqual([3, 1], [r.agent for r in rank_agents(results, 2)])

    def test_stable_ties(self):
        """Test that full ties keep the input order."""
        results = [_result(i, [1.0, 1.0]) for i in range(3)]
        self.assertEqual([0, 1, 2], [r.agent for r in rank_agents(results, 3)])

    def test_too_many(self):
        """Test that K can not exceed the number of agents."""
        with self.assertRaises(ValueError):
            rank_agents([_result(0, [1.0])], 2)

    def test_final_return(self):
        """Test the trailing mean used for ranking."""
        self.assertEqual(5.0, _result(0, [100.0, 4.0, 6.0]).final_return)


class TestTraining(unittest.TestCase):
    """Test the training loop on a tiny budget."""

    @classmethod
    def setUpClass(cls):
        """Train one agent that can not solve the lake."""
        cls.cfg = tiny_train_config(r_max=2.0)
        cls.result = train_agent(cls.cfg, np.random.default_rng(cls.cfg.seed))

    def test_records(self):
        """Test that every episode is recorded once, in order, with its phase."""
        records = self.result.records
        self.assertEqual(list(range(1, 6)), [r.episode for r in records])
        self.assertEqual(['search'] * 3 + ['tune'] * 2, [r.phase for r in records])
        self.assertIsNone(self.result.episodes_to_solve)
        for record in records:
            self.assertIn(record.return_, (0.0, 1.0))

    def test_epsilon_decay(self):
        """Test that epsilon decays once per episode."""
        np.testing.assert_allclose([0.99 ** i for i in range(5)], [r.epsilon for r in self.result.records])

    def test_alpha_trace(self):
        """Test the snapshots at the start, at the prune and at the end of the search."""
        self.assertEqual([0, 2, 3], [episode for episode, _ in self.result.alpha_trace])
        for _, probs in self.result.alpha_trace:
            np.testing.assert_allclose(np.ones(2), probs.sum(axis=1))
        np.testing.assert_allclose(np.full((2, 8), 1 / 8), self.result.alpha_trace[0][1])

    def test_pruned_and_fixed(self):
        """Test that one prune happened and the tuned architecture is the argmax."""
        sc = self.result.supercircuit
        self.assertEqual([7, 7], sc.active_mask.sum(axis=1).tolist())
        self.assertEqual(argmax_architecture(sc), self.result.architecture)
        np.testing.assert_array_equal(self.result.network.theta, sc.theta)

    def test_output_weights_nonnegative(self):
        """Test that output weights are kept at or above zero."""
        self.assertTrue(np.all(self.result.network.head.w_out >= 0))
        self.assertGreater(self.result.gradient_steps, 0)

    def test_alpha_frozen_while_tuning(self):
        """Test that the distribution after the search is left untouched by every tuning episode."""
        switch, probs = self.result.alpha_trace[-1]
        self.assertEqual(self.cfg.search_episodes, switch)
        tune_losses = [r.loss for r in self.result.records if r.phase == 'tune']
        self.assertFalse(np.isnan(tune_losses).any())
        np.testing.assert_array_equal(probs, placeholder_probs(self.result.supercircuit))

        shorter = train_agent(
            tiny_train_config(r_max=2.0, tune_episodes=1), np.random.default_rng(self.cfg.seed),
        )
        np.testing.assert_array_equal(shorter.supercircuit.alpha, self.result.supercircuit.alpha)
        np.testing.assert_array_equal(shorter.supercircuit.active_mask, self.result.supercircuit.active_mask)

    def test_no_update_before_warmup(self):
        """Test that nothing is learned while the replay memory holds less than a minibatch."""
        cfg = tiny_train_config(r_max=2.0, batch_size=1000, search_episodes=2, tune_episodes=1)
        sc = make_supercircuit(build_pool('op4'), p=2, B=1)
        result = train_agent(cfg, np.random.default_rng(0), sc=sc)
        self.assertEqual(0, result.gradient_steps)
        self.assertTrue(np.isnan(result.losses).all())
        np.testing.assert_array_equal(sc.theta, result.supercircuit.theta)
        np.testing.assert_array_equal(sc.alpha, result.supercircuit.alpha)
        np.testing.assert_array_equal(np.ones((1, 4)), result.network.spec.w_in)
        np.testing.assert_array_equal(np.ones(4), result.network.head.w_out)

    def test_reproducible(self):
        """Test that the same seed reproduces the same trace."""
        again = train_agent(self.cfg, np.random.default_rng(self.cfg.seed))
        self.assertEqual(self.result.returns, again.returns)
        np.testing.assert_array_equal(self.result.losses, again.losses)
        np.testing.assert_array_equal(self.result.supercircuit.alpha, again.supercircuit.alpha)

    def test_early_stop(self):
        """Test that reaching the threshold over the window stops training."""
        cfg = tiny_train_config(r_max=0.0, window=1)
        result = train_agent(cfg, np.random.default_rng(0))
        self.assertEqual(1, result.episodes_to_solve)
        self.assertEqual(1, len(result.records))
        self.assertEqual([0, 1], [episode for episode, _ in result.alpha_trace])

    def test_fixed_architecture(self):
        """Test that a given architecture is tuned without touching the distribution."""
        cfg = tiny_train_config(r_max=2.0, search_episodes=0, tune_episodes=2)
        sc = make_supercircuit(build_pool('op4'), p=2, B=1)
        arch = ArchitectureSample((0, 2))
        result = train_agent(cfg, np.random.default_rng(0), sc=sc, arch=arch)
        self.assertEqual(arch, result.architecture)
        self.assertEqual(['tune', 'tune'], [r.phase for r in result.records])
        np.testing.assert_array_equal(sc.alpha, result.supercircuit.alpha)
        self.assertEqual(1, len(result.alpha_trace))

    def test_retrain(self):
        """Test that retraining starts from fresh angles and keeps the architecture."""
        cfg = tiny_train_config(r_max=2.0, tune_episodes=1)
        result = retrain(cfg, self.result.supercircuit, self.result.architecture, np.random.default_rng(1))
        self.assertEqual(self.result.architecture, result.architecture)
        self.assertEqual(['tune'], [r.phase for r in result.records])


class TestEvaluation(unittest.TestCase):
    """Test greedy evaluation."""

    def setUp(self):
        """Build an untrained frozen lake policy."""
        self.sc = make_supercircuit(build_pool('op4'), p=2, B=1)
        self.net = make_network(self.sc, 'frozenlake')

    def test_returns(self):
        """Test that every episode yields a lake return."""
        report = evaluate(self.sc, FIRST_ARCH, self.net, 3, rng=np.random.default_rng(0))
        self.assertEqual(3, len(report.returns))
        self.assertFalse(report.noisy)
        for value in report.returns:
            self.assertIn(value, (0.0, 1.0))

    def test_solving_policy(self):
        """Test that a policy walking the safe path scores a mean return of one."""
        sc, arch, net = frozenlake_solving_policy()
        rng = np.random.default_rng(0)
        state = reset('frozenlake', rng)
        for expected in FROZENLAKE_SOLUTION:
            action = int(np.argmax(q_values(sc, arch, net.theta, net.spec, net.head, state)))
            self.assertEqual(expected, action, msg=f'cell {state.cell}')
            state, _, _ = step(state, action, rng)

        report = evaluate(sc, arch, net, 5, rng=rng)
        self.assertEqual([1.0] * 5, report.returns)
        self.assertEqual(1.0, report.mean_return)

    def test_zero_noise_matches(self):
        """Test that zero-rate noise gives the same returns as no noise."""
        plain = evaluate(self.sc, FIRST_ARCH, self.net, 2, rng=np.random.default_rng(0))
        noisy = evaluate(self.sc, FIRST_ARCH, self.net, 2, noise=NoiseSpec(0.0, 0.0, 5), rng=np.random.default_rng(0))
        self.assertTrue(noisy.noisy)
        self.assertEqual(plain.returns, noisy.returns)

    def test_noisy(self):
        """Test an evaluation under noise."""
        report = evaluate(self.sc, FIRST_ARCH, self.net, 1, noise=NoiseSpec(0.01, 0.05, 20),
                          rng=np.random.default_rng(0))
        self.assertEqual(1, len(report.returns))

    def test_cartpole_returns(self):
        """Test that cart-pole returns count the steps survived."""
        sc = make_supercircuit(build_pool('op4'), p=2, B=1)
        net = make_network(sc, 'cartpole')
        report = evaluate(sc, FIRST_ARCH, net, 2, rng=np.random.default_rng(0))
        for value in report.returns:
            self.assertGreaterEqual(value, 1.0)
            self.assertLessEqual(value, 200.0)

    def test_invalid(self):
        """Test that at least one episode is needed."""
        with self.assertRaises(ValueError):
            evaluate(self.sc, FIRST_ARCH, self.net, 0)

    def test_empty_report(self):
        """Test that an empty report averages to zero with a warning."""
        with self.assertLogs('dqas_rl.trainer', level='WARNING'):
            self.assertEqual(0.0, EvalReport().mean_return)

    def test_slippery(self):
        """Test evaluation on a slippery lake."""
        report = evaluate(self.sc, FIRST_ARCH, self.net, 2, rng=np.random.default_rng(0), slippery=True)
        self.assertEqual(2, len(report.returns))
