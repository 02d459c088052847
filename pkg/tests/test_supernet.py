# -*- coding: utf-8 -*-

"""Tests for operation pools, the architecture distribution and circuit realization."""

import json
import unittest

import numpy as np
from scipy.stats import chisquare

from dqas_rl.qsim import Gate, GateKind
from dqas_rl.supernet import (
    ArchitectureSample, PoolOperation, SuperCircuit, ThetaRef, architecture_from_json, architecture_prob,
    architecture_to_json, argmax_architecture, build_baseline, build_pool, expand_operation, get_pool,
    placeholder_probs, prune, realize_circuit, sample_architecture,
)
from tests.constants import SMALL_POOL, TINY_POOL, make_supercircuit


def _empty_encoding(sc: SuperCircuit) -> list:
    return [[] for _ in range(sc.B)]


class TestPools(unittest.TestCase):
    """Test the operation pools."""

    def test_op3(self):
        """Test the size and first entries of op3."""
        pool = build_pool('op3')
        self.assertEqual(15, pool.size)
        self.assertEqual(['ry_1234', 'rz_1234', 'cz_1234', 'cnot_1234', 'identity_1234'],
                         [op.name for op in pool.ops[:5]])
        self.assertEqual(4, pool.max_params)

    def test_op4(self):
        """Test the size and contents of op4."""
        pool = build_pool('op4')
        self.assertEqual(8, pool.size)
        self.assertEqual(
            ['ry_1234', 'rz_1234', 'cnot_1234', 'identity_1234', 'ry_123', 'rz_123', 'ry_234', 'rz_234'],
            [op.name for op in pool.ops],
        )

    def test_unknown_pool(self):
        """Test that an unknown pool name lists the valid ones."""
        with self.assertRaises(ValueError) as context:
            build_pool('op5')
        self.assertIn('op3', str(context.exception))
        self.assertIn('op4', str(context.exception))

    def test_baseline_pool_is_internal(self):
        """Test that the baseline pool is only reachable through get_pool."""
        with self.assertRaises(ValueError):
            build_pool('baseline')
        self.assertEqual(3, get_pool('baseline').size)

    def test_parameter_counts(self):
        """Test how many angles each kind of operation consumes."""
        self.assertEqual(3, PoolOperation(GateKind.RY, (1, 2, 3)).n_params)
        self.assertEqual(0, PoolOperation(GateKind.CNOT, (1, 2, 3, 4)).n_params)
        self.assertEqual(0, PoolOperation(GateKind.IDENTITY, (1, 2, 3, 4)).n_params)

    def test_invalid_operation(self):
        """Test that pool operations must use 1-based distinct labels and a pool gate."""
        with self.assertRaises(ValueError):
            PoolOperation(GateKind.RY, (0, 1))
        with self.assertRaises(ValueError):
            PoolOperation(GateKind.RY, (1, 1))
        with self.assertRaises(ValueError):
            PoolOperation(GateKind.RX, (1,))


class TestDistribution(unittest.TestCase):
    """Test the architecture distribution."""

    def test_create_shapes(self):
        """Test the initial parameter shapes and ranges."""
        sc = make_supercircuit(build_pool('op3'), p=4, B=5)
        self.assertEqual((4, 15), sc.alpha.shape)
        self.assertEqual((5, 4, 15, 4), sc.theta.shape)
        self.assertTrue(np.all(sc.theta >= -np.pi) and np.all(sc.theta < np.pi))
        np.testing.assert_allclose(np.full((4, 15), 1 / 15), placeholder_probs(sc))

    def test_wrong_shapes(self):
        """Test that inconsistent parameter shapes are rejected."""
        sc = make_supercircuit()
        with self.assertRaises(ValueError):
            sc.with_alpha(np.zeros((3, sc.s)))
        with self.assertRaises(ValueError):
            sc.with_theta(np.zeros((1, 1, 1, 1)))

    def test_probs_sum_to_one(self):
        """Test that every placeholder's probabilities sum to one after arbitrary updates."""
        sc = make_supercircuit().with_alpha(np.array([[3.0, -1.0, 0.5, 40.0], [0.0, 0.0, -600.0, 2.0]]))
        np.testing.assert_allclose(np.ones(2), placeholder_probs(sc).sum(axis=1))

    def test_shift_invariance(self):
        """Test that adding a constant to an alpha row changes nothing."""
        alpha = np.array([[0.3, -0.2, 1.0, 0.0], [0.1, 0.5, -1.0, 0.2]])
        sc = make_supercircuit().with_alpha(alpha)
        shifted = sc.with_alpha(alpha + np.array([[7.5], [-3.0]]))
        np.testing.assert_allclose(placeholder_probs(sc), placeholder_probs(shifted), atol=1e-12)
        self.assertEqual(argmax_architecture(sc), argmax_architecture(shifted))

    def test_architecture_prob(self):
        """Test that an architecture's probability is the product over placeholders."""
        sc = make_supercircuit().with_alpha(np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 2.0, 0.0, 0.0]]))
        probs = placeholder_probs(sc)
        self.assertAlmostEqual(probs[0, 0] * probs[1, 1], architecture_prob(sc, ArchitectureSample((0, 1))))

    def test_probs_over_all_architectures(self):
        """Test that the probabilities of every architecture sum to one."""
        sc = make_supercircuit().with_alpha(np.array([[0.3, -0.2, 1.0, 0.0], [0.1, 0.5, -1.0, 0.2]]))
        total = sum(
            architecture_prob(sc, ArchitectureSample((i, j)))
            for i in range(sc.s)
            for j in range(sc.s)
        )
        self.assertAlmostEqual(1.0, total, places=12)

    def test_sampling_frequencies(self):
        """Test that sampled choices follow the placeholder probabilities."""
        sc = make_supercircuit().with_alpha(np.array([[1.0, 0.0, -1.0, 0.5], [0.0, 0.0, 0.0, 0.0]]))
        rng = np.random.default_rng(3)
        counts = np.zeros(sc.s)
        size = 4000
        for _ in range(size):
            counts[sample_architecture(sc, rng).choices[0]] += 1
        _, p_value = chisquare(counts, placeholder_probs(sc)[0] * size)
        self.assertGreater(p_value, 0.001)

    def test_masked_choice_is_never_sampled(self):
        """Test that a pruned candidate has zero probability and is never drawn."""
        sc = prune(make_supercircuit().with_alpha(np.array([[0.0, 1.0, 2.0, 3.0], [3.0, 2.0, 1.0, 0.0]])), 1)
        self.assertEqual(0.0, placeholder_probs(sc)[0, 0])
        self.assertEqual(0.0, placeholder_probs(sc)[1, 3])
        rng = np.random.default_rng(0)
        for _ in range(200):
            choices = sample_architecture(sc, rng).choices
            self.assertNotEqual(0, choices[0])
            self.assertNotEqual(3, choices[1])
        with self.assertRaises(ValueError):
            architecture_prob(sc, ArchitectureSample((0, 0)))

    def test_prune_until_one(self):
        """Test that pruning never goes below the minimum and keeps the argmax."""
        sc = make_supercircuit().with_alpha(np.array([[0.2, 1.0, -0.4, 0.0], [0.0, 0.0, 0.0, 0.0]]))
        best = argmax_architecture(sc)
        for _ in range(10):
            sc = prune(sc, 1)
        self.assertEqual([1, 1], sc.active_mask.sum(axis=1).tolist())
        self.assertEqual(best, argmax_architecture(sc))
        self.assertEqual(ArchitectureSample((1, 0)), argmax_architecture(sc))

    def test_prune_respects_min_active(self):
        """Test that placeholders at the minimum are left alone."""
        sc = make_supercircuit()
        sc = prune(prune(sc, 3), 3)
        self.assertEqual([3, 3], sc.active_mask.sum(axis=1).tolist())
        with self.assertRaises(ValueError):
            prune(sc, 0)

    def test_argmax_ties(self):
        """Test that ties pick the lowest index."""
        self.assertEqual(ArchitectureSample((0, 0)), argmax_architecture(make_supercircuit()))


class TestRealization(unittest.TestCase):
    """Test turning architectures into circuits."""

    def test_ring_on_full_range(self):
        """Test that a full-range entangler closes into a ring."""
        gates = expand_operation(PoolOperation(GateKind.CNOT, (1, 2, 3, 4)), [], 4)
        self.assertEqual([(0, 1), (1, 2), (2, 3), (3, 0)], [gate.qubits for gate in gates])

    def test_chain_on_partial_range(self):
        """Test that a partial-range entangler is an open chain."""
        gates = expand_operation(PoolOperation(GateKind.CZ, (2, 3, 4)), [], 4)
        self.assertEqual([(1, 2), (2, 3)], [gate.qubits for gate in gates])

    def test_rotation_angles(self):
        """Test that rotations read consecutive angles."""
        gates = expand_operation(PoolOperation(GateKind.RZ, (2, 3)), [0.5, -0.25, 9.0], 4)
        self.assertEqual([Gate(GateKind.RZ, (1,), 0.5), Gate(GateKind.RZ, (2,), -0.25)], gates)

    def test_identity_is_empty(self):
        """Test that an identity placeholder contributes no gates."""
        self.assertEqual([], expand_operation(PoolOperation(GateKind.IDENTITY, (1, 2, 3, 4)), [], 4))

    def test_realize_layout(self):
        """Test the gate count and angle sources of a realized circuit."""
        sc = make_supercircuit(B=3)
        encoding = [[Gate(GateKind.RX, (0,), 0.1 * b)] for b in range(sc.B)]
        gates = realize_circuit(sc, ArchitectureSample((0, 3)), encoding)
        # per block: 1 encoding gate, 4 ry and 2 rz
        self.assertEqual(3 * 7, len(gates))
        sources = [gate.source for gate in gates if isinstance(gate.source, ThetaRef)]
        self.assertEqual(ThetaRef(2, 1, 3, 1), sources[-1])
        self.assertEqual(sc.theta[2, 1, 3, 1], gates[-1].angle)

    def test_realize_shared_blocks(self):
        """Test that shared parameters read block 0 in every block."""
        sc = make_supercircuit(B=2, share_block_params=True)
        gates = realize_circuit(sc, ArchitectureSample((0, 1)), _empty_encoding(sc))
        self.assertEqual([gate.angle for gate in gates[:4]], [gate.angle for gate in gates[8:12]])
        self.assertTrue(all(gate.source.block == 0 for gate in gates if gate.source is not None))

    def test_realize_inactive_choice(self):
        """Test that realizing a pruned choice fails."""
        sc = prune(make_supercircuit().with_alpha(np.array([[0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 2.0, 3.0]])), 1)
        with self.assertRaises(ValueError):
            realize_circuit(sc, ArchitectureSample((0, 3)), _empty_encoding(sc))

    def test_realize_wrong_block_count(self):
        """Test that one encoding per block is required."""
        sc = make_supercircuit(B=2)
        with self.assertRaises(ValueError):
            realize_circuit(sc, ArchitectureSample((0, 0)), [[]])

    def test_baseline(self):
        """Test the fixed ry/rz/cz baseline."""
        sc, arch = build_baseline(np.random.default_rng(0), B=5)
        self.assertEqual(['ry_1234', 'rz_1234', 'cz_1234'], sc.describe(arch))
        gates = realize_circuit(sc, arch, _empty_encoding(sc))
        self.assertEqual(5 * 12, len(gates))


class TestSerialization(unittest.TestCase):
    """Test the architecture documents."""

    def test_round_trip(self):
        """Test that a document survives JSON text and rebuilds the same circuit."""
        sc = make_supercircuit(build_pool('op4'), p=4, B=2)
        arch = ArchitectureSample((0, 2, 5, 3))
        w_in = np.arange(8, dtype=float).reshape(2, 4) / 7
        text = json.dumps(architecture_to_json(sc, arch, env='cartpole', w_in=w_in, w_out=np.array([3.0, 4.5])))
        sc2, arch2, extras = architecture_from_json(json.loads(text))
        self.assertEqual(arch, arch2)
        np.testing.assert_array_equal(sc.theta, sc2.theta)
        np.testing.assert_array_equal(w_in, extras['w_in'])
        self.assertEqual('cartpole', extras['env'])
        self.assertEqual(
            realize_circuit(sc, arch, _empty_encoding(sc)),
            realize_circuit(sc2, arch2, _empty_encoding(sc2)),
        )

    def test_custom_pool_is_not_loadable(self):
        """Test that documents name pools that can be rebuilt."""
        sc = make_supercircuit(TINY_POOL, p=1, B=1)
        data = architecture_to_json(sc, ArchitectureSample((1,)))
        self.assertEqual('tiny', data['pool_name'])
        with self.assertRaises(ValueError):
            architecture_from_json(data)

    def test_small_pool_names(self):
        """Test describing an architecture."""
        sc = make_supercircuit(SMALL_POOL)
        self.assertEqual(['cnot_1234', 'rz_23'], sc.describe(ArchitectureSample((1, 3))))
