import unittest

import numpy as np

from model.bridge import imsbp_solve, kl_divergence, partial_marginal
from model.errors import InfeasibleError, InstanceTooLargeError, InvalidInputError
from model.models import MomentSpec
from model.oracle import (
    JointConstraint, brute_force_bridge, brute_force_paths, feasibility_residual, feasible_perturbations,
    marginal_constraints, moment_constraints,
)
from model.prior import custom_markov_prior, joint_endpoint_law


def small_prior():
    steps = np.array([
        [[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.1, 0.1, 0.8]],
        [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.3, 0.0, 0.7]],
    ])
    return custom_markov_prior([0.3, 0.3, 0.4], steps)


class TestConstraints(unittest.TestCase):
    def test_marginal_constraints(self):
        rho0 = partial_marginal(3, [0], [0.4])
        rhoN = partial_marginal(3, [1, 2], [0.2, 0.3])
        constraints = marginal_constraints(3, rho0, rhoN)
        self.assertEqual([c.label for c in constraints], ['initial[1]', 'final[2]', 'final[3]'])
        q = np.full((3, 3), 1 / 9)
        self.assertAlmostEqual(np.sum(constraints[0].coefficients * q), 1 / 3)

    def test_moment_constraints(self):
        constraints = moment_constraints(3, MomentSpec(order=2, m0_1=2.0, m0_2=4.5))
        self.assertEqual([c.label for c in constraints], ['initial mean', 'initial second moment'])
        np.testing.assert_array_equal(constraints[1].coefficients[:, 0], [1.0, 4.0, 9.0])

    def test_feasibility_residual(self):
        A = np.array([[1.0, 1.0], [1.0, 0.0]])
        self.assertAlmostEqual(feasibility_residual(A, [1.0, 0.4]), 0.0, places=9)
        self.assertAlmostEqual(feasibility_residual(A, [1.0, 1.5]), 0.5, places=9)


class TestBruteForceBridge(unittest.TestCase):
    def setUp(self):
        self.prior = small_prior()
        self.p0N = joint_endpoint_law(self.prior)

    def test_no_constraints_returns_prior(self):
        np.testing.assert_allclose(brute_force_bridge(self.p0N), self.p0N, atol=1e-15)

    def test_full_marginals_match_bridge(self):
        rho0 = partial_marginal(3, [0, 1, 2], [0.2, 0.5, 0.3])
        rhoN = partial_marginal(3, [0, 1, 2], [0.4, 0.4, 0.2])
        q = brute_force_bridge(self.p0N, marginal_constraints(3, rho0, rhoN))
        np.testing.assert_allclose(q.sum(axis=1), rho0.values, atol=1e-9)
        np.testing.assert_allclose(q.sum(axis=0), rhoN.values, atol=1e-9)
        np.testing.assert_allclose(q, imsbp_solve(self.prior, rho0, rhoN).q0N, atol=1e-7)

    def test_zero_target_removes_cells(self):
        C = np.zeros((3, 3))
        C[:, 0] = 1.0
        q = brute_force_bridge(self.p0N, [JointConstraint(C, 0.0, 'no final mass at 1')])
        np.testing.assert_array_equal(q[:, 0], 0.0)
        np.testing.assert_allclose(q[:, 1:], self.p0N[:, 1:] / self.p0N[:, 1:].sum(), atol=1e-12)

    def test_infeasible(self):
        p0N = np.diag([0.5, 0.5])
        row = np.array([[1.0, 1.0], [0.0, 0.0]])
        col = np.array([[0.0, 1.0], [0.0, 1.0]])
        with self.assertRaises(InfeasibleError) as ctx:
            brute_force_bridge(p0N, [JointConstraint(row, 0.5), JointConstraint(col, 0.8)])
        self.assertGreater(ctx.exception.residual, 0.0)

    def test_beats_sampled_feasible_points(self):
        rng = np.random.default_rng(7)
        p0N = rng.uniform(0.1, 1.0, (3, 3))
        p0N /= p0N.sum()
        constraints = marginal_constraints(3, partial_marginal(3, [0], [0.5]), partial_marginal(3, [2], [0.15]))
        q = brute_force_bridge(p0N, constraints)

        samples = feasible_perturbations(q, constraints, size=10_000, seed=3)
        self.assertEqual(len(samples), 10_000)
        best = kl_divergence(q, p0N)
        for sample in samples:
            self.assertLessEqual(best, kl_divergence(sample, p0N) + 1e-9)


    def test_too_large(self):
        with self.assertRaises(InstanceTooLargeError):
            brute_force_bridge(self.p0N, max_cells=4)

    def test_needs_probability_table(self):
        with self.assertRaises(InvalidInputError):
            brute_force_bridge(2 * self.p0N)


class TestFeasiblePerturbations(unittest.TestCase):
    def setUp(self):
        self.q = np.array([[0.2, 0.1, 0.1], [0.1, 0.2, 0.1], [0.05, 0.05, 0.1]])
        self.constraints = marginal_constraints(3, partial_marginal(3, [0, 1], [0.4, 0.4]), None)

    def test_samples_are_feasible(self):
        samples = feasible_perturbations(self.q, self.constraints, size=500)
        self.assertTrue((samples >= 0).all())
        np.testing.assert_allclose(samples.sum(axis=(1, 2)), 1.0, atol=1e-12)
        np.testing.assert_allclose(samples[:, 0].sum(axis=1), 0.4, atol=1e-12)
        np.testing.assert_allclose(samples[:, 1].sum(axis=1), 0.4, atol=1e-12)

    def test_samples_stay_on_support(self):
        q = self.q.copy()
        q[0, 2], q[0, 0] = 0.0, 0.3
        samples = feasible_perturbations(q, self.constraints, size=200)
        np.testing.assert_array_equal(samples[:, 0, 2], 0.0)

    def test_single_point(self):
        q = np.zeros((2, 2))
        q[0, 0] = 1.0
        self.assertEqual(len(feasible_perturbations(q)), 0)

    def test_reproducible(self):
        a = feasible_perturbations(self.q, self.constraints, size=10, seed=5)
        b = feasible_perturbations(self.q, self.constraints, size=10, seed=5)
        np.testing.assert_array_equal(a, b)


class TestBruteForcePaths(unittest.TestCase):
    def setUp(self):
        self.prior = small_prior()

    def test_table(self):
        table = brute_force_paths(self.prior)
        self.assertEqual(list(table.columns), ['x0', 'x1', 'x2', 'probability'])
        self.assertEqual(len(table), 27)
        self.assertAlmostEqual(table['probability'].sum(), 1.0, places=14)

    def test_conditioning(self):
        table = brute_force_paths(self.prior, conditioning=(0, 2))
        self.assertEqual(len(table), 3)
        self.assertAlmostEqual(table['probability'].sum(), 1.0, places=14)
        np.testing.assert_array_equal(table['x0'], 0)
        np.testing.assert_array_equal(table['x2'], 2)

    def test_impossible_conditioning(self):
        prior = custom_markov_prior([0.5, 0.5, 0.0], np.eye(3), N=2)
        with self.assertRaises(InvalidInputError):
            brute_force_paths(prior, conditioning=(0, 1))

    def test_cap(self):
        with self.assertRaises(InstanceTooLargeError):
            brute_force_paths(self.prior, max_paths=10)


if __name__ == '__main__':
    unittest.main()
