import os
import unittest

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from model.bridge import recover_flow
from model.errors import InfeasibleError, InvalidInputError
from model.models import DualState, MomentSpec
from model.moments import (
    dual_objective_and_gradient, half_bridge_moments, mean_bridge_dual_ascent, mean_bridge_root_iteration,
    mean_variance_bridge, moment_bridge_solution, positive_root, solve_moments, validate_moment_spec,
)
from model.oracle import brute_force_bridge, moment_constraints
from model.prior import boltzmann_prior, custom_markov_prior, joint_endpoint_law
from routes.loaders import load_graph

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')
X = np.arange(1, 10, dtype=float)


def figure5_prior():
    return boltzmann_prior(load_graph(os.path.join(DATA, 'figure5_graph.json')), 1.0, 4)


class TestMomentSpec(unittest.TestCase):
    def test_mean_inside_range(self):
        with self.assertRaises(InvalidInputError):
            validate_moment_spec(MomentSpec(m0_1=9.0), 9)
        with self.assertRaises(InvalidInputError):
            validate_moment_spec(MomentSpec(mN_1=0.5), 9)

    def test_order_two_needs_second_moment(self):
        with self.assertRaises(InvalidInputError):
            validate_moment_spec(MomentSpec(order=2, m0_1=3.0), 9)

    def test_second_moment_at_least_mean_squared(self):
        with self.assertRaises(InvalidInputError):
            validate_moment_spec(MomentSpec(order=2, m0_1=3.0, m0_2=8.0), 9)

    def test_second_moment_rejected_for_order_one(self):
        with self.assertRaises(InvalidInputError):
            validate_moment_spec(MomentSpec(m0_1=3.0, m0_2=10.0), 9)

    def test_needs_a_side(self):
        with self.assertRaises(InvalidInputError):
            validate_moment_spec(MomentSpec(), 9)

    def test_node_values_length(self):
        with self.assertRaises(InvalidInputError):
            validate_moment_spec(MomentSpec(m0_1=1.5, node_values=(1.0, 2.0)), 9)


class TestMeanBridge(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.prior = figure5_prior()
        cls.q0N, cls.dual = mean_bridge_dual_ascent(cls.prior, 1.5, 7.0)

    def test_targets_reached(self):
        self.assertAlmostEqual(X @ self.q0N.sum(axis=1), 1.5, delta=1e-8)
        self.assertAlmostEqual(X @ self.q0N.sum(axis=0), 7.0, delta=1e-8)
        self.assertAlmostEqual(self.q0N.sum(), 1.0, places=12)
        self.assertLess(self.dual.grad_norm, 1e-8)
        self.assertTrue(self.dual.converged)
        self.assertFalse(self.dual.capped)

    def test_stays_on_prior_support(self):
        self.assertTrue((self.q0N[joint_endpoint_law(self.prior) == 0] == 0).all())

    def test_root_iteration_agrees(self):
        q0N, dual = mean_bridge_root_iteration(self.prior, 1.5, 7.0)
        np.testing.assert_allclose(q0N, self.q0N, atol=1e-6)
        self.assertAlmostEqual(dual.lam, self.dual.lam, delta=1e-5)
        self.assertAlmostEqual(dual.mu, self.dual.mu, delta=1e-5)

    def test_gradient_ascent_agrees(self):
        q0N, _ = mean_bridge_dual_ascent(self.prior, 1.5, 7.0, tol=1e-7, method='gradient')
        np.testing.assert_allclose(q0N, self.q0N, atol=1e-5)

    def test_oracle_agrees(self):
        spec = MomentSpec(m0_1=1.5, mN_1=7.0)
        reference = brute_force_bridge(joint_endpoint_law(self.prior), moment_constraints(9, spec))
        np.testing.assert_allclose(self.q0N, reference, atol=1e-6)

    def test_gradient_matches_finite_differences(self):
        spec = MomentSpec(m0_1=1.5, mN_1=7.0)
        dual = DualState(lam=0.1, mu=-0.2)
        _, grad = dual_objective_and_gradient(self.prior, dual, spec)
        h = 1e-6
        numeric = []
        for name in ('lam', 'mu'):
            up = DualState(**{**vars(dual), name: getattr(dual, name) + h})
            down = DualState(**{**vars(dual), name: getattr(dual, name) - h})
            numeric.append((dual_objective_and_gradient(self.prior, up, spec)[0]
                            - dual_objective_and_gradient(self.prior, down, spec)[0]) / (2 * h))
        np.testing.assert_allclose(grad, numeric, rtol=1e-5)

    def test_optimum_maximizes_dual(self):
        spec = MomentSpec(m0_1=1.5, mN_1=7.0)
        best, grad = dual_objective_and_gradient(self.prior, self.dual, spec)
        self.assertLess(np.abs(grad).max(), 1e-8)
        for delta in (0.05, -0.05):
            moved = DualState(lam=self.dual.lam + delta, mu=self.dual.mu)
            self.assertLess(dual_objective_and_gradient(self.prior, moved, spec)[0], best)

    def test_log_ratio_is_affine_in_the_endpoints(self):
        joint = joint_endpoint_law(self.prior)
        rows, cols = np.nonzero(joint)
        design = np.column_stack([np.ones(rows.size), X[rows], X[cols]])
        log_ratio = np.log(self.q0N[rows, cols]) - np.log(joint[rows, cols])
        coef = np.linalg.lstsq(design, log_ratio, rcond=None)[0]
        self.assertLess(np.abs(design @ coef - log_ratio).max(), 1e-8)
        np.testing.assert_allclose(coef, [-1.0 - self.dual.theta, -self.dual.lam, -self.dual.mu], atol=1e-8)

    @given(st.tuples(*[st.floats(-1.0, 1.0)] * 4))
    def test_dual_is_concave_along_segments(self, ends):
        spec = MomentSpec(m0_1=1.5, mN_1=7.0)
        a = DualState(lam=ends[0], mu=ends[1])
        b = DualState(lam=ends[2], mu=ends[3])
        mid = DualState(lam=(a.lam + b.lam) / 2, mu=(a.mu + b.mu) / 2)

        def value(dual):
            return dual_objective_and_gradient(self.prior, dual, spec)[0]

        self.assertGreaterEqual(value(mid), (value(a) + value(b)) / 2 - 1e-9)

    def test_as_bridge_solution(self):
        spec = MomentSpec(m0_1=1.5, mN_1=7.0)
        sol = moment_bridge_solution(self.prior, self.q0N, self.dual, spec)
        np.testing.assert_allclose(sol.phihat0[:, None] * joint_endpoint_law(self.prior) / self.prior.p0[:, None]
                                   * sol.phiN[None, :], self.q0N, atol=1e-12)
        self.assertAlmostEqual(sol.phiN.max(), 1.0, places=12)
        flow = recover_flow(self.prior, sol)
        self.assertAlmostEqual(X @ flow.marginals[0], 1.5, delta=1e-8)
        self.assertAlmostEqual(X @ flow.marginals[-1], 7.0, delta=1e-8)


class TestOtherMomentBridges(unittest.TestCase):
    def setUp(self):
        self.prior = figure5_prior()
        joint = joint_endpoint_law(self.prior)
        self.q0, self.qN = joint.sum(axis=1), joint.sum(axis=0)

    def test_mean_and_second_moment(self):
        m0, mN = X @ self.q0 + 0.3, X @ self.qN - 0.3
        spec = MomentSpec(
            order=2,
            m0_1=m0, m0_2=(X ** 2) @ self.q0 + 0.6 * (X @ self.q0) + 0.09,
            mN_1=mN, mN_2=(X ** 2) @ self.qN - 0.6 * (X @ self.qN) + 0.09,
        )
        q0N, dual = mean_variance_bridge(self.prior, spec)
        self.assertAlmostEqual(X @ q0N.sum(axis=1), spec.m0_1, delta=1e-8)
        self.assertAlmostEqual((X ** 2) @ q0N.sum(axis=1), spec.m0_2, delta=1e-8)
        self.assertAlmostEqual(X @ q0N.sum(axis=0), spec.mN_1, delta=1e-8)
        self.assertAlmostEqual((X ** 2) @ q0N.sum(axis=0), spec.mN_2, delta=1e-8)
        reference = brute_force_bridge(joint_endpoint_law(self.prior), moment_constraints(9, spec))
        np.testing.assert_allclose(q0N, reference, atol=1e-6)

    def test_mean_variance_needs_order_two(self):
        with self.assertRaises(InvalidInputError):
            mean_variance_bridge(self.prior, MomentSpec(m0_1=2.0, mN_1=7.0))

    def test_final_half_bridge(self):
        spec = MomentSpec(mN_1=6.0)
        q0N, dual = half_bridge_moments(self.prior, 'final', spec)
        self.assertAlmostEqual(X @ q0N.sum(axis=0), 6.0, delta=1e-8)
        self.assertEqual(dual.lam, 0.0)
        self.assertNotEqual(dual.mu, 0.0)

    def test_half_bridge_side_checked(self):
        with self.assertRaises(InvalidInputError):
            half_bridge_moments(self.prior, 'initial', MomentSpec(mN_1=6.0))

    def test_dispatch(self):
        q0N, _ = solve_moments(self.prior, MomentSpec(m0_1=3.0))
        self.assertAlmostEqual(X @ q0N.sum(axis=1), 3.0, delta=1e-8)

    def test_custom_node_values(self):
        values = tuple(range(9))
        q0N, _ = solve_moments(self.prior, MomentSpec(m0_1=2.0, mN_1=5.0, node_values=values))
        self.assertAlmostEqual(np.arange(9) @ q0N.sum(axis=1), 2.0, delta=1e-8)

    def test_zero_variance_concentrates_on_a_node(self):
        spec = MomentSpec(order=2, m0_1=3.0, m0_2=9.0)
        q0N, dual = solve_moments(self.prior, spec)
        self.assertGreater(q0N.sum(axis=1)[2], 1.0 - 1e-6)
        self.assertFalse(dual.capped)

    def test_prior_means_need_no_tilt(self):
        q0N, dual = mean_bridge_root_iteration(self.prior, X @ self.q0, X @ self.qN)
        self.assertLess(abs(dual.lam), 1e-12)
        self.assertLess(abs(dual.mu), 1e-12)
        self.assertEqual(dual.iterations, 1)
        np.testing.assert_allclose(q0N, joint_endpoint_law(self.prior), atol=1e-12)

    def test_multiplier_cap(self):
        with self.assertLogs('model.moments', level='WARNING'):
            _, dual = mean_bridge_dual_ascent(self.prior, 1.5, 7.0, cap=1e-3)
        self.assertTrue(dual.capped)
        self.assertFalse(dual.converged)
        self.assertLessEqual(max(abs(dual.lam), abs(dual.mu)), 1e-3 + 1e-15)

    def test_unreachable_targets(self):
        g3 = load_graph(os.path.join(DATA, 'figure3_graph.json'))
        prior = boltzmann_prior(g3, 1.0, 4)
        # nothing below node 4 can be reached in four steps
        with self.assertRaises(InfeasibleError):
            solve_moments(prior, MomentSpec(mN_1=2.5))


class TestThreeStateBridges(unittest.TestCase):
    def setUp(self):
        steps = np.array([
            [0.2, 0.5, 0.3],
            [0.4, 0.1, 0.5],
            [0.3, 0.3, 0.4],
        ])
        self.prior = custom_markov_prior([0.5, 0.3, 0.2], steps, N=1)
        self.joint = joint_endpoint_law(self.prior)

    def test_final_mean_half_bridge(self):
        spec = MomentSpec(mN_1=2.5)
        q0N, _ = half_bridge_moments(self.prior, 'final', spec)
        self.assertAlmostEqual(np.arange(1, 4) @ q0N.sum(axis=0), 2.5, delta=1e-8)
        reference = brute_force_bridge(self.joint, moment_constraints(3, spec))
        np.testing.assert_allclose(q0N, reference, atol=1e-7)

    def test_root_iteration(self):
        spec = MomentSpec(m0_1=1.8, mN_1=2.5)
        q0N, dual = mean_bridge_root_iteration(self.prior, 1.8, 2.5)
        self.assertTrue(dual.converged)
        reference = brute_force_bridge(self.joint, moment_constraints(3, spec))
        np.testing.assert_allclose(q0N, reference, atol=1e-7)
        ascent, _ = mean_bridge_dual_ascent(self.prior, 1.8, 2.5)
        np.testing.assert_allclose(q0N, ascent, atol=1e-7)


class TestPositiveRoot(unittest.TestCase):
    def test_simple_root(self):
        self.assertAlmostEqual(positive_root([1.0, 0.0, -4.0]), 2.0, places=12)

    def test_zero_coefficients_trimmed(self):
        self.assertAlmostEqual(positive_root([0.0, 0.0, 1.0, -2.0]), 2.0, places=12)
        self.assertAlmostEqual(positive_root([1.0, -1.0, 0.0]), 1.0, places=12)

    def test_needs_one_sign_change(self):
        with self.assertRaises(InvalidInputError):
            positive_root([1.0, -3.0, 2.0])
        with self.assertRaises(InvalidInputError):
            positive_root([1.0, 2.0, 3.0])
        with self.assertRaises(InvalidInputError):
            positive_root([5.0])

    @given(
        st.lists(st.floats(0.5, 2.0), min_size=1, max_size=3),
        st.lists(st.floats(0.5, 2.0), min_size=1, max_size=3),
    )
    def test_matches_companion_roots(self, high, low):
        coeffs = np.array(high + [-c for c in low])
        roots = np.roots(coeffs)
        real = roots[(np.abs(roots.imag) < 1e-9) & (roots.real > 0)].real
        self.assertEqual(real.size, 1)
        self.assertAlmostEqual(positive_root(coeffs), real[0], delta=1e-12 * max(1.0, real[0]))


if __name__ == '__main__':
    unittest.main()
