"""Tests for the inner prox-gradient solver and its certificates
"""
import unittest

import numpy as np

from isqa.core import Metric, ObjectiveSplit, eval_Q, make_subproblem
from isqa.errors import NumericalError, UsageError
from isqa.inner import (InexactnessPolicy, certificate_gap_bound, inner_solve, prox_grad_step,
                        subgrad_residual)
from isqa.oracle import subproblem_oracle
from isqa.problems import SmoothFunction, half_squared_norm, l1_norm, quadratic


def random_model(seed=0, dimension=6, dense=False):
    """Subproblem of a random quadratic plus l1 with an ill-conditioned metric"""
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((dimension, dimension)))
    P = (basis * rng.uniform(0.5, 3.0, dimension)) @ basis.T
    obj = ObjectiveSplit(quadratic(0.5 * (P + P.T), rng.standard_normal(dimension)), l1_norm(0.2),
                         dimension)
    if dense:
        metric = Metric.from_matrix(0.5 * (P + P.T), m=0.5, M=3.0)
    else:
        metric = Metric.from_diagonal(rng.uniform(0.5, 5.0, dimension), m=0.5, M=5.0)
    return make_subproblem(obj, metric, rng.standard_normal(dimension))


class InexactnessPolicyTests(unittest.TestCase):
    """Validation and derived constants
    """

    def test_eta_range(self):
        """eta outside (0, 1] is rejected"""
        for eta in (0.0, -0.5, 1.5):
            with self.assertRaises(UsageError):
                InexactnessPolicy(eta=eta)

    def test_certificate_needs_tolerance_at_one(self):
        """eta = 1 in certificate mode needs near_exact_tol"""
        with self.assertRaises(UsageError):
            InexactnessPolicy(eta=1.0)
        InexactnessPolicy(eta=1.0, near_exact_tol=1e-10)

    def test_fixed_count_needs_budget(self):
        """fixed-count mode needs n_inner"""
        with self.assertRaises(UsageError):
            InexactnessPolicy(mode='fixed-count')

    def test_effective_eta_fixed_count(self):
        """1 - (1 - m/M)^N"""
        policy = InexactnessPolicy(mode='fixed-count', n_inner=3)
        self.assertAlmostEqual(policy.effective_eta(1.0, 2.0), 1.0 - 0.5 ** 3)

    def test_certificate_cap(self):
        """10 * ceil(M/m * ln(1/(1 - eta)))"""
        policy = InexactnessPolicy(eta=0.9)
        self.assertEqual(policy.certificate_cap(1.0, 4.0), 10 * int(np.ceil(4.0 * np.log(10.0))))
        self.assertEqual(InexactnessPolicy(eta=0.9, max_iterations=7).certificate_cap(1.0, 4.0), 7)


class StepTests(unittest.TestCase):
    """Prox-gradient steps and residuals
    """

    def test_step_too_long(self):
        """tau > 1/M is a usage error"""
        model = random_model()
        with self.assertRaises(UsageError):
            prox_grad_step(model, model.anchor, 2.0 / model.metric.M)

    def test_step_decreases_q(self):
        """Q never increases along prox-gradient steps with tau = 1/M"""
        model = random_model(1)
        tau = 1.0 / model.metric.M
        y = np.array(model.anchor)
        previous = eval_Q(model, y)
        for _ in range(30):
            y = prox_grad_step(model, y, tau)
            current = eval_Q(model, y)
            self.assertLessEqual(current, previous + 1e-12)
            previous = current

    def test_certificate_bounds_gap(self):
        """||xi||^2/(2m) bounds Q(y) - Q* at every iterate"""
        model = random_model(2)
        q_star = subproblem_oracle(model).value
        tau = 1.0 / model.metric.M
        y = np.array(model.anchor)
        for _ in range(20):
            y_next = prox_grad_step(model, y, tau)
            xi = subgrad_residual(model, y, y_next, tau)
            y = y_next
            self.assertLessEqual(eval_Q(model, y) - q_star, certificate_gap_bound(model, y, xi) + 1e-12)


class InnerSolveTests(unittest.TestCase):
    """Certified eta-approximate solutions
    """

    def test_certified_is_eta_approximate(self):
        """Certificate-mode outputs satisfy Q(x_bar) <= eta Q*"""
        for seed in range(5):
            for eta in (0.5, 0.9, 0.99):
                model = random_model(seed, dense=seed % 2 == 1)
                result = inner_solve(model, InexactnessPolicy(eta=eta))
                q_star = subproblem_oracle(model).value
                self.assertTrue(result.certified)
                self.assertLessEqual(result.Q_value, eta * q_star + 1e-10, msg=f'seed={seed}, eta={eta}')
                self.assertLessEqual(result.Q_value, 0.0)

    def test_higher_eta_costs_more(self):
        """Tighter accuracy never needs fewer inner iterations"""
        model = random_model(3)
        loose = inner_solve(model, InexactnessPolicy(eta=0.5)).iterations_used
        tight = inner_solve(model, InexactnessPolicy(eta=0.999)).iterations_used
        self.assertLessEqual(loose, tight)

    def test_cap_returns_uncertified(self):
        """Reaching the cap flags the result uncertified"""
        model = random_model(4)
        result = inner_solve(model, InexactnessPolicy(eta=0.999999, max_iterations=1))
        self.assertEqual(result.iterations_used, 1)
        self.assertFalse(result.certified)
        self.assertLessEqual(result.Q_value, 0.0)

    def test_fixed_count(self):
        """fixed-count runs exactly n_inner steps and is certified at sigma = m/M"""
        model = random_model(5)
        result = inner_solve(model, InexactnessPolicy(mode='fixed-count', n_inner=4))
        self.assertEqual(result.iterations_used, 4)
        self.assertTrue(result.certified)
        eta = 1.0 - (1.0 - model.metric.m / model.metric.M) ** 4
        self.assertAlmostEqual(result.effective_eta, eta)
        self.assertLessEqual(result.Q_value, eta * subproblem_oracle(model).value + 1e-10)

    def test_fixed_count_optimistic_sigma(self):
        """A declared sigma above m/M is not certified"""
        model = random_model(5)
        result = inner_solve(model, InexactnessPolicy(mode='fixed-count', n_inner=2, sigma=0.99))
        self.assertFalse(result.certified)

    def test_exact_mode(self):
        """exact mode returns the oracle minimizer"""
        model = random_model(6)
        result = inner_solve(model, InexactnessPolicy(eta=1.0, mode='exact'))
        self.assertAlmostEqual(result.Q_value, subproblem_oracle(model).value, places=12)
        self.assertTrue(result.certified)

    def test_stationary_anchor(self):
        """At a minimizer of F the candidate is the anchor with Q = 0"""
        obj = ObjectiveSplit(half_squared_norm(), l1_norm(), 3)
        model = make_subproblem(obj, Metric.scaled_identity(1.0, 3), np.zeros(3))
        result = inner_solve(model, InexactnessPolicy(eta=0.9))
        np.testing.assert_array_equal(result.candidate, np.zeros(3))
        self.assertEqual(result.Q_value, 0.0)

    def test_non_finite_model(self):
        """Overflowing gradients raise with the Q history attached"""
        broken = SmoothFunction(value=lambda x: 0.0, gradient=lambda x: np.full_like(x, 1e308))
        obj = ObjectiveSplit(broken, l1_norm(0.0), 2)
        model = make_subproblem(obj, Metric.scaled_identity(1e-300, 2), np.zeros(2))
        with self.assertRaises(NumericalError) as context:
            inner_solve(model, InexactnessPolicy(eta=0.5, max_iterations=3))
        self.assertGreaterEqual(len(context.exception.dump), 1)


if __name__ == '__main__':
    unittest.main()
