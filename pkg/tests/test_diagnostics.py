"""Tests for rate measurements and convergence audits
"""
import math
import unittest
from dataclasses import replace
from functools import lru_cache

import numpy as np

from isqa.core import eval_F
from isqa.diagnostics import (BIG_O_CONFIRMED, FAIL, HYPOTHESIS_HOLDS, INSUFFICIENT_DATA,
                              LITTLE_O_CONFIRMED, PASS, VIOLATED, SubproblemAuditor,
                              direction_decay_audit, estimate_r0, fq_relation_audit,
                              inner_iterations_to_tolerance, log_linear_fit, ossc_violation_search,
                              qg_estimate, qlinear_ratio, recursion_rate_check, rlinear_scores,
                              run_audits, stepsize_floor, stepsize_floor_audit, sublinear_score,
                              sublinear_verdict, sufficient_decrease_audit,
                              sufficient_decrease_constant, summability_audit, theorem2_audit,
                              theorem2_bound, theorem_zeta)
from isqa.driver import IterationRecord, SolveReport, SolverConfig, sqa_run
from isqa.errors import InconsistentFStar, UsageError
from isqa.inner import InexactnessPolicy
from isqa.linesearch import LineSearchSpec
from isqa.metric_policy import MetricPolicy
from isqa.problems import catalog_instantiate


def record(k, F_k, alpha=1.0, dir_norm=1.0, Q_bar=-0.5, inner_iters=1, certified=True, dist=None):
    return IterationRecord(k=k, F_k=F_k, alpha_k=alpha, dir_norm=dir_norm, dir_norm_metric=dir_norm,
                           Q_bar=Q_bar, inner_iters=inner_iters, certified=certified, ls_trials=1,
                           dist_to_X=dist)


def synthetic_report(values, **fields):
    """Report whose F_0..F_K are `values`"""
    records = [record(k, value, **fields) for k, value in enumerate(values[:-1])]
    return SolveReport(final_point=np.zeros(1), final_F=values[-1], records=records,
                       termination_reason='max-outer', total_inner_iterations=len(records))


@lru_cache(maxsize=None)
def quadratic_run():
    instance = catalog_instantiate('sc-quadratic-l1', 5, 42)
    config = SolverConfig(problem=instance,
                          metric_policy=MetricPolicy(kind='clipped-diagonal', m=0.5, M=8.0),
                          inexactness=InexactnessPolicy(eta=0.9),
                          linesearch=LineSearchSpec(variant='LS3', gamma=0.5),
                          max_outer=300,
                          tol_direction=1e-7,
                          audits=('lemma3', 'lemma2', 'inexact_decrease', 'thm2_bound', 'floor', 'a4'))
    auditor = SubproblemAuditor(config)
    return config, sqa_run(config, observer=auditor), auditor


class ConstantTests(unittest.TestCase):
    """Closed-form constants
    """

    def test_sufficient_decrease_constant(self):
        """c_1 = eta/(2(1+sqrt(1-eta))), times gamma for LS1"""
        self.assertAlmostEqual(sufficient_decrease_constant('LS3', 0.5, 0.75), 0.25)
        self.assertAlmostEqual(sufficient_decrease_constant('LS1', 0.5, 0.75), 0.125)

    def test_zeta(self):
        """Both branches of the linear-rate constant"""
        self.assertAlmostEqual(theorem_zeta(1.0, 1.0, 1.0), 0.25)
        self.assertAlmostEqual(theorem_zeta(0.5, 1.0, 1.0), 0.125)
        self.assertAlmostEqual(theorem_zeta(1.0, 4.0, 1.0), 0.75)

    def test_zeta_bad_input(self):
        """Non-positive arguments are rejected"""
        with self.assertRaises(UsageError):
            theorem_zeta(0.0, 1.0, 1.0)

    def test_stepsize_floors(self):
        """Floors per variant on unit constants"""
        self.assertAlmostEqual(stepsize_floor('LS2', 0.5, 0.4, 1.0, 1.0, 1.0, 1.0), 0.2)
        self.assertAlmostEqual(stepsize_floor('LS3', 0.5, 0.5, 1.0, 1.0, 1.0, 1.0), 0.25)
        self.assertAlmostEqual(stepsize_floor('LS1', 0.5, 0.5, 1.0, 1.0, 1.0, 1.0), 0.5)
        self.assertAlmostEqual(stepsize_floor('LS3', 0.5, 0.5, 0.1, 1.0, 1.0, 1.0), 0.1)

    def test_stepsize_floor_needs_L(self):
        """L <= 0 is a usage error"""
        with self.assertRaises(UsageError):
            stepsize_floor('LS3', 0.5, 0.5, 1.0, 1.0, 1.0, 0.0)


class RateTests(unittest.TestCase):
    """Rate measurements on synthetic objective sequences
    """

    def test_qlinear_ratio(self):
        """Halving gaps give ratios of 0.5"""
        report = synthetic_report([2.0 ** -k for k in range(20)])
        rates = qlinear_ratio(report, 0.0, burn_in=5)
        self.assertEqual(len(rates.q_ratios), 19)
        self.assertAlmostEqual(rates.tail_q_max, 0.5)
        self.assertFalse(rates.degenerate)

    def test_qlinear_stops_at_floor(self):
        """Ratios stop once the gap reaches the numerical floor"""
        report = synthetic_report([1.0, 1e-3, 1e-15, 1e-16])
        self.assertEqual(len(qlinear_ratio(report, 0.0).q_ratios), 1)

    def test_inconsistent_f_star(self):
        """Values below F* raise with the offending index"""
        report = synthetic_report([1.0, 0.5, -0.1])
        with self.assertRaises(InconsistentFStar) as context:
            qlinear_ratio(report, 0.0)
        self.assertEqual(context.exception.k, 2)

    def test_sublinear_verdict(self):
        """1/k^2 gaps pass the o(1/k) verdict, 1/k gaps fail it"""
        K = 10000
        fast = synthetic_report([1.0] + [1.0 / k ** 2 for k in range(1, K)])
        slow = synthetic_report([1.0] + [1.0 / k for k in range(1, K)])
        self.assertEqual(sublinear_verdict(sublinear_score(fast, 0.0)), PASS)
        self.assertEqual(sublinear_verdict(sublinear_score(slow, 0.0)), FAIL)

    def test_sublinear_short(self):
        """Fewer than 100 scores are insufficient"""
        self.assertEqual(sublinear_verdict([1.0] * 50), INSUFFICIENT_DATA)

    def test_rlinear_needs_iterates(self):
        """R-linear scores need stored iterates"""
        with self.assertRaises(UsageError):
            rlinear_scores(synthetic_report([1.0, 0.5]), [0.0])
        report = synthetic_report([1.0, 0.5, 0.25])
        report.iterates = [np.array([1.0]), np.array([0.5]), np.array([0.25])]
        np.testing.assert_allclose(rlinear_scores(report, [0.0]), [0.5, 0.5])

    def test_log_linear_fit(self):
        """Exact log-linear counts fit with R^2 = 1"""
        epsilons = [1e-2, 1e-4, 1e-6, 1e-8]
        counts = [3.0 * math.log(1.0 / eps) + 2.0 for eps in epsilons]
        slope, intercept, r2 = log_linear_fit(epsilons, counts)
        self.assertAlmostEqual(slope, 3.0)
        self.assertAlmostEqual(intercept, 2.0)
        self.assertAlmostEqual(r2, 1.0)

    def test_inner_iterations_to_tolerance(self):
        """Cumulative inner work before each gap threshold"""
        report = synthetic_report([1.0, 0.1, 0.01, 0.001], inner_iters=4)
        self.assertEqual(inner_iterations_to_tolerance(report, 0.0, [0.5, 0.01, 1e-9]), [4, 8, None])


class RecursionTests(unittest.TestCase):
    """Classification of delta sequences against the descent recursion
    """

    def test_big_o(self):
        """delta_k = 1/(k+1) with A_k = 2/(k+2) is O(1/k) but not o(1/k)"""
        K = 1000
        deltas = [1.0 / (k + 1) for k in range(K)]
        As = [2.0 / (k + 2) for k in range(K)]
        self.assertEqual(recursion_rate_check(deltas, [1.0] * K, As, 1.0), BIG_O_CONFIRMED)

    def test_little_o(self):
        """delta_k = 1/(k+1)^2 with decaying A_k is o(1/k)"""
        K = 1000
        deltas = [1.0 / (k + 1) ** 2 for k in range(K)]
        As = [1.0 / (k + 1) for k in range(K)]
        self.assertEqual(recursion_rate_check(deltas, [1.0] * K, As, 1.0), LITTLE_O_CONFIRMED)

    def test_violated(self):
        """An increase not covered by A_k violates the recursion"""
        self.assertEqual(recursion_rate_check([1.0, 2.0], [1.0, 1.0], [0.0, 0.0], 1.0), VIOLATED)

    def test_unbounded_scaled(self):
        """Constant delta with zero step weights gives an unbounded scaled sequence"""
        K = 100
        self.assertEqual(recursion_rate_check([1.0] * K, [0.0] * K, [0.0] * K, 1.0), HYPOTHESIS_HOLDS)

    def test_bad_input(self):
        """Lambdas outside [0, 1] are rejected"""
        with self.assertRaises(UsageError):
            recursion_rate_check([1.0, 0.5], [2.0, 1.0], [0.0, 0.0], 1.0)


class RecordAuditTests(unittest.TestCase):
    """Audits over iteration records
    """

    def test_sufficient_decrease(self):
        """Violations are reported by iteration, uncertified steps skipped"""
        records = [record(0, 1.0), record(1, 0.5), record(2, 0.45, certified=False)]
        result = sufficient_decrease_audit(records, 'LS3', 0.5, 1.0, final_F=0.5)
        self.assertFalse(result.passed)
        self.assertEqual(result.violations, [1])
        self.assertEqual(result.checked, 2)

    def test_fq_relation(self):
        """F_{k+1} - F_k <= alpha Q_bar"""
        records = [record(0, 1.0, Q_bar=-0.5), record(1, 0.5, Q_bar=-0.1)]
        self.assertTrue(fq_relation_audit(records, 'LS3', 0.5, final_F=0.4).passed)
        self.assertFalse(fq_relation_audit(records, 'LS3', 0.5, final_F=0.45).passed)

    def test_theorem2_bound(self):
        """(M R0^2 + gap_0) / sum alpha"""
        report = synthetic_report([1.0, 0.5, 0.2])
        bounds = theorem2_bound(report, 0.0, 1.0, 1.0, 0.5, 1.0, 'LS3')
        self.assertEqual(bounds[0], math.inf)
        self.assertAlmostEqual(bounds[1], 2.0)
        self.assertAlmostEqual(bounds[2], 1.0)
        self.assertTrue(theorem2_audit(report, 0.0, 1.0, 1.0, 0.5, 1.0, 'LS3').passed)
        stalled = synthetic_report([1.0, 0.5, 0.9])
        result = theorem2_audit(stalled, 0.0, 0.0, 0.1, 0.5, 1.0, 'LS3')
        self.assertFalse(result.passed)
        self.assertEqual(result.violations, [2])

    def test_stepsize_floor_audit(self):
        """Minimum accepted stepsize after burn-in"""
        report = synthetic_report([1.0, 0.5, 0.2, 0.1], alpha=0.25)
        self.assertTrue(stepsize_floor_audit(report, 0.25, 1))
        self.assertFalse(stepsize_floor_audit(report, 0.3, 1))
        with self.assertRaises(UsageError):
            stepsize_floor_audit(report, 0.25, 3)

    def test_direction_decay(self):
        """Decaying directions pass, stalled ones fail"""
        decaying = synthetic_report([1.0] * 101)
        decaying.records = [record(k, 1.0, dir_norm=0.9 ** k) for k in range(100)]
        self.assertTrue(direction_decay_audit(decaying).passed)
        stalled = synthetic_report([1.0] * 101)
        self.assertFalse(direction_decay_audit(stalled).passed)

    def test_estimate_r0(self):
        """R0 is the largest recorded distance"""
        records = [record(0, 1.0, dist=2.0), record(1, 0.5, dist=1.0)]
        self.assertEqual(estimate_r0(records, 0.5), 2.0)
        with self.assertRaises(UsageError):
            estimate_r0([record(0, 1.0)])


class GrowthTests(unittest.TestCase):
    """Quadratic growth and optimal-set strong convexity sampling
    """

    def test_qg_constant(self):
        """The |u| / u^2 instance has quadratic growth constant 2"""
        instance = catalog_instantiate('qg-not-ossc', 1, 0)
        self.assertAlmostEqual(qg_estimate(instance, samples=2001), 2.0, places=9)

    def test_ossc_witness(self):
        """The same instance violates the strong convexity inequality with mu = 2"""
        instance = catalog_instantiate('qg-not-ossc', 1, 0)
        witness = ossc_violation_search(instance, 2.0, samples=2001)
        self.assertIsNotNone(witness)
        self.assertGreater(witness.excess, 0.0)

    def test_ossc_holds_when_strongly_convex(self):
        """No witness on a strongly convex instance at its modulus"""
        config, _, _ = quadratic_run()
        instance = config.problem
        self.assertIsNone(ossc_violation_search(instance, instance.known_qg_mu, samples=300, seed=1))

    def test_ossc_holds_at_zero_modulus(self):
        """With mu = 0 the inequality is plain convexity and has no witness"""
        instance = catalog_instantiate('qg-not-ossc', 1, 0)
        self.assertIsNone(ossc_violation_search(instance, 0.0, samples=2001))

    def test_qg_matches_strong_convexity_modulus(self):
        """Far from the minimizer the growth ratio approaches the Hessian eigenvalue"""
        instance = catalog_instantiate('sc-quadratic-l1', 1, 3)
        estimate = qg_estimate(instance, samples=2001, radius=1e4)
        self.assertAlmostEqual(estimate, instance.known_qg_mu, delta=0.05 * instance.known_qg_mu)

    def test_qg_vanishes_near_flat_minimizer(self):
        """The quartic has no growth constant: estimates shrink with the radius"""
        instance = catalog_instantiate('quartic', 1, 0)
        estimates = [qg_estimate(instance, samples=2001, radius=radius) for radius in (1.0, 0.1, 0.01)]
        self.assertGreater(estimates[0], estimates[1])
        self.assertGreater(estimates[1], estimates[2])
        self.assertLess(estimates[2], 1e-3)

    def test_qg_restricted_to_sublevel_set(self):
        """Inside {F <= 1/2} the |u| piece gives 2/|u| >= 4 instead of 2"""
        instance = replace(catalog_instantiate('qg-not-ossc', 1, 0), x0=np.array([0.5]))
        level = eval_F(instance.objective, instance.x0)
        self.assertAlmostEqual(qg_estimate(instance, samples=2001), 2.0, places=9)
        self.assertAlmostEqual(qg_estimate(instance, samples=2001, level=level), 4.0, delta=0.01)

    def test_qg_empty_sublevel_set(self):
        """A level below F* leaves no usable sample"""
        instance = catalog_instantiate('qg-not-ossc', 1, 0)
        with self.assertRaises(UsageError):
            qg_estimate(instance, samples=101, level=-1.0)


class SolverAuditTests(unittest.TestCase):
    """Audits on a real solver run
    """

    def test_all_audits_pass(self):
        """Every audit passes on a certified run"""
        config, report, auditor = quadratic_run()
        results = run_audits(report, config, config.audits, auditor)
        self.assertEqual([r.name for r in results], list(config.audits))
        for result in results:
            self.assertFalse(result.skipped, msg=result.name)
            self.assertTrue(result.passed, msg=repr(result))

    def test_summability(self):
        """Weighted squared directions sum below the initial gap"""
        config, report, _ = quadratic_run()
        result = summability_audit(report, config.problem.known_F_star, 'LS3', 0.5, config.effective_eta)
        self.assertTrue(result.passed, msg=result.detail)

    def test_a4_skipped_without_auditor(self):
        """a4 needs the in-run observer"""
        config, report, _ = quadratic_run()
        result = run_audits(report, config, ['a4'])[0]
        self.assertTrue(result.skipped)

    def test_inexact_decrease_through_run_audits(self):
        """Certified steps meet the eta-scaled model decrease; a step without it is flagged"""
        config, report, _ = quadratic_run()
        result = run_audits(report, config, ['inexact_decrease'])[0]
        self.assertEqual(result.name, 'inexact_decrease')
        self.assertTrue(result.passed, msg=repr(result))
        self.assertGreater(result.checked, 0)
        index, target = next((i, r) for i, r in enumerate(report.records) if r.certified)
        self.assertGreater(target.dir_norm_metric, 0.0)
        records = list(report.records)
        records[index] = replace(target, Q_bar=0.0)
        result = run_audits(replace(report, records=records), config, ['inexact_decrease'])[0]
        self.assertFalse(result.passed)
        self.assertEqual(result.violations, [target.k])

    def test_direction_decay_on_run(self):
        """Directions shrink by more than a decade over a linearly convergent run"""
        _, report, _ = quadratic_run()
        result = direction_decay_audit(report)
        self.assertNotEqual(result.detail, INSUFFICIENT_DATA)
        self.assertTrue(result.passed, msg=result.detail)


class FixedCountTests(unittest.TestCase):
    """Fixed inner budget on the quartic, audited with the implied eta
    """

    def test_quartic_fixed_count(self):
        """Five inner steps per outer step, certified by contraction, sublinear rate holds"""
        instance = catalog_instantiate('quartic', 3, 0)
        config = SolverConfig(problem=instance,
                              metric_policy=MetricPolicy(kind='clipped-diagonal', m=0.5, M=2.0),
                              inexactness=InexactnessPolicy(mode='fixed-count', n_inner=5),
                              linesearch=LineSearchSpec(variant='LS3', gamma=0.5),
                              max_outer=3000,
                              tol_direction=0.0)
        report = sqa_run(config)
        self.assertEqual(len(report.records), 3000)
        self.assertEqual(report.total_inner_iterations, 5 * len(report.records))
        self.assertTrue(all(r.certified for r in report.records))
        self.assertAlmostEqual(config.effective_eta, 1.0 - 0.75 ** 5)
        self.assertEqual(sublinear_verdict(sublinear_score(report, 0.0)), PASS)
        for result in run_audits(report, config, ['lemma3', 'lemma2', 'inexact_decrease', 'thm2_bound']):
            self.assertTrue(result.passed, msg=repr(result))


if __name__ == '__main__':
    unittest.main()
