"""Convergence measurements and audits over solver reports
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .const import AUDIT_SLACK, DECAY_RATIO, NUMERICAL_FLOOR, SUPPORTED_AUDITS
from .core import SubproblemModel, eval_F
from .driver import IterationRecord, SolveReport, SolverConfig, objective_values
from .errors import InconsistentFStar, UsageError
from .inner import InnerResult
from .problems import ProblemInstance

PASS = 'pass'
FAIL = 'fail'
INSUFFICIENT_DATA = 'insufficient-data'

HYPOTHESIS_HOLDS = 'hypothesis-holds'
BIG_O_CONFIRMED = 'O(1/k)-confirmed'
LITTLE_O_CONFIRMED = 'o(1/k)-confirmed'
VIOLATED = 'violated'

# Fewest records the decade-window verdicts work with.
_MIN_WINDOW_RECORDS = 100


@dataclass
class AuditResult:
    """Outcome of one audit

    Attributes:
        name: Audit name
        passed: False when any checked item violated the audited inequality
        violations: Iteration indices that violated it
        checked: Number of items checked
        detail: Human-readable summary
        skipped: True when the audit could not run on this report
    """
    name: str
    passed: bool
    violations: List[int] = field(default_factory=list)
    checked: int = 0
    detail: str = ''
    skipped: bool = False

    def __repr__(self) -> str:
        return f'AuditResult({self.name}, passed={self.passed}, violations={len(self.violations)})'


@dataclass
class RateReport:
    q_ratios: List[float] = field(default_factory=list)
    tail_q_max: Optional[float] = None
    sublinear_scores: List[float] = field(default_factory=list)
    r_linear_scores: List[float] = field(default_factory=list)
    degenerate: bool = False


def _slack(F_k: float) -> float:
    return AUDIT_SLACK * (1.0 + abs(F_k))


def sufficient_decrease_constant(variant: str, gamma: float, eta: float) -> float:
    """c_1 = gamma*eta/(2(1+sqrt(1-eta))) for LS1, eta/(2(1+sqrt(1-eta))) otherwise"""
    base = eta / (2.0 * (1.0 + math.sqrt(1.0 - eta)))
    return gamma * base if variant == 'LS1' else base


def _gaps(values: Sequence[float], F_star: float) -> List[float]:
    gaps = []
    for k, value in enumerate(values):
        if value < F_star - 1e-12:
            raise InconsistentFStar(k, value, F_star)
        gaps.append(value - F_star)
    return gaps


def qlinear_ratio(report: SolveReport, F_star: float, burn_in: int = 0) -> RateReport:
    """Ratios (F_{k+1} - F*)/(F_k - F*) up to the numerical floor

    Raises:
        InconsistentFStar: If some F_k lies below F* by more than 1e-12
    """
    gaps = _gaps(objective_values(report.records, report.final_F), F_star)
    ratios = []
    for current, following in zip(gaps, gaps[1:]):
        if current <= NUMERICAL_FLOOR or following <= NUMERICAL_FLOOR:
            break
        ratios.append(following / current)
    tail = ratios[burn_in:]
    return RateReport(q_ratios=ratios,
                      tail_q_max=max(tail) if tail else None,
                      degenerate=any(r >= 1.0 for r in ratios))


def theorem_zeta(eta: float, mu: float, M: float) -> float:
    """Linear-rate constant: eta*mu/(4M) when mu <= 2M, else 1 - M/mu"""
    if eta <= 0 or mu <= 0 or M <= 0:
        raise UsageError('eta, mu and M must be positive')
    if mu <= 2.0 * M:
        return eta * mu / (4.0 * M)
    return 1.0 - M / mu


def sublinear_score(report: SolveReport, F_star: float) -> List[float]:
    """k * (F_k - F*) for every recorded k"""
    gaps = _gaps(objective_values(report.records, report.final_F), F_star)
    return [k * gap for k, gap in enumerate(gaps)]


def _window_mean(values: Sequence[float], start: float, stop: float) -> float:
    lo, hi = max(0, int(math.ceil(start))), min(len(values), int(math.ceil(stop)))
    if hi <= lo:
        return float('nan')
    return float(np.mean(values[lo:hi]))


def sublinear_verdict(scores: Sequence[float]) -> str:
    """o(1/k) verdict on k * (F_k - F*)

    Compares the mean over the last decade [K/10, K) with the mean over the
    decade centred on sqrt(K); passes when the ratio is below DECAY_RATIO.
    """
    K = len(scores)
    if K < _MIN_WINDOW_RECORDS:
        return INSUFFICIENT_DATA
    tail = _window_mean(scores, K / 10.0, K)
    mid = _window_mean(scores, math.sqrt(K / 10.0), math.sqrt(K * 10.0))
    if not mid > 0:
        return PASS if tail <= 0 else FAIL
    return PASS if tail < DECAY_RATIO * mid else FAIL


def rlinear_scores(report: SolveReport, x_star) -> List[float]:
    """||x_k - x*||^(1/k) for k >= 1; needs a report kept with iterates"""
    if report.iterates is None:
        raise UsageError('R-linear scores need a report with iterates')
    target = np.asarray(x_star, dtype=float)
    return [float(np.linalg.norm(x - target)) ** (1.0 / k)
            for k, x in enumerate(report.iterates) if k >= 1]


def theorem2_bound(report: SolveReport, F_star: float, M: float, R0: float,
                   gamma: float, eta: float, variant: str) -> List[float]:
    """(M R0^2 + F_0 - F*) / sum_{i<k} alpha_i gamma eta, gamma dropped for LS2-LS4

    Entry k bounds F_k - F*; entry 0 is +inf.
    """
    values = objective_values(report.records, report.final_F)
    if not values:
        return []
    numerator = M * R0 * R0 + (values[0] - F_star)
    weight = (gamma if variant == 'LS1' else 1.0) * eta
    partial = np.concatenate([[0.0], np.cumsum([r.alpha_k for r in report.records])])
    bounds = []
    for k in range(len(values)):
        denominator = partial[k] * weight
        bounds.append(numerator / denominator if denominator > 0 else math.inf)
    return bounds


def theorem2_audit(report: SolveReport, F_star: float, M: float, R0: float,
                   gamma: float, eta: float, variant: str) -> AuditResult:
    values = objective_values(report.records, report.final_F)
    bounds = theorem2_bound(report, F_star, M, R0, gamma, eta, variant)
    violations = [k for k, (value, bound) in enumerate(zip(values, bounds))
                  if value - F_star > bound + AUDIT_SLACK]
    return AuditResult(name='thm2_bound',
                       passed=not violations,
                       violations=violations,
                       checked=len(values),
                       detail=f'R0={R0:.6g}, M={M:.6g}')


def stepsize_floor(variant: str, beta: float, gamma: float, alpha_bar: float,
                   eta: float, m: float, L: float) -> float:
    """Liminf lower bound on alpha_k under a local gradient Lipschitz constant L"""
    if L <= 0:
        raise UsageError('stepsize floor needs L > 0')
    if variant == 'LS1':
        root = math.sqrt(1.0 - eta)
        floor = beta * (1.0 - gamma) * m * (eta + 1.0 + root) / (L * (1.0 + root))
    elif variant == 'LS2':
        floor = beta * gamma / L
    elif variant in ('LS3', 'LS4'):
        floor = beta * gamma * m / L
    else:
        raise UsageError(f'unknown line search {variant}')
    return min(1.0, floor, alpha_bar)


def stepsize_floor_audit(report: SolveReport, floor: float, burn_in: int) -> bool:
    """min_{k >= burn_in} alpha_k >= floor - 1e-12"""
    if not 0 <= burn_in < len(report.records):
        raise UsageError(f'burn_in must lie in [0, {len(report.records)})')
    return min(r.alpha_k for r in report.records[burn_in:]) >= floor - 1e-12


def direction_decay_audit(report: SolveReport) -> AuditResult:
    """Last-decade mean of ||d_k|| below DECAY_RATIO times the first-decade mean"""
    norms = [r.dir_norm for r in report.records]
    width = len(norms) // 10
    if width < 1:
        return AuditResult(name='direction_decay', passed=True, checked=len(norms),
                           detail=INSUFFICIENT_DATA)
    head = float(np.mean(norms[:width]))
    tail = float(np.mean(norms[-width:]))
    passed = tail < DECAY_RATIO * head if head > 0 else tail <= 0
    return AuditResult(name='direction_decay', passed=passed, checked=len(norms),
                       detail=f'head mean {head:.3e}, tail mean {tail:.3e}')


def _consecutive(records: Sequence[IterationRecord], final_F: Optional[float]):
    values = objective_values(records, final_F)
    for record, F_next in zip(records, values[1:]):
        yield record, F_next


def sufficient_decrease_audit(records: Sequence[IterationRecord], variant: str, gamma: float,
                              eta: float, final_F: Optional[float] = None) -> AuditResult:
    """F_{k+1} - F_k <= -alpha_k c_1 ||d_k||_k^2 on certified iterations"""
    c1 = sufficient_decrease_constant(variant, gamma, eta)
    violations, checked = [], 0
    for record, F_next in _consecutive(records, final_F):
        if not record.certified:
            continue
        checked += 1
        bound = -record.alpha_k * c1 * record.dir_norm_metric ** 2
        if F_next - record.F_k > bound + _slack(record.F_k):
            violations.append(record.k)
    return AuditResult(name='lemma3', passed=not violations, violations=violations,
                       checked=checked, detail=f'c1={c1:.6g}')


def fq_relation_audit(records: Sequence[IterationRecord], variant: str, gamma: float,
                      final_F: Optional[float] = None) -> AuditResult:
    """F_{k+1} - F_k <= gamma alpha_k Q_bar (LS1) or alpha_k Q_bar (LS2-LS4)"""
    weight = gamma if variant == 'LS1' else 1.0
    violations, checked = [], 0
    for record, F_next in _consecutive(records, final_F):
        if not record.certified:
            continue
        checked += 1
        if F_next - record.F_k > weight * record.alpha_k * record.Q_bar + _slack(record.F_k):
            violations.append(record.k)
    return AuditResult(name='lemma2', passed=not violations, violations=violations, checked=checked)


def inexact_decrease_audit(records: Sequence[IterationRecord], eta: float) -> AuditResult:
    """Q_bar <= -eta/(2(1+sqrt(1-eta))) ||d_k||_k^2 on certified iterations"""
    c = eta / (2.0 * (1.0 + math.sqrt(1.0 - eta)))
    violations, checked = [], 0
    for record in records:
        if not record.certified:
            continue
        checked += 1
        if record.Q_bar > -c * record.dir_norm_metric ** 2 + _slack(record.F_k):
            violations.append(record.k)
    return AuditResult(name='inexact_decrease', passed=not violations,
                       violations=violations, checked=checked)


def summability_audit(report: SolveReport, F_star: float, variant: str, gamma: float,
                      eta: float) -> AuditResult:
    """sum_k alpha_k c_1 ||d_k||_k^2 <= F_0 - F* + 1e-8"""
    c1 = sufficient_decrease_constant(variant, gamma, eta)
    values = objective_values(report.records, report.final_F)
    if not values:
        return AuditResult(name='summability', passed=True, detail=INSUFFICIENT_DATA)
    total = sum(r.alpha_k * c1 * r.dir_norm_metric ** 2 for r in report.records if r.certified)
    budget = values[0] - F_star + 1e-8
    return AuditResult(name='summability', passed=total <= budget, checked=len(report.records),
                       detail=f'sum {total:.6e} against {budget:.6e}')


def estimate_r0(records: Sequence[IterationRecord], final_distance: Optional[float] = None) -> float:
    """Largest recorded dist(x_k, X); every x_k lies in the initial sublevel set"""
    distances = [r.dist_to_X for r in records]
    if not distances or any(d is None for d in distances):
        raise UsageError('R0 estimate needs dist_to_X on every record')
    if final_distance is not None:
        distances.append(final_distance)
    return max(distances)


def _sample_points(instance: ProblemInstance, samples: int, seed: int,
                   radius: Optional[float], center) -> np.ndarray:
    n = instance.dimension
    x0 = np.asarray(instance.x0, dtype=float)
    if center is None:
        center = instance.known_projector(x0)
    center = np.asarray(center, dtype=float)
    if radius is None:
        radius = max(1.0, float(np.linalg.norm(x0 - instance.known_projector(x0))))
    if n == 1:
        return center + np.linspace(-radius, radius, samples)[:, np.newaxis]
    rng = np.random.default_rng(seed)
    return center + radius * rng.uniform(-1.0, 1.0, (samples, n))


def _require_ground_truth(instance: ProblemInstance) -> None:
    if instance.known_F_star is None or instance.known_projector is None:
        raise UsageError(f'{instance.name} lacks a known F* or projector')


def qg_estimate(instance: ProblemInstance, samples: int = 10000, seed: int = 0,
                radius: Optional[float] = None, center=None, level: Optional[float] = None) -> float:
    """min over samples of 2(F(x) - F*)/dist(x, X)^2

    One-dimensional instances are sampled on a uniform grid, others uniformly
    in a box of half-width `radius` around `center` (default P_X(x0)). By
    default this estimates the growth constant over the box. Pass `level`
    (for example F(x0)) to keep only samples in the sublevel set
    {F <= level}.

    Raises:
        UsageError: Missing F* or projector, or no usable sample
    """
    _require_ground_truth(instance)
    estimate = math.inf
    for x in _sample_points(instance, samples, seed, radius, center):
        distance = float(np.linalg.norm(x - instance.known_projector(x)))
        if distance < 1e-9:
            continue
        value = eval_F(instance.objective, x)
        if not np.isfinite(value) or (level is not None and value > level):
            continue
        estimate = min(estimate, 2.0 * (value - instance.known_F_star) / distance ** 2)
    if not np.isfinite(estimate):
        raise UsageError('no sample away from the solution set')
    return estimate


@dataclass(frozen=True)
class OsscWitness:
    x: np.ndarray
    lam: float
    excess: float


def ossc_violation_search(instance: ProblemInstance, mu: float, samples: int = 10000, seed: int = 0,
                          radius: Optional[float] = None, center=None,
                          lambdas: Optional[Iterable[float]] = None,
                          level: Optional[float] = None) -> Optional[OsscWitness]:
    """Sampled (x, lambda) violating the optimal-set strong convexity inequality

    F(lam x + (1-lam) P_X(x)) <= lam F(x) + (1-lam) F* - mu lam (1-lam)/2 dist(x, X)^2

    Samples are drawn as in qg_estimate; `level` restricts them to {F <= level}.
    """
    _require_ground_truth(instance)
    F_star = instance.known_F_star
    grid = np.linspace(0.05, 0.95, 19) if lambdas is None else np.asarray(list(lambdas), dtype=float)
    for x in _sample_points(instance, samples, seed, radius, center):
        projected = instance.known_projector(x)
        distance_sq = float(np.sum((x - projected) ** 2))
        value = eval_F(instance.objective, x)
        if distance_sq < 1e-18 or not np.isfinite(value) or (level is not None and value > level):
            continue
        for lam in grid:
            lhs = eval_F(instance.objective, lam * x + (1.0 - lam) * projected)
            rhs = lam * value + (1.0 - lam) * F_star - 0.5 * mu * lam * (1.0 - lam) * distance_sq
            if lhs > rhs + _slack(rhs):
                return OsscWitness(x=np.array(x), lam=float(lam), excess=lhs - rhs)
    return None


def recursion_rate_check(deltas, lambdas, As, c: float) -> str:
    """Classify delta_k against delta_{k+1} <= delta_k + c(-lam_k delta_k + A_k lam_k^2/2)

    Returns 'violated' when the recursion fails somewhere. Otherwise
    (k+1) delta_k is inspected: bounded gives O(1/k); when additionally
    A_k decays and the scaled sequence falls below DECAY_RATIO of its peak,
    the verdict is o(1/k).
    """
    delta = np.asarray(deltas, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    A = np.asarray(As, dtype=float)
    if not (delta.shape == lam.shape == A.shape) or delta.ndim != 1:
        raise UsageError('deltas, lambdas and As must have equal length')
    if not 0 < c <= 1:
        raise UsageError('c must lie in (0, 1]')
    if np.any(delta < 0) or np.any(A < 0) or np.any((lam < 0) | (lam > 1)):
        raise UsageError('sequences must be nonnegative with lambdas in [0, 1]')

    bound = delta[:-1] + c * (-lam[:-1] * delta[:-1] + 0.5 * A[:-1] * lam[:-1] ** 2)
    if np.any(delta[1:] > bound + 1e-12 * (1.0 + delta[:-1])):
        return VIOLATED
    K = len(delta)
    if K < 4:
        return HYPOTHESIS_HOLDS
    scaled = delta * np.arange(1, K + 1)
    half = K // 2
    if scaled[half:].max() > 2.0 * scaled[:half].max():
        return HYPOTHESIS_HOLDS
    width = max(1, K // 10)
    a_decays = A[-width:].mean() <= DECAY_RATIO * A[:width].mean() if A[:width].mean() > 0 else True
    if a_decays and scaled[-1] <= DECAY_RATIO * scaled.max():
        return LITTLE_O_CONFIRMED
    return BIG_O_CONFIRMED


class SubproblemAuditor:
    """Step observer checking inner solves against the subproblem oracle

    Every `every`-th outer iteration the oracle Q_k* is computed and the
    inner history is checked for the linear contraction
    Q_k(y_l) - Q_k* <= (1-sigma)^l (-Q_k*) for l <= max_depth, and certified
    candidates for Q_k(x_bar) <= eta Q_k*.
    """

    def __init__(self, config: SolverConfig, every: int = 1, max_depth: int = 50):
        self.inexactness = config.inexactness
        self.every = max(1, every)
        self.max_depth = max_depth
        self.contraction_violations: List[int] = []
        self.soundness_violations: List[int] = []
        self.checked = 0
        self.observed: List[Tuple[int, float, Optional[float]]] = []

    def __call__(self, model: SubproblemModel, inner: InnerResult, record: IterationRecord) -> None:
        if record.k % self.every:
            return
        from .oracle import subproblem_oracle
        q_star = subproblem_oracle(model).value
        self.checked += 1
        m, M = model.metric.m, model.metric.M
        sigma = self.inexactness.contraction(m, M)
        self.observed.append((record.k, sigma, inner.observed_contraction))
        if inner.certified:
            eta = self.inexactness.effective_eta(m, M)
            if inner.Q_value > eta * q_star + 1e-10:
                self.soundness_violations.append(record.k)
        if self.inexactness.mode == 'exact':
            return
        for depth, q in enumerate(inner.q_history[:self.max_depth + 1]):
            allowed = (1.0 - m / M) ** depth * (-q_star)
            if q - q_star > allowed * (1.0 + 1e-9) + 1e-12:
                self.contraction_violations.append(record.k)
                break

    def result(self) -> AuditResult:
        violations = sorted(set(self.contraction_violations) | set(self.soundness_violations))
        return AuditResult(name='a4',
                           passed=not violations,
                           violations=violations,
                           checked=self.checked,
                           detail=(f'{len(self.contraction_violations)} contraction, '
                                   f'{len(self.soundness_violations)} soundness violations'))


def inner_iterations_to_tolerance(report: SolveReport, F_star: float,
                                  epsilons: Sequence[float]) -> List[Optional[int]]:
    """Cumulative inner iterations spent before F_k - F* first drops to each epsilon"""
    gaps = _gaps(objective_values(report.records, report.final_F), F_star)
    spent = np.concatenate([[0], np.cumsum([r.inner_iters for r in report.records])])
    counts = []
    for eps in epsilons:
        hit = next((k for k, gap in enumerate(gaps) if gap <= eps), None)
        counts.append(None if hit is None else int(spent[hit]))
    return counts


def log_linear_fit(epsilons: Sequence[float], counts: Sequence[float]) -> Tuple[float, float, float]:
    """Least-squares fit counts ~ a log(1/eps) + b; returns (a, b, R^2)"""
    x = np.log(1.0 / np.asarray(epsilons, dtype=float))
    y = np.asarray(counts, dtype=float)
    if x.shape != y.shape or x.shape[0] < 2:
        raise UsageError('need at least two (epsilon, count) pairs of equal length')
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(residual ** 2)) / total if total > 0 else 1.0
    return float(slope), float(intercept), r2


def run_audits(report: SolveReport, config: SolverConfig, names: Iterable[str] = SUPPORTED_AUDITS,
               auditor: Optional[SubproblemAuditor] = None) -> List[AuditResult]:
    """Run the named audits on a report, skipping those without the data they need"""
    spec = config.linesearch
    policy = config.metric_policy
    problem = config.problem
    eta = config.effective_eta
    F_star = problem.known_F_star
    results = []
    for name in names:
        if name == 'lemma3':
            results.append(sufficient_decrease_audit(report.records, spec.variant, spec.gamma,
                                                     eta, report.final_F))
        elif name == 'lemma2':
            results.append(fq_relation_audit(report.records, spec.variant, spec.gamma,
                                             report.final_F))
        elif name == 'inexact_decrease':
            results.append(inexact_decrease_audit(report.records, eta))
        elif name == 'thm2_bound':
            if F_star is None or not report.records or report.records[0].dist_to_X is None:
                results.append(AuditResult(name=name, passed=True, skipped=True,
                                           detail='needs F* and a projector'))
                continue
            R0 = estimate_r0(report.records, problem.distance_to_solutions(report.final_point))
            results.append(theorem2_audit(report, F_star, policy.M, R0, spec.gamma, eta, spec.variant))
        elif name == 'floor':
            L = problem.known_local_L
            if not L or len(report.records) < 2:
                results.append(AuditResult(name=name, passed=True, skipped=True,
                                           detail='needs a local L and two records'))
                continue
            floor = stepsize_floor(spec.variant, spec.beta, spec.gamma, spec.alpha_bar, eta, policy.m, L)
            burn_in = len(report.records) // 2
            passed = stepsize_floor_audit(report, floor, burn_in)
            results.append(AuditResult(name=name, passed=passed,
                                       violations=[] if passed else [burn_in],
                                       checked=len(report.records) - burn_in,
                                       detail=f'floor {floor:.6g}'))
        elif name == 'a4':
            if auditor is None:
                results.append(AuditResult(name=name, passed=True, skipped=True,
                                           detail='needs an in-run subproblem auditor'))
            else:
                results.append(auditor.result())
        else:
            raise UsageError(f'unknown audit {name}')
    return results
