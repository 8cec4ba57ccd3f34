"""Outer loop of the inexact successive quadratic approximation method
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .const import DIRECTION_TOLERANCE, ERROR, FGAP_TOLERANCE, MAX_OUTER, SUPPORTED_AUDITS
from .core import SubproblemModel, eval_F, make_subproblem, metric_norm_sq
from .errors import IsqaError, NumericalError, UsageError
from .inner import InexactnessPolicy, InnerResult, inner_solve
from .linesearch import LineSearchSpec, backtrack
from .metric_policy import MetricPolicy
from .problems import ProblemInstance


@dataclass(frozen=True)
class IterationRecord:
    """One outer iteration, describing x_k and the step taken from it"""
    k: int
    F_k: float
    alpha_k: float
    dir_norm: float
    dir_norm_metric: float
    Q_bar: float
    inner_iters: int
    certified: bool
    ls_trials: int
    dist_to_X: Optional[float] = None
    fgap: Optional[float] = None


@dataclass
class SolverConfig:
    """Everything one solver run depends on

    Attributes:
        problem: Catalog instance to solve
        metric_policy: Template policy, cloned per run
        inexactness: Inner solve accuracy
        linesearch: Backtracking parameters
        max_outer: Outer iteration budget
        tol_direction: Stop once ||d_k||_k falls to this value
        tol_fgap: Stop once F_k - F* falls to this value (needs a known F*)
        seed: Run seed, recorded for reproducibility
        name: Run label used for output files
        audits: Audit names enabled for this run
        keep_iterates: Keep every x_k on the report
    """
    problem: ProblemInstance
    metric_policy: MetricPolicy
    inexactness: InexactnessPolicy = field(default_factory=InexactnessPolicy)
    linesearch: LineSearchSpec = field(default_factory=LineSearchSpec)
    max_outer: int = 1000
    tol_direction: float = 1e-10
    tol_fgap: Optional[float] = None
    seed: int = 0
    name: str = 'run'
    audits: Tuple[str, ...] = ()
    keep_iterates: bool = False

    def __post_init__(self):
        self.linesearch.validate(self.metric_policy.m)
        if self.max_outer < 0:
            raise UsageError('max_outer must be >= 0')
        if self.tol_direction < 0:
            raise UsageError('tol_direction must be >= 0')
        if self.tol_fgap is not None and self.tol_fgap < 0:
            raise UsageError('tol_fgap must be >= 0')
        unknown = set(self.audits) - set(SUPPORTED_AUDITS)
        if unknown:
            raise UsageError(f'unknown audits {sorted(unknown)}, expected a subset of {list(SUPPORTED_AUDITS)}')
        if not self.problem.objective.regularizer.has_prox:
            raise UsageError(f'{self.problem.name} has no proximal map and cannot be solved')
        if not self.problem.objective.regularizer.in_domain(self.problem.x0):
            raise UsageError('x0 lies outside dom g')

    @property
    def effective_eta(self) -> float:
        return self.inexactness.effective_eta(self.metric_policy.m, self.metric_policy.M)


@dataclass
class SolverState:
    x: np.ndarray
    F: float
    k: int
    policy: MetricPolicy


@dataclass
class SolveReport:
    """Result of sqa_run; records are kept even when the run errored"""
    final_point: np.ndarray
    final_F: Optional[float]
    records: List[IterationRecord]
    termination_reason: str
    total_inner_iterations: int
    error: Optional[str] = None
    iterates: Optional[List[np.ndarray]] = None
    name: str = 'run'


# Called as observer(model, inner_result, record) after every step.
StepObserver = Callable[[SubproblemModel, InnerResult, IterationRecord], None]


def initial_state(config: SolverConfig) -> SolverState:
    x0 = np.array(config.problem.x0, dtype=float)
    return SolverState(x=x0,
                       F=eval_F(config.problem.objective, x0),
                       k=0,
                       policy=config.metric_policy.clone())


def sqa_step(state: SolverState, config: SolverConfig,
             observer: Optional[StepObserver] = None) -> Tuple[SolverState, IterationRecord]:
    """One pass: metric, subproblem, inner solve, line search, update"""
    problem = config.problem
    obj = problem.objective
    grad = np.asarray(obj.smooth.gradient(state.x), dtype=float)
    state.policy.observe(state.x, grad)
    metric = state.policy.next_metric(dimension=obj.dimension)
    model = make_subproblem(obj, metric, state.x, grad)
    inner = inner_solve(model, config.inexactness)
    outcome = backtrack(config.linesearch, obj, model, inner.candidate)

    d = inner.candidate - state.x
    x_next = state.x + outcome.alpha * d
    F_next = eval_F(obj, x_next)
    if not np.isfinite(F_next):
        raise NumericalError(f'non-finite objective after iteration {state.k}', [state.F, F_next])

    fgap = None if problem.known_F_star is None else state.F - problem.known_F_star
    record = IterationRecord(k=state.k,
                             F_k=state.F,
                             alpha_k=outcome.alpha,
                             dir_norm=float(np.linalg.norm(d)),
                             dir_norm_metric=float(np.sqrt(metric_norm_sq(metric, d))),
                             Q_bar=inner.Q_value,
                             inner_iters=inner.iterations_used,
                             certified=inner.certified,
                             ls_trials=outcome.trials,
                             dist_to_X=problem.distance_to_solutions(state.x),
                             fgap=fgap)
    if observer is not None:
        observer(model, inner, record)
    return SolverState(x=x_next, F=F_next, k=state.k + 1, policy=state.policy), record


def termination_check(record: IterationRecord, config: SolverConfig) -> Optional[str]:
    """First satisfied stopping rule, in the order fgap, direction, budget"""
    if record.fgap is not None and config.tol_fgap is not None and record.fgap <= config.tol_fgap:
        return FGAP_TOLERANCE
    if record.dir_norm_metric <= config.tol_direction:
        return DIRECTION_TOLERANCE
    if record.k + 1 >= config.max_outer:
        return MAX_OUTER
    return None


def sqa_run(config: SolverConfig, observer: Optional[StepObserver] = None) -> SolveReport:
    """Iterate sqa_step until a stopping rule fires

    Step errors end the run with termination_reason 'error'; the partial
    records and the message are kept on the report.
    """
    state = initial_state(config)
    records: List[IterationRecord] = []
    iterates = [np.array(state.x)] if config.keep_iterates else None
    reason, error = MAX_OUTER, None
    if config.max_outer > 0:
        try:
            while True:
                state, record = sqa_step(state, config, observer)
                records.append(record)
                if iterates is not None:
                    iterates.append(np.array(state.x))
                stop = termination_check(record, config)
                if stop is not None:
                    reason = stop
                    break
        except IsqaError as exc:
            reason, error = ERROR, str(exc)
    return SolveReport(final_point=state.x,
                       final_F=state.F,
                       records=records,
                       termination_reason=reason,
                       total_inner_iterations=sum(r.inner_iters for r in records),
                       error=error,
                       iterates=iterates,
                       name=config.name)


def objective_values(records: Sequence[IterationRecord], final_F: Optional[float] = None) -> List[float]:
    """F_0..F_K: recorded values followed by the value after the last step"""
    values = [r.F_k for r in records]
    if records and final_F is not None:
        values.append(final_F)
    return values
