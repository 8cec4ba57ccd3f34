"""High-accuracy references: subproblem minima, reference optima and fixtures
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .const import (FIXTURE_FILE, FIXTURE_SET, FIXTURE_VERSION, MAX_OUTER,
                    ORACLE_MAX_STEPS, ORACLE_TOL, REFERENCE_TOL)
from .core import SubproblemModel, eval_F, eval_Q
from .errors import OracleFailure, ReferenceInconsistency, UsageError
from .problems import ProblemInstance, Regularizer, catalog_instantiate


@dataclass(frozen=True, eq=False)
class SubproblemSolution:
    point: np.ndarray
    value: float
    iterations: int
    residual_norm: float
    method: str


def subproblem_oracle(model: SubproblemModel, tol: float = ORACLE_TOL, method: str = 'auto',
                      max_steps: int = ORACLE_MAX_STEPS) -> SubproblemSolution:
    """Minimize Q_k to within tol

    Diagonal metrics with a separable regularizer are solved in closed form,
    coordinate by coordinate. Otherwise prox-gradient at step 1/M runs until
    the certificate ||xi||^2/(2m) drops to tol.

    Args:
        model: Subproblem to solve
        tol: Certified accuracy on Q_k*
        method: auto, closed-form or iterative
        max_steps: Iterative step budget

    Raises:
        UsageError: Bad tol or method, or g without a proximal map
        OracleFailure: Iterative solve did not certify within max_steps
    """
    if not tol > 0:
        raise UsageError('oracle tol must be positive')
    if method not in ('auto', 'closed-form', 'iterative'):
        raise UsageError(f'unknown oracle method {method}')
    g = model.regularizer
    if not g.has_prox:
        raise UsageError('subproblem oracle needs a regularizer with a proximal map')
    closed_form = model.metric.is_diagonal and g.separable
    if method == 'closed-form' and not closed_form:
        raise UsageError('closed-form oracle needs a diagonal metric and a separable regularizer')

    if closed_form and method != 'iterative':
        h = model.metric.diagonal
        point = g.prox(model.anchor - model.grad_at_anchor / h, 1.0 / h)
        return _clamped(model, point, 1, 0.0, 'closed-form')

    from .inner import certificate_gap_bound, prox_grad_step, subgrad_residual
    tau = 1.0 / model.metric.M
    y = np.array(model.anchor)
    for step in range(1, max_steps + 1):
        y_next = prox_grad_step(model, y, tau)
        xi = subgrad_residual(model, y, y_next, tau)
        y = y_next
        if certificate_gap_bound(model, y, xi) <= tol:
            return _clamped(model, y, step, float(np.linalg.norm(xi)), 'iterative')
    raise OracleFailure(f'subproblem oracle did not reach tol={tol:g} in {max_steps} steps')


def _clamped(model, point, iterations, residual, method) -> SubproblemSolution:
    value = eval_Q(model, point)
    if not value <= 0:
        point, value = np.array(model.anchor), 0.0
    return SubproblemSolution(point=np.asarray(point, dtype=float), value=value,
                              iterations=iterations, residual_norm=residual, method=method)


def prox_check_1d(g: Regularizer, v: float, tau: float, grid_halfwidth: float = 3.0,
                  step: float = 1e-5) -> float:
    """|prox(v, tau) - grid argmin of tau*g(u) + (u - v)^2/2| on [-halfwidth, halfwidth]

    Raises:
        UsageError: Bad step, or the grid minimizer sits on the grid boundary
    """
    if not step > 0:
        raise UsageError('step must be positive')
    grid = np.arange(-grid_halfwidth, grid_halfwidth + 0.5 * step, step)
    if g.elementwise is not None:
        values = g.elementwise(grid)
    else:
        values = np.array([g.value(np.array([u])) for u in grid])
    objective = tau * values + 0.5 * (grid - v) ** 2
    best = int(np.argmin(objective))
    if best == 0 or best == grid.shape[0] - 1:
        raise UsageError(f'grid minimizer on the boundary, widen the grid beyond {grid_halfwidth}')
    prox = float(np.atleast_1d(g.prox(np.array([v]), tau))[0])
    return abs(prox - float(grid[best]))


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    x_star: np.ndarray
    F_star: float
    method: str
    second_F_star: Optional[float] = None


def _step_size(instance: ProblemInstance) -> float:
    L = instance.objective.smooth.lipschitz or instance.known_local_L
    return 1.0 / L if L else 1.0


def _driver_reference(instance: ProblemInstance, tol: float) -> Tuple[np.ndarray, float]:
    from .driver import SolverConfig, sqa_run
    from .inner import InexactnessPolicy
    from .linesearch import LineSearchSpec
    from .metric_policy import MetricPolicy

    config = SolverConfig(problem=instance,
                          metric_policy=MetricPolicy.scaled_identity(_step_size(instance)),
                          inexactness=InexactnessPolicy(eta=1.0, mode='exact'),
                          linesearch=LineSearchSpec(variant='LS1', gamma=0.25),
                          max_outer=ORACLE_MAX_STEPS,
                          tol_direction=tol,
                          name=f'{instance.name}-reference')
    report = sqa_run(config)
    if report.error is not None:
        raise OracleFailure(f'reference run failed: {report.error}')
    if report.termination_reason == MAX_OUTER:
        raise OracleFailure(f'reference run for {instance.name} did not converge')
    return report.final_point, report.final_F


def _bisection_reference(instance: ProblemInstance, start: float) -> Tuple[np.ndarray, float]:
    obj = instance.objective
    tau = _step_size(instance)

    def residual(t):
        x = np.array([t])
        return float(x[0] - obj.regularizer.prox(x - tau * obj.smooth.gradient(x), tau)[0])

    if residual(start) == 0.0:
        root = start
    else:
        width = 1.0
        lo, hi = start - width, start + width
        while residual(lo) * residual(hi) > 0:
            width *= 2.0
            if width > 1e12:
                raise OracleFailure('could not bracket the prox residual root')
            lo, hi = start - width, start + width
        root = brentq(residual, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    point = np.array([root])
    return point, eval_F(obj, point)


def _fixed_point_reference(instance: ProblemInstance, tol: float) -> Tuple[np.ndarray, float]:
    obj = instance.objective
    tau = _step_size(instance)
    x = np.array(instance.x0, dtype=float)
    for _ in range(ORACLE_MAX_STEPS):
        x_next = obj.regularizer.prox(x - tau * obj.smooth.gradient(x), tau)
        change = float(np.linalg.norm(x_next - x))
        x = x_next
        if change <= 0.1 * tol * tau:
            return x, eval_F(obj, x)
    raise OracleFailure(f'fixed-point reference for {instance.name} did not converge')


def reference_solution(instance: ProblemInstance, tol: float = REFERENCE_TOL) -> ReferenceSolution:
    """Minimizer and optimal value, analytic or cross-validated numerically

    The numeric route runs the solver itself (scaled identity H = L I, exact
    inner solves, LS1) and checks it against an independent method: bracketing
    of the prox residual in one dimension, plain fixed-point iteration of the
    prox-gradient map otherwise.

    Raises:
        ReferenceInconsistency: The two values differ by more than 10 * tol
        OracleFailure: Either method failed to converge
    """
    if instance.known_F_star is not None and instance.x_star is not None:
        return ReferenceSolution(x_star=np.array(instance.x_star, dtype=float),
                                 F_star=float(instance.known_F_star), method='analytic')
    if not instance.objective.regularizer.has_prox:
        raise UsageError(f'{instance.name} has no proximal map and no analytic optimum')
    point, first = _driver_reference(instance, tol)
    if instance.dimension == 1:
        other, second = _bisection_reference(instance, float(point[0]))
        method = 'driver+bisection'
    else:
        other, second = _fixed_point_reference(instance, tol)
        method = 'driver+fixed-point'
    if abs(first - second) > 10.0 * tol * max(1.0, abs(first)):
        raise ReferenceInconsistency(instance.name, first, second)
    # x_star is the point whose value is reported as F_star
    if second < first:
        point = other
    return ReferenceSolution(x_star=np.array(point, dtype=float), F_star=min(first, second),
                             method=method, second_F_star=second)


# Fixtures

@dataclass(frozen=True)
class FixtureRecord:
    instance: str
    dimension: int
    seed: int
    F_star: float
    tol: float
    x_star: Tuple[float, ...]


_FIXTURE_HEADER = ('version', 'instance', 'dimension', 'seed', 'F_star', 'tol', 'x_star')


def write_fixtures(records: Sequence[FixtureRecord], path: Union[str, Path]) -> Path:
    """Write fixture rows as CSV with 17 significant digits"""
    path = Path(path)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(_FIXTURE_HEADER)
        for record in records:
            writer.writerow([FIXTURE_VERSION, record.instance, record.dimension, record.seed,
                             f'{record.F_star:.17g}', f'{record.tol:.17g}',
                             ' '.join(f'{value:.17g}' for value in record.x_star)])
    return path


def read_fixtures(path: Union[str, Path]) -> List[FixtureRecord]:
    """Parse a fixture file written by write_fixtures

    Raises:
        UsageError: Unknown header or fixture version
    """
    with Path(path).open(newline='') as handle:
        reader = csv.reader(handle)
        header = tuple(next(reader, ()))
        if header != _FIXTURE_HEADER:
            raise UsageError(f'unexpected fixture header {header}')
        records = []
        for row in reader:
            if int(row[0]) != FIXTURE_VERSION:
                raise UsageError(f'unsupported fixture version {row[0]}')
            records.append(FixtureRecord(instance=row[1],
                                         dimension=int(row[2]),
                                         seed=int(row[3]),
                                         F_star=float(row[4]),
                                         tol=float(row[5]),
                                         x_star=tuple(float(v) for v in row[6].split())))
    return records


def regen_fixtures(directory: Union[str, Path], force: bool = False,
                   fixture_set: Sequence[Tuple[str, int, int]] = FIXTURE_SET,
                   tol: float = REFERENCE_TOL) -> Path:
    """Rebuild reference fixtures for every (instance, dimension, seed) row

    Raises:
        UsageError: The fixture file exists and force is not set
    """
    directory = Path(directory)
    path = directory / FIXTURE_FILE
    if path.exists() and not force:
        raise UsageError(f'{path} exists, pass force to overwrite')
    directory.mkdir(parents=True, exist_ok=True)
    records = []
    for name, dimension, seed in fixture_set:
        instance = catalog_instantiate(name, dimension, seed, with_reference=False)
        reference = reference_solution(instance, tol)
        records.append(FixtureRecord(instance=name, dimension=dimension, seed=seed,
                                     F_star=reference.F_star, tol=tol,
                                     x_star=tuple(float(v) for v in reference.x_star)))
    return write_fixtures(records, path)


def fixture_lookup(records: Sequence[FixtureRecord], name: str, dimension: int,
                   seed: int) -> Optional[FixtureRecord]:
    return next((r for r in records
                 if (r.instance, r.dimension, r.seed) == (name, dimension, seed)), None)


def fixture_agrees(record: FixtureRecord, reference: ReferenceSolution) -> bool:
    """Stored and recomputed optimal values agree within 10 * tol"""
    return math.isclose(record.F_star, reference.F_star, rel_tol=0.0,
                        abs_tol=10.0 * record.tol * max(1.0, abs(record.F_star)))
