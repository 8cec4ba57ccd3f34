"""Vector algebra, the objective split F = f + g and the subproblem model Q_k
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .const import METRIC_BOUND_RTOL
from .errors import MetricBoundError, NumericalError, UsageError

if TYPE_CHECKING:
    from .problems import Regularizer, SmoothFunction


def as_vector(x, dimension: Optional[int] = None) -> np.ndarray:
    """Coerce x to a finite 1-D float array

    Args:
        x: Array-like of coordinates (a scalar is read as a 1-vector)
        dimension: Expected length, checked when given

    Raises:
        UsageError: On dimension mismatch or non-finite coordinates
    """
    vec = np.atleast_1d(np.asarray(x, dtype=float))
    if vec.ndim != 1:
        raise UsageError(f'expected a 1-D vector, got shape {vec.shape}')
    if dimension is not None and vec.shape[0] != dimension:
        raise UsageError(f'dimension mismatch: expected {dimension}, got {vec.shape[0]}')
    if not np.all(np.isfinite(vec)):
        raise UsageError('vector has non-finite coordinates')
    return vec


@dataclass(frozen=True)
class ObjectiveSplit:
    """Composite objective F = f + g with dom F = dom g"""
    smooth: SmoothFunction
    regularizer: Regularizer
    dimension: int


def eval_F(obj: ObjectiveSplit, x) -> float:
    """Evaluate F(x) = f(x) + g(x), +inf outside dom g

    Example:
        >>> eval_F(ObjectiveSplit(half_squared_norm(), l1_norm(), 2), [1.0, -2.0])
        5.5
    """
    vec = as_vector(x, obj.dimension)
    if not obj.regularizer.in_domain(vec):
        return np.inf
    return float(obj.smooth.value(vec) + obj.regularizer.value(vec))


@dataclass(frozen=True, eq=False)
class Metric:
    """Symmetric positive operator H with certified spectral bounds m <= M

    Exactly one of `diagonal` and `matrix` is set. Diagonal metrics (scaled
    identities included) get exact bound validation, dense ones are sampled.
    """
    m: float
    M: float
    diagonal: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.diagonal is None) == (self.matrix is None):
            raise UsageError('metric needs exactly one of diagonal or matrix')
        if not (np.isfinite(self.m) and np.isfinite(self.M)) or self.m <= 0 or self.M < self.m:
            raise UsageError(f'metric bounds must satisfy 0 < m <= M, got m={self.m}, M={self.M}')
        if self.diagonal is not None:
            diag = np.array(self.diagonal, dtype=float).ravel()
            diag.setflags(write=False)
            object.__setattr__(self, 'diagonal', diag)
        else:
            mat = np.array(self.matrix, dtype=float)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise UsageError(f'metric matrix must be square, got shape {mat.shape}')
            scale = 1.0 + float(np.max(np.abs(mat))) if mat.size else 1.0
            if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-12 * scale):
                raise UsageError('metric matrix is not symmetric')
            mat.setflags(write=False)
            object.__setattr__(self, 'matrix', mat)

    @classmethod
    def scaled_identity(cls, scale: float, dimension: int) -> 'Metric':
        """H = scale * I, with m = M = scale"""
        return cls(m=scale, M=scale, diagonal=np.full(dimension, float(scale)))

    @classmethod
    def from_diagonal(cls, diagonal, m: Optional[float] = None,
                      M: Optional[float] = None) -> 'Metric':
        """Diagonal metric; bounds default to the extreme entries"""
        diag = np.asarray(diagonal, dtype=float).ravel()
        return cls(m=float(diag.min()) if m is None else m,
                   M=float(diag.max()) if M is None else M,
                   diagonal=diag)

    @classmethod
    def from_matrix(cls, matrix, m: float, M: float) -> 'Metric':
        """Dense symmetric metric with declared bounds"""
        return cls(m=m, M=M, matrix=matrix)

    @property
    def dimension(self) -> int:
        if self.diagonal is not None:
            return self.diagonal.shape[0]
        return self.matrix.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return self.diagonal is not None

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Return H v"""
        if self.diagonal is not None:
            return self.diagonal * v
        return self.matrix @ v

    def to_dense(self) -> np.ndarray:
        if self.diagonal is not None:
            return np.diag(self.diagonal)
        return np.array(self.matrix)


def metric_norm_sq(metric: Metric, v) -> float:
    """Squared metric norm <v, H v>, clamped at zero against rounding"""
    vec = as_vector(v, metric.dimension)
    return max(0.0, float(vec @ metric.apply(vec)))


@dataclass(frozen=True)
class MetricBoundReport:
    """Outcome of a metric bound validation"""
    trials: int
    min_quotient: float
    max_quotient: float
    m: float
    M: float
    exact: bool


def validate_metric_bounds(metric: Metric, trials: int = 100, seed: int = 0) -> MetricBoundReport:
    """Check m <= <v, Hv>/<v, v> <= M on probe vectors

    Diagonal metrics are probed on every coordinate vector (their eigenvectors)
    in addition to `trials` random unit vectors, which makes the check exact.

    Raises:
        UsageError: If trials < 1
        MetricBoundError: Naming the first probe vector outside the bounds
    """
    if trials < 1:
        raise UsageError('trials must be >= 1')
    rng = np.random.default_rng(seed)
    lower = metric.m * (1.0 - METRIC_BOUND_RTOL)
    upper = metric.M * (1.0 + METRIC_BOUND_RTOL)
    probes = []
    if metric.is_diagonal:
        probes.extend(np.eye(metric.dimension))
    for _ in range(trials):
        v = rng.standard_normal(metric.dimension)
        probes.append(v / np.linalg.norm(v))

    lowest, highest = np.inf, -np.inf
    for v in probes:
        quotient = float(v @ metric.apply(v)) / float(v @ v)
        if quotient < lower or quotient > upper:
            raise MetricBoundError(v, quotient, metric.m, metric.M)
        lowest = min(lowest, quotient)
        highest = max(highest, quotient)
    return MetricBoundReport(trials=trials,
                             min_quotient=lowest,
                             max_quotient=highest,
                             m=metric.m,
                             M=metric.M,
                             exact=metric.is_diagonal)


@dataclass(frozen=True, eq=False)
class SubproblemModel:
    """Frozen snapshot of Q_k at the anchor x_k

    Q_k(x) = <grad f(x_k), x - x_k> + g(x) - g(x_k) + 1/2 ||x - x_k||_k^2
    """
    objective: ObjectiveSplit
    metric: Metric
    anchor: np.ndarray
    grad_at_anchor: np.ndarray
    g_at_anchor: float
    f_at_anchor: float

    @property
    def dimension(self) -> int:
        return self.anchor.shape[0]

    @property
    def F_at_anchor(self) -> float:
        return self.f_at_anchor + self.g_at_anchor

    @property
    def regularizer(self) -> Regularizer:
        return self.objective.regularizer


def make_subproblem(obj: ObjectiveSplit, metric: Metric, x_k,
                    grad: Optional[np.ndarray] = None) -> SubproblemModel:
    """Freeze grad f(x_k), f(x_k) and g(x_k) into a subproblem model

    Args:
        obj: Objective split
        metric: Metric H_k for this iteration
        x_k: Anchor point, must lie in dom g
        grad: Precomputed grad f(x_k), evaluated here when omitted

    Raises:
        UsageError: If x_k is outside dom g or dimensions disagree
        NumericalError: If the oracles return non-finite values at x_k
    """
    anchor = as_vector(x_k, obj.dimension)
    if metric.dimension != obj.dimension:
        raise UsageError(f'metric dimension {metric.dimension} does not match '
                         f'objective dimension {obj.dimension}')
    if not obj.regularizer.in_domain(anchor):
        raise UsageError('anchor lies outside dom g')
    grad_at_anchor = np.array(obj.smooth.gradient(anchor) if grad is None else grad, dtype=float)
    g_at_anchor = float(obj.regularizer.value(anchor))
    f_at_anchor = float(obj.smooth.value(anchor))
    if not (np.all(np.isfinite(grad_at_anchor)) and np.isfinite(g_at_anchor)
            and np.isfinite(f_at_anchor)):
        raise NumericalError('non-finite oracle value at the anchor',
                             [f_at_anchor, g_at_anchor])
    anchor = anchor.copy()
    anchor.setflags(write=False)
    grad_at_anchor.setflags(write=False)
    return SubproblemModel(objective=obj,
                           metric=metric,
                           anchor=anchor,
                           grad_at_anchor=grad_at_anchor,
                           g_at_anchor=g_at_anchor,
                           f_at_anchor=f_at_anchor)


def eval_Delta(model: SubproblemModel, x) -> float:
    """Linearized decrease <grad f(x_k), x - x_k> + g(x) - g(x_k)"""
    vec = as_vector(x, model.dimension)
    if not model.regularizer.in_domain(vec):
        return np.inf
    d = vec - model.anchor
    return float(model.grad_at_anchor @ d) + (float(model.regularizer.value(vec)) - model.g_at_anchor)


def eval_Q(model: SubproblemModel, x) -> float:
    """Subproblem objective Q_k(x), +inf outside dom g; Q_k(x_k) == 0 exactly"""
    vec = as_vector(x, model.dimension)
    if not model.regularizer.in_domain(vec):
        return np.inf
    d = vec - model.anchor
    return (float(model.grad_at_anchor @ d)
            + (float(model.regularizer.value(vec)) - model.g_at_anchor)
            + 0.5 * float(d @ model.metric.apply(d)))
