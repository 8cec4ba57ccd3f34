"""Test-problem catalog: smooth terms, prox-capable regularizers and fixtures
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.special import expit

from .const import CATALOG_NAMES
from .core import ObjectiveSplit, as_vector
from .errors import UsageError


@dataclass(frozen=True, eq=False)
class SmoothFunction:
    """Differentiable convex term f with gradient oracle

    Attributes:
        value: x -> f(x)
        gradient: x -> grad f(x)
        domain: Predicate for the open set f is defined on, None for all of R^n
        lipschitz: Gradient Lipschitz constant on `lipschitz_region`
        lipschitz_region: Where `lipschitz` holds, None when it holds globally
        strong_convexity: Strong convexity modulus, when known
    """
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    domain: Optional[Callable[[np.ndarray], bool]] = None
    lipschitz: Optional[float] = None
    lipschitz_region: Optional[str] = None
    strong_convexity: Optional[float] = None

    def in_domain(self, x: np.ndarray) -> bool:
        return True if self.domain is None else bool(self.domain(x))


@dataclass(frozen=True, eq=False)
class Regularizer:
    """Proper lsc convex term g, possibly extended-valued

    `proximal(v, tau)` returns argmin_u tau*g(u) + 1/2||u - v||^2. Separable
    regularizers accept a vector of per-coordinate tau and may expose
    `elementwise`, the per-coordinate values summing to g.
    """
    value: Callable[[np.ndarray], float]
    elementwise: Optional[Callable[[np.ndarray], np.ndarray]] = None
    proximal: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    domain: Optional[Callable[[np.ndarray], bool]] = None
    separable: bool = False

    def in_domain(self, x: np.ndarray) -> bool:
        return True if self.domain is None else bool(self.domain(x))

    @property
    def has_prox(self) -> bool:
        return self.proximal is not None

    def prox(self, v, tau) -> np.ndarray:
        """Proximal map of tau*g at v

        Raises:
            UsageError: If tau is not positive or g has no closed-form prox
        """
        if self.proximal is None:
            raise UsageError('regularizer has no proximal map')
        tau = _check_tau(tau)
        if np.ndim(tau) > 0 and not self.separable:
            raise UsageError('vector tau needs a separable regularizer')
        return np.asarray(self.proximal(np.asarray(v, dtype=float), tau), dtype=float)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Catalog problem with whatever ground truth is known analytically

    Attributes:
        name: Catalog name
        objective: F = f + g
        x0: Starting point
        known_F_star: Optimal value
        known_projector: x -> P_X(x), projection onto the solution set
        known_qg_mu: Quadratic growth constant
        known_local_L: Gradient Lipschitz constant on the initial sublevel set
        x_star: A minimizer
        level_bounded: True when the initial sublevel set is bounded
        seed: Seed the instance was generated with
    """
    name: str
    objective: ObjectiveSplit
    x0: np.ndarray
    known_F_star: Optional[float] = None
    known_projector: Optional[Callable[[np.ndarray], np.ndarray]] = None
    known_qg_mu: Optional[float] = None
    known_local_L: Optional[float] = None
    x_star: Optional[np.ndarray] = None
    level_bounded: bool = False
    seed: int = 0

    @property
    def dimension(self) -> int:
        return self.objective.dimension

    def distance_to_solutions(self, x) -> Optional[float]:
        """dist(x, X) through the known projector, None when unknown"""
        if self.known_projector is None:
            return None
        vec = as_vector(x, self.dimension)
        return float(np.linalg.norm(vec - self.known_projector(vec)))


def _check_tau(tau):
    arr = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise UsageError(f'prox parameter tau must be positive, got {tau}')
    return arr if arr.ndim > 0 else float(arr)


def prox_l1(v, tau) -> np.ndarray:
    """Soft-thresholding sign(v_i) * max(|v_i| - tau, 0)

    Example:
        >>> prox_l1([1.5, -0.3], 1.0)
        array([0.5, 0. ])
    """
    tau = _check_tau(tau)
    vec = np.asarray(v, dtype=float)
    return np.sign(vec) * np.maximum(np.abs(vec) - tau, 0.0)


def qg_example_value(u) -> np.ndarray:
    """Elementwise |u| on (-1, 1) and u^2 elsewhere"""
    arr = np.asarray(u, dtype=float)
    return np.where(np.abs(arr) < 1.0, np.abs(arr), arr * arr)


def prox_qg_example(v, tau):
    """Exact prox of the |u| / u^2 piecewise function

    Candidates are the stationary point of each piece (kept only inside its
    piece) and the breakpoints +-1; the lowest prox objective wins.
    """
    tau = _check_tau(tau)
    vec = np.asarray(v, dtype=float)
    tau_b = np.broadcast_to(tau, vec.shape)
    inner = np.sign(vec) * np.maximum(np.abs(vec) - tau_b, 0.0)
    inner = np.where(np.abs(inner) < 1.0, inner, np.nan)
    outer = vec / (1.0 + 2.0 * tau_b)
    outer = np.where(np.abs(outer) >= 1.0, outer, np.nan)
    candidates = np.stack([inner, outer, np.ones_like(vec), -np.ones_like(vec)])
    objective = tau_b * qg_example_value(candidates) + 0.5 * (candidates - vec) ** 2
    objective = np.where(np.isnan(candidates), np.inf, objective)
    best = np.take_along_axis(candidates, np.argmin(objective, axis=0)[np.newaxis], axis=0)[0]
    if best.ndim == 0:
        return float(best)
    return best


def counterexample_eval(x: float, y: float) -> float:
    """x + sqrt(x^2 + y^2) on the region x + y^2 <= 1, +inf outside

    For x < 0 the equivalent form y^2 / (r - x) avoids cancellation.
    """
    if x + y * y > 1.0:
        return np.inf
    r = float(np.hypot(x, y))
    if x < 0:
        return y * y / (r - x)
    return x + r


def counterexample_projector(p) -> np.ndarray:
    """Projection onto the ray {(x, 0): x <= 0}"""
    vec = as_vector(p, 2)
    return np.array([min(vec[0], 0.0), 0.0])


@dataclass(frozen=True)
class TracePoint:
    point: Tuple[float, float]
    value: float
    distance: float


def counterexample_trace(k: int) -> List[TracePoint]:
    """z_j = (-sum_{i<=j} 1/(i+1), 1) for j = 0..k with F(z_j) and dist(z_j, X)"""
    if k < 0:
        raise UsageError('k must be >= 0')
    partial_sums = np.cumsum(1.0 / np.arange(1, k + 2))
    trace = []
    for s in partial_sums:
        point = np.array([-s, 1.0])
        projected = counterexample_projector(point)
        trace.append(TracePoint(point=(float(point[0]), float(point[1])),
                                value=counterexample_eval(point[0], point[1]),
                                distance=float(np.hypot(*(point - projected)))))
    return trace


def grad_check_fd(f: SmoothFunction, x, h: float = 1e-5) -> float:
    """Max relative error between grad f and central differences

    Returns max_i |(f(x+h e_i) - f(x-h e_i))/(2h) - grad_i| / (1 + |grad_i|).

    Raises:
        UsageError: If h <= 0, x lies outside the domain, or the probes leave
            the domain even after shrinking h once
    """
    if h <= 0:
        raise UsageError('h must be positive')
    vec = as_vector(x)
    if not f.in_domain(vec):
        raise UsageError('x lies outside the domain of f')
    eye = np.eye(vec.shape[0])

    def probes_inside(step):
        return all(f.in_domain(vec + step * e) and f.in_domain(vec - step * e) for e in eye)

    if not probes_inside(h):
        h = h / 10.0
        if not probes_inside(h):
            raise UsageError('finite-difference probes leave the domain of f')
    grad = np.asarray(f.gradient(vec), dtype=float)
    worst = 0.0
    for i, e in enumerate(eye):
        estimate = (f.value(vec + h * e) - f.value(vec - h * e)) / (2.0 * h)
        worst = max(worst, abs(estimate - grad[i]) / (1.0 + abs(grad[i])))
    return worst


# Building blocks

def zero_function() -> SmoothFunction:
    return SmoothFunction(value=lambda x: 0.0,
                          gradient=lambda x: np.zeros_like(x),
                          lipschitz=0.0)


def half_squared_norm() -> SmoothFunction:
    """f(x) = 1/2 ||x||^2"""
    return SmoothFunction(value=lambda x: 0.5 * float(x @ x),
                          gradient=lambda x: np.array(x, dtype=float),
                          lipschitz=1.0,
                          strong_convexity=1.0)


def quadratic(P: np.ndarray, b: np.ndarray) -> SmoothFunction:
    """f(x) = 1/2 x'Px - b'x for symmetric positive semidefinite P"""
    eigs = np.linalg.eigvalsh(P)
    return SmoothFunction(value=lambda x: 0.5 * float(x @ P @ x) - float(b @ x),
                          gradient=lambda x: P @ x - b,
                          lipschitz=float(eigs.max()),
                          strong_convexity=float(eigs.min()) if eigs.min() > 0 else None)


def least_squares(A: np.ndarray, b: np.ndarray) -> SmoothFunction:
    """f(x) = 1/2 ||Ax - b||^2"""
    return SmoothFunction(value=lambda x: 0.5 * float(np.sum((A @ x - b) ** 2)),
                          gradient=lambda x: A.T @ (A @ x - b),
                          lipschitz=float(np.linalg.norm(A, 2) ** 2))


def logistic_loss(A: np.ndarray, labels: np.ndarray, ridge: float = 0.0) -> SmoothFunction:
    """Mean logistic loss of labels in {-1, 1} plus ridge/2 ||x||^2"""
    rows = A.shape[0]

    def value(x):
        margins = labels * (A @ x)
        return float(np.mean(np.logaddexp(0.0, -margins))) + 0.5 * ridge * float(x @ x)

    def gradient(x):
        margins = labels * (A @ x)
        return -(A.T @ (labels * expit(-margins))) / rows + ridge * x

    return SmoothFunction(value=value,
                          gradient=gradient,
                          lipschitz=float(np.linalg.norm(A, 2) ** 2) / (4.0 * rows) + ridge,
                          strong_convexity=ridge if ridge > 0 else None)


def quartic_function() -> SmoothFunction:
    """f(x) = 1/4 sum x_i^4; gradient x^3 is only locally Lipschitz"""
    return SmoothFunction(value=lambda x: 0.25 * float(np.sum(x ** 4)),
                          gradient=lambda x: x ** 3)


def zero_regularizer() -> Regularizer:
    return Regularizer(value=lambda x: 0.0,
                       elementwise=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                       proximal=lambda v, tau: np.array(v, dtype=float),
                       separable=True)


def l1_norm(weight: float = 1.0) -> Regularizer:
    """g(x) = weight * ||x||_1"""
    if weight < 0:
        raise UsageError('l1 weight must be nonnegative')
    return Regularizer(value=lambda x: weight * float(np.sum(np.abs(x))),
                       elementwise=lambda x: weight * np.abs(np.asarray(x, dtype=float)),
                       proximal=lambda v, tau: (prox_l1(v, np.asarray(tau) * weight)
                                                if weight > 0 else np.array(v, dtype=float)),
                       separable=True)


def qg_example_regularizer() -> Regularizer:
    """Sum of the |u| / u^2 piecewise function over coordinates"""
    return Regularizer(value=lambda x: float(np.sum(qg_example_value(x))),
                       elementwise=qg_example_value,
                       proximal=lambda v, tau: np.atleast_1d(prox_qg_example(v, tau)),
                       separable=True)


def counterexample_regularizer() -> Regularizer:
    """Two-dimensional counterexample as an extended-valued g, without prox"""
    return Regularizer(value=lambda p: counterexample_eval(p[0], p[1]),
                       domain=lambda p: p[0] + p[1] * p[1] <= 1.0)


# Catalog

def _sc_quadratic_l1(dimension: int, rng: np.random.Generator) -> dict:
    basis, _ = np.linalg.qr(rng.standard_normal((dimension, dimension)))
    eigs = rng.uniform(1.0, 4.0, dimension)
    P = (basis * eigs) @ basis.T
    P = 0.5 * (P + P.T)
    b = rng.standard_normal(dimension)
    smooth = quadratic(P, b)
    return dict(objective=ObjectiveSplit(smooth, l1_norm(0.1), dimension),
                x0=rng.standard_normal(dimension),
                known_qg_mu=float(eigs.min()),
                known_local_L=float(eigs.max()),
                level_bounded=True)


def _logistic_l1(dimension: int, rng: np.random.Generator) -> dict:
    rows = 2 * dimension
    A = rng.standard_normal((rows, dimension))
    truth = np.where(rng.uniform(size=dimension) < 0.5, rng.standard_normal(dimension), 0.0)
    noise = 0.5 * rng.standard_normal(rows)
    labels = np.where(A @ truth + noise >= 0, 1.0, -1.0)
    ridge = 1e-2
    smooth = logistic_loss(A, labels, ridge)
    return dict(objective=ObjectiveSplit(smooth, l1_norm(0.05), dimension),
                x0=np.zeros(dimension),
                known_qg_mu=ridge,
                known_local_L=smooth.lipschitz,
                level_bounded=True)


def _quartic(dimension: int, rng: np.random.Generator) -> dict:
    x0 = rng.standard_normal(dimension)
    # The sublevel set of x0 is the l4 ball of radius ||x0||_4.
    local_L = 3.0 * float(np.sum(x0 ** 4)) ** 0.5
    smooth = replace(quartic_function(), lipschitz=local_L, lipschitz_region='initial sublevel set')
    return dict(objective=ObjectiveSplit(smooth, zero_regularizer(), dimension),
                x0=x0,
                known_F_star=0.0,
                known_projector=lambda x: np.zeros_like(x),
                known_local_L=local_L,
                x_star=np.zeros(dimension),
                level_bounded=True)


def _qg_not_ossc(dimension: int, rng: np.random.Generator) -> dict:
    return dict(objective=ObjectiveSplit(zero_function(), qg_example_regularizer(), dimension),
                x0=rng.uniform(-4.0, 4.0, dimension),
                known_F_star=0.0,
                known_projector=lambda x: np.zeros_like(x),
                known_qg_mu=2.0,
                x_star=np.zeros(dimension),
                level_bounded=True)


def _counterexample_region(dimension: int, rng: np.random.Generator) -> dict:
    if dimension != 2:
        raise UsageError('counterexample-region is two-dimensional')
    return dict(objective=ObjectiveSplit(zero_function(), counterexample_regularizer(), 2),
                x0=np.array([-1.0, 1.0]),
                known_F_star=0.0,
                x_star=np.zeros(2),
                known_projector=counterexample_projector)


def _fbs_reference(dimension: int, rng: np.random.Generator) -> dict:
    rows = max(1, dimension // 2)
    A = rng.standard_normal((rows, dimension))
    b = rng.standard_normal(rows)
    smooth = least_squares(A, b)
    return dict(objective=ObjectiveSplit(smooth, l1_norm(0.1), dimension),
                x0=np.zeros(dimension),
                known_local_L=smooth.lipschitz,
                level_bounded=True)


_BUILDERS = {'sc-quadratic-l1': _sc_quadratic_l1,
             'logistic-l1': _logistic_l1,
             'quartic': _quartic,
             'qg-not-ossc': _qg_not_ossc,
             'counterexample-region': _counterexample_region,
             'fbs-reference': _fbs_reference}

_NEEDS_REFERENCE = {'sc-quadratic-l1', 'logistic-l1'}


def catalog_instantiate(name: str, dimension: int, seed: int,
                        with_reference: bool = True) -> ProblemInstance:
    """Build a seeded catalog instance

    Args:
        name: One of the catalog names in const.CATALOG_NAMES
        dimension: Problem dimension
        seed: Generator seed
        with_reference: Compute F* and x* through the oracle for instances
            that have no analytic optimum

    Raises:
        UsageError: Unknown name or unsupported dimension
    """
    if name not in CATALOG_NAMES:
        raise UsageError(f'unknown problem {name}, expected one of {sorted(CATALOG_NAMES)}')
    if dimension < 1:
        raise UsageError('dimension must be >= 1')
    rng = np.random.default_rng(seed)
    instance = ProblemInstance(name=name, seed=seed, **_BUILDERS[name](dimension, rng))
    if with_reference and name in _NEEDS_REFERENCE:
        from .oracle import reference_solution
        reference = reference_solution(instance)
        x_star = reference.x_star
        instance = replace(instance,
                           known_F_star=reference.F_star,
                           x_star=x_star,
                           known_projector=lambda x: np.array(x_star))
    return instance
