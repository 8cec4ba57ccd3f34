"""Inner prox-gradient solver producing eta-approximate subproblem solutions
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .const import INNER_MODES
from .core import SubproblemModel, as_vector, eval_Q
from .errors import NumericalError, UsageError

# Relative allowance on tau <= 1/M.
_STEP_RTOL = 1e-12


@dataclass(frozen=True)
class InexactnessPolicy:
    """How accurately each subproblem is solved

    Attributes:
        eta: Inexactness level in (0, 1], larger is more accurate
        mode: certificate, fixed-count or exact
        n_inner: Iterations per subproblem in fixed-count mode
        sigma: Declared contraction, defaults to m/M of the active metric
        max_iterations: Certificate-mode cap, derived from eta and m/M when unset
        near_exact_tol: Accept when ||xi|| falls below this; required for eta = 1
    """
    eta: float = 0.9
    mode: str = 'certificate'
    n_inner: Optional[int] = None
    sigma: Optional[float] = None
    max_iterations: Optional[int] = None
    near_exact_tol: Optional[float] = None

    def __post_init__(self):
        if self.mode not in INNER_MODES:
            raise UsageError(f'unknown inner mode {self.mode}, expected one of {sorted(INNER_MODES)}')
        if not (0 < self.eta <= 1):
            raise UsageError(f'eta must lie in (0, 1], got {self.eta}')
        if self.sigma is not None and not (0 < self.sigma < 1):
            raise UsageError(f'sigma must lie in (0, 1), got {self.sigma}')
        if self.near_exact_tol is not None and not self.near_exact_tol > 0:
            raise UsageError('near_exact_tol must be positive')
        if self.max_iterations is not None and self.max_iterations < 1:
            raise UsageError('max_iterations must be >= 1')
        if self.mode == 'certificate' and self.eta >= 1 and self.near_exact_tol is None:
            raise UsageError('certificate mode needs eta < 1 unless near_exact_tol is set')
        if self.mode == 'fixed-count' and (self.n_inner is None or self.n_inner < 1):
            raise UsageError('fixed-count mode needs n_inner >= 1')

    def contraction(self, m: float, M: float) -> float:
        return self.sigma if self.sigma is not None else m / M

    def effective_eta(self, m: float, M: float) -> float:
        """eta guaranteed by the mode; 1 - (1 - sigma)^N_inner for fixed-count"""
        if self.mode == 'fixed-count':
            return 1.0 - (1.0 - self.contraction(m, M)) ** self.n_inner
        return self.eta

    def certificate_cap(self, m: float, M: float) -> int:
        """Default inner budget 10 * ceil(M/m * log(1/(1-eta)))"""
        if self.max_iterations is not None:
            return self.max_iterations
        if self.eta < 1:
            horizon = math.log(1.0 / (1.0 - self.eta))
        else:
            horizon = math.log(max(1.0 / self.near_exact_tol, math.e))
        return max(1, 10 * math.ceil(M / m * horizon))


@dataclass(frozen=True, eq=False)
class InnerResult:
    """Outcome of one subproblem solve

    `observed_contraction` is the geometric mean ratio of successive model
    decreases, comparable with 1 - sigma; None with fewer than two decreases.
    """
    candidate: np.ndarray
    iterations_used: int
    certified: bool
    Q_value: float
    residual_norm: float
    gap_bound: float = 0.0
    effective_eta: float = 1.0
    observed_contraction: Optional[float] = None
    q_history: Tuple[float, ...] = ()


def _check_step(model: SubproblemModel, tau: float) -> None:
    if not tau > 0:
        raise UsageError(f'inner step tau must be positive, got {tau}')
    if tau > (1.0 + _STEP_RTOL) / model.metric.M:
        raise UsageError(f'inner step tau={tau} exceeds 1/M={1.0 / model.metric.M}')


def model_gradient(model: SubproblemModel, y: np.ndarray) -> np.ndarray:
    """Gradient of the smooth part of Q_k: grad f(x_k) + H_k (y - x_k)"""
    return model.grad_at_anchor + model.metric.apply(y - model.anchor)


def prox_grad_step(model: SubproblemModel, y, tau: float) -> np.ndarray:
    """One prox-gradient step on Q_k

    Raises:
        UsageError: If tau is not in (0, 1/M]
    """
    _check_step(model, tau)
    vec = as_vector(y, model.dimension)
    return model.regularizer.prox(vec - tau * model_gradient(model, vec), tau)


def subgrad_residual(model: SubproblemModel, y_prev, y_next, tau: float) -> np.ndarray:
    """Element of dQ_k(y_next) left by the step y_prev -> y_next

    xi = H_k (y_next - y_prev) + (y_prev - y_next) / tau
    """
    prev = as_vector(y_prev, model.dimension)
    nxt = as_vector(y_next, model.dimension)
    return model.metric.apply(nxt - prev) + (prev - nxt) / tau


def certificate_gap_bound(model: SubproblemModel, y, xi) -> float:
    """||xi||^2 / (2m), an upper bound on Q_k(y) - Q_k* when xi is in dQ_k(y)"""
    residual = as_vector(xi, model.dimension)
    return float(residual @ residual) / (2.0 * model.metric.m)


def _observed_contraction(q_history) -> Optional[float]:
    decreases = -np.diff(np.asarray(q_history, dtype=float))
    ratios = [b / a for a, b in zip(decreases, decreases[1:]) if a > 0 and b > 0]
    if not ratios:
        return None
    return float(np.exp(np.mean(np.log(ratios))))


def inner_solve(model: SubproblemModel, policy: InexactnessPolicy) -> InnerResult:
    """Find x_bar with Q_k(x_bar) <= eta * Q_k*, starting from y_0 = x_k

    Certificate mode stops at the first prox-gradient iterate y with
    Q_k(y) <= -(eta/(1-eta)) ||xi||^2/(2m), which implies the relative
    condition because Q_k* >= Q_k(y) - ||xi||^2/(2m). Reaching the iteration
    cap returns the last iterate flagged uncertified.

    Raises:
        NumericalError: If Q_k turns non-finite; the dump holds the Q history
    """
    m, M = model.metric.m, model.metric.M
    effective_eta = policy.effective_eta(m, M)
    if policy.mode == 'exact':
        from .oracle import subproblem_oracle
        solution = subproblem_oracle(model)
        q_value = eval_Q(model, solution.point)
        if not np.isfinite(q_value):
            raise NumericalError('non-finite subproblem value from the oracle', [q_value])
        candidate = solution.point
        if q_value > 0:
            candidate, q_value = np.array(model.anchor), 0.0
        return InnerResult(candidate=candidate,
                           iterations_used=solution.iterations,
                           certified=True,
                           Q_value=q_value,
                           residual_norm=solution.residual_norm,
                           effective_eta=effective_eta,
                           q_history=(0.0, q_value))

    tau = 1.0 / M
    if policy.mode == 'fixed-count':
        budget = policy.n_inner
    else:
        budget = policy.certificate_cap(m, M)
        factor = policy.eta / (1.0 - policy.eta) if policy.eta < 1 else None

    y = np.array(model.anchor)
    q_history = [0.0]
    residual_norm = 0.0
    gap_bound = 0.0
    certified = False
    iterations = 0
    while iterations < budget:
        y_next = prox_grad_step(model, y, tau)
        iterations += 1
        if not np.all(np.isfinite(y_next)):
            raise NumericalError(f'non-finite inner iterate at inner iteration {iterations}',
                                 q_history + [np.nan])
        xi = subgrad_residual(model, y, y_next, tau)
        q_next = eval_Q(model, y_next)
        if not np.isfinite(q_next) or not np.all(np.isfinite(xi)):
            raise NumericalError(f'non-finite subproblem value at inner iteration {iterations}',
                                 q_history + [q_next])
        q_history.append(q_next)
        residual_norm = float(np.linalg.norm(xi))
        gap_bound = certificate_gap_bound(model, y_next, xi)
        y = y_next
        if policy.mode == 'certificate':
            if factor is not None and q_next <= -factor * gap_bound:
                certified = True
                break
            if policy.near_exact_tol is not None and residual_norm <= policy.near_exact_tol:
                certified = True
                break

    if policy.mode == 'fixed-count':
        certified = policy.contraction(m, M) <= m / M

    q_value = q_history[-1]
    if q_value > 0:
        y, q_value = np.array(model.anchor), 0.0
    return InnerResult(candidate=y,
                       iterations_used=iterations,
                       certified=certified,
                       Q_value=q_value,
                       residual_norm=residual_norm,
                       gap_bound=gap_bound,
                       effective_eta=effective_eta,
                       observed_contraction=_observed_contraction(q_history),
                       q_history=tuple(q_history))
