"""Backtracking line searches LS1-LS4 along d_k = x_bar - x_k
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .const import DEFAULT_MAX_TRIALS, LINESEARCH_VARIANTS, LS_SLACK
from .core import ObjectiveSplit, SubproblemModel, as_vector, metric_norm_sq
from .errors import LineSearchFailure, NumericalError, UsageError


@dataclass(frozen=True)
class LineSearchSpec:
    """Backtracking parameters; trial stepsizes are alpha_bar * beta^i"""
    variant: str = 'LS3'
    beta: float = 0.5
    gamma: float = 0.5
    alpha_bar: float = 1.0
    max_trials: int = DEFAULT_MAX_TRIALS

    def __post_init__(self):
        if self.variant not in LINESEARCH_VARIANTS:
            raise UsageError(f'unknown line search {self.variant}, '
                             f'expected one of {sorted(LINESEARCH_VARIANTS)}')
        if not (0 < self.beta < 1):
            raise UsageError(f'beta must lie in (0, 1), got {self.beta}')
        if not (0 < self.alpha_bar <= 1):
            raise UsageError(f'alpha_bar must lie in (0, 1], got {self.alpha_bar}')
        if self.max_trials < 1:
            raise UsageError('max_trials must be >= 1')
        if self.variant != 'LS2' and not (0 < self.gamma < 1):
            raise UsageError(f'{self.variant} gamma must lie in (0, 1), got {self.gamma}')
        if self.variant == 'LS2' and not self.gamma > 0:
            raise UsageError(f'LS2 gamma must be positive, got {self.gamma}')

    def validate(self, m: float) -> None:
        """Check the LS2 range gamma < m/2 against the metric lower bound m"""
        if self.variant == 'LS2' and not self.gamma < m / 2:
            raise UsageError(f'ls2.gamma must lie in (0, m/2) = (0, {m / 2:g}), got {self.gamma}')


@dataclass(frozen=True)
class LineSearchOutcome:
    alpha: float
    trials: int
    accepted_condition_lhs: float
    accepted_condition_rhs: float


def ls_terms(variant: str, obj: ObjectiveSplit, model: SubproblemModel, x_bar,
             alpha: float, gamma: float) -> Tuple[float, float]:
    """Left- and right-hand sides of the acceptance inequality at trial alpha

    LS2 compares ||grad f(x_k + alpha d) - grad f(x_k)|| with gamma ||d||,
    the trial alpha cancelled from both sides.

    Raises:
        UsageError: Unknown variant
        NumericalError: Non-finite oracle value at the trial point
    """
    if variant not in LINESEARCH_VARIANTS:
        raise UsageError(f'unknown line search {variant}')
    target = as_vector(x_bar, model.dimension)
    d = target - model.anchor
    trial = model.anchor + alpha * d
    if variant == 'LS2':
        lhs = float(np.linalg.norm(obj.smooth.gradient(trial) - model.grad_at_anchor))
        rhs = gamma * float(np.linalg.norm(d))
    else:
        linear = float(model.grad_at_anchor @ d)
        f_trial = float(obj.smooth.value(trial))
        if variant == 'LS4':
            lhs = f_trial - model.f_at_anchor
            rhs = alpha * (linear + 0.5 * gamma * metric_norm_sq(model.metric, d))
        else:
            g_trial = float(obj.regularizer.value(trial)) if obj.regularizer.in_domain(trial) else np.inf
            lhs = (f_trial + g_trial) - model.F_at_anchor
            delta = linear + float(obj.regularizer.value(target)) - model.g_at_anchor
            if variant == 'LS1':
                rhs = gamma * alpha * delta
            else:
                rhs = alpha * (delta + 0.5 * gamma * metric_norm_sq(model.metric, d))
    if not (np.isfinite(lhs) and np.isfinite(rhs)):
        raise NumericalError(f'{variant} condition is non-finite at alpha={alpha}', [lhs, rhs])
    return lhs, rhs


def ls_condition(variant: str, obj: ObjectiveSplit, model: SubproblemModel, x_bar,
                 alpha: float, gamma: float) -> bool:
    """Acceptance test lhs <= rhs with absolute slack LS_SLACK"""
    lhs, rhs = ls_terms(variant, obj, model, x_bar, alpha, gamma)
    return lhs <= rhs + LS_SLACK


def backtrack(spec: LineSearchSpec, obj: ObjectiveSplit, model: SubproblemModel, x_bar,
              m: Optional[float] = None) -> LineSearchOutcome:
    """Largest alpha in {alpha_bar, alpha_bar*beta, ...} passing the variant's test

    Raises:
        LineSearchFailure: When max_trials stepsizes are all rejected
    """
    if m is not None:
        spec.validate(m)
    target = as_vector(x_bar, model.dimension)
    if not np.any(target != model.anchor):
        return LineSearchOutcome(alpha=spec.alpha_bar, trials=1,
                                 accepted_condition_lhs=0.0, accepted_condition_rhs=0.0)
    alpha, lhs, rhs = spec.alpha_bar, np.nan, np.nan
    for trial in range(spec.max_trials):
        alpha = spec.alpha_bar * spec.beta ** trial
        lhs, rhs = ls_terms(spec.variant, obj, model, target, alpha, spec.gamma)
        if lhs <= rhs + LS_SLACK:
            return LineSearchOutcome(alpha=alpha, trials=trial + 1,
                                     accepted_condition_lhs=lhs, accepted_condition_rhs=rhs)
    raise LineSearchFailure(spec.variant, spec.max_trials, alpha, lhs, rhs)
