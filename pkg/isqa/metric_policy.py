"""Metric policies producing H_k with certified bounds [m, M]
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Iterable, List, Optional, Tuple

import numpy as np

from .const import POLICY_KINDS
from .core import Metric
from .errors import UsageError

# Pairs with s'y below this fraction of ||s|| ||y|| carry no usable curvature.
_CURVATURE_FLOOR = 1e-12


def clip_spectrum(candidate, m: float, M: float) -> Metric:
    """Clamp the eigenvalues of a symmetric candidate into [m, M]

    Args:
        candidate: Symmetric matrix or Metric
        m: Lower bound, reported on the result
        M: Upper bound, reported on the result

    Raises:
        UsageError: If the candidate is not symmetric or the bounds are invalid
    """
    if not (0 < m <= M):
        raise UsageError(f'bounds must satisfy 0 < m <= M, got m={m}, M={M}')
    if isinstance(candidate, Metric):
        candidate = candidate.to_dense()
    mat = np.asarray(candidate, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise UsageError(f'candidate must be a square matrix, got shape {mat.shape}')
    scale = 1.0 + float(np.max(np.abs(mat)))
    if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-12 * scale):
        raise UsageError('candidate operator is not symmetric')
    off_diagonal = mat - np.diag(np.diag(mat))
    if not np.any(off_diagonal):
        return Metric.from_diagonal(np.clip(np.diag(mat), m, M), m=m, M=M)
    eigvals, eigvecs = np.linalg.eigh(0.5 * (mat + mat.T))
    clipped = (eigvecs * np.clip(eigvals, m, M)) @ eigvecs.T
    return Metric.from_matrix(0.5 * (clipped + clipped.T), m=m, M=M)


def secant_pairs(history: Iterable[Tuple[np.ndarray, np.ndarray]]) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Turn consecutive (x, grad f(x)) samples into (s, y) difference pairs"""
    samples = list(history)
    return [(x1 - x0, g1 - g0) for (x0, g0), (x1, g1) in zip(samples, samples[1:])]


@dataclass
class MetricPolicy:
    """Chooses H_k each outer iteration, always inside [m, M]

    Attributes:
        kind: One of scaled-identity, clipped-diagonal, clipped-secant
        m: Lower spectral bound of every produced metric
        M: Upper spectral bound of every produced metric
        tau: Step parameter of scaled-identity, H = I / tau
        memory: Number of (s, y) pairs used by clipped-secant
    """
    kind: str
    m: float = 1.0
    M: float = 1.0
    tau: Optional[float] = None
    memory: int = 5
    history: Deque[Tuple[np.ndarray, np.ndarray]] = field(default_factory=deque, repr=False)

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise UsageError(f'unknown metric policy {self.kind}, expected one of {sorted(POLICY_KINDS)}')
        if self.kind == 'scaled-identity':
            if self.tau is None or not self.tau > 0:
                raise UsageError(f'scaled-identity needs tau > 0, got {self.tau}')
            self.m = self.M = 1.0 / self.tau
        if not (0 < self.m <= self.M) or not np.isfinite(self.M):
            raise UsageError(f'metric bounds must satisfy 0 < m <= M, got m={self.m}, M={self.M}')
        if self.memory < 1:
            raise UsageError('memory must be >= 1')
        # One extra sample turns `memory` samples into `memory` pairs.
        self.history = deque(self.history, maxlen=self.memory + 1)

    @classmethod
    def scaled_identity(cls, tau: float) -> 'MetricPolicy':
        return cls(kind='scaled-identity', tau=tau)

    def clone(self) -> 'MetricPolicy':
        """Same settings, empty history"""
        return MetricPolicy(kind=self.kind, m=self.m, M=self.M, tau=self.tau, memory=self.memory)

    def observe(self, x: np.ndarray, grad: np.ndarray) -> None:
        """Record a (x, grad f(x)) sample"""
        self.history.append((np.array(x, dtype=float), np.array(grad, dtype=float)))

    def midpoint(self, dimension: int) -> Metric:
        return Metric.from_diagonal(np.full(dimension, np.sqrt(self.m * self.M)), m=self.m, M=self.M)

    def next_metric(self, history: Optional[Iterable[Tuple[np.ndarray, np.ndarray]]] = None,
                    dimension: Optional[int] = None) -> Metric:
        """Metric for the next iteration

        Args:
            history: Recent (x, grad f(x)) samples, the observed history when omitted
            dimension: Needed when the history is empty
        """
        samples = list(self.history if history is None else history)
        if dimension is None:
            if not samples:
                raise UsageError('dimension is required when the history is empty')
            dimension = samples[-1][0].shape[0]
        if self.kind == 'scaled-identity':
            return Metric.scaled_identity(1.0 / self.tau, dimension)

        pairs = secant_pairs(samples)
        if not pairs:
            return self.midpoint(dimension)
        if self.kind == 'clipped-diagonal':
            return self._diagonal_estimate(pairs[-1], dimension)
        return self._secant_estimate(pairs[-self.memory:], dimension)

    def _diagonal_estimate(self, pair, dimension) -> Metric:
        s, y = pair
        midpoint = np.sqrt(self.m * self.M)
        with np.errstate(divide='ignore', invalid='ignore'):
            ratios = np.where(s != 0, y / s, midpoint)
        ratios = np.where(np.isfinite(ratios), ratios, midpoint)
        return Metric.from_diagonal(np.clip(ratios, self.m, self.M), m=self.m, M=self.M)

    def _secant_estimate(self, pairs, dimension) -> Metric:
        usable = [(s, y) for s, y in pairs
                  if s @ y > _CURVATURE_FLOOR * np.linalg.norm(s) * np.linalg.norm(y)]
        if not usable:
            return self.midpoint(dimension)
        s_last, y_last = usable[-1]
        scale = float(np.clip((y_last @ y_last) / (s_last @ y_last), self.m, self.M))
        B = scale * np.eye(dimension)
        for s, y in usable:
            Bs = B @ s
            B = B - np.outer(Bs, Bs) / (s @ Bs) + np.outer(y, y) / (y @ s)
        return clip_spectrum(0.5 * (B + B.T), self.m, self.M)
