"""Exceptions raised by the isqa library
"""
from typing import Any, Optional, Sequence


class IsqaError(Exception):
    """Base class for every error raised by isqa"""


class UsageError(IsqaError, ValueError):
    """Invalid argument, dimension mismatch or domain violation"""


class ConfigError(UsageError):
    """Config file violates its schema or a cross-field rule

    Attributes:
        key: Dotted name of the offending key
        message: Constraint that was violated
    """

    def __init__(self, key: str, message: str):
        super().__init__(f'{key}: {message}')
        self.key: str = key
        self.message: str = message

    def __repr__(self) -> str:
        return f'ConfigError({self.key}, {self.message})'


class MetricBoundError(IsqaError):
    """A metric's Rayleigh quotient escaped its declared bounds [m, M]

    Attributes:
        vector: Probe vector that produced the offending quotient
        quotient: Observed <v, Hv> / <v, v>
        m: Declared lower bound
        M: Declared upper bound
    """

    def __init__(self, vector, quotient: float, m: float, M: float):
        message = (f'Rayleigh quotient {quotient:.17g} outside declared bounds '
                   f'[{m:.17g}, {M:.17g}] at vector {list(vector)}')
        super().__init__(message)
        self.vector = vector
        self.quotient: float = quotient
        self.m: float = m
        self.M: float = M

    def __repr__(self) -> str:
        return f'MetricBoundError({self.quotient}, {self.m}, {self.M})'


class NumericalError(IsqaError):
    """Non-finite value met during a solve

    Attributes:
        message: What went wrong
        dump: Values recorded up to the failure, most recent last
    """

    def __init__(self, message: str, dump: Optional[Sequence[Any]] = None):
        super().__init__(message)
        self.message: str = message
        self.dump: list = list(dump) if dump is not None else []

    def __repr__(self) -> str:
        return f'NumericalError({self.message}, dump={self.dump[-5:]})'


class LineSearchFailure(IsqaError):
    """Backtracking exhausted its trial budget

    Attributes:
        variant: Line-search variant
        trials: Number of trials performed
        alpha: Last trial stepsize
        lhs: Left-hand side of the last acceptance test
        rhs: Right-hand side of the last acceptance test
    """

    def __init__(self, variant: str, trials: int, alpha: float, lhs: float, rhs: float):
        message = (f'{variant} rejected {trials} trial stepsizes down to alpha={alpha:.3e} '
                   f'(lhs={lhs:.6e}, rhs={rhs:.6e}), suspect an oracle bug '
                   'or numerical breakdown')
        super().__init__(message)
        self.variant: str = variant
        self.trials: int = trials
        self.alpha: float = alpha
        self.lhs: float = lhs
        self.rhs: float = rhs

    def __repr__(self) -> str:
        return f'LineSearchFailure({self.variant}, {self.trials}, {self.alpha})'


class OracleFailure(IsqaError):
    """Reference computation did not converge"""


class ReferenceInconsistency(OracleFailure):
    """Two independent F* references disagree

    Attributes:
        instance: Catalog instance name
        first: F* from the driver-based reference
        second: F* from the independent method
    """

    def __init__(self, instance: str, first: float, second: float):
        message = (f'reference solutions for {instance} disagree: '
                   f'{first:.17g} vs {second:.17g}')
        super().__init__(message)
        self.instance: str = instance
        self.first: float = first
        self.second: float = second

    def __repr__(self) -> str:
        return f'ReferenceInconsistency({self.instance}, {self.first}, {self.second})'


class InconsistentFStar(IsqaError):
    """An audited objective value lies below the supplied optimal value

    Attributes:
        k: Iteration index of the offending value
        F_k: Offending objective value
        F_star: Supplied optimal value
    """

    def __init__(self, k: int, F_k: float, F_star: float):
        message = f'F_{k} = {F_k:.17g} lies below F* = {F_star:.17g}'
        super().__init__(message)
        self.k: int = k
        self.F_k: float = F_k
        self.F_star: float = F_star

    def __repr__(self) -> str:
        return f'InconsistentFStar({self.k}, {self.F_k}, {self.F_star})'
