'''Inexact successive quadratic approximation with line search, plus convergence audits
'''
from .core import Metric, ObjectiveSplit, eval_F, eval_Q, make_subproblem
from .problems import ProblemInstance, catalog_instantiate
from .metric_policy import MetricPolicy, clip_spectrum
from .inner import InexactnessPolicy, inner_solve
from .linesearch import LineSearchSpec, backtrack
from .driver import IterationRecord, SolveReport, SolverConfig, sqa_run, sqa_step
from .errors import (IsqaError, UsageError, ConfigError, MetricBoundError, NumericalError,
                     LineSearchFailure, OracleFailure, ReferenceInconsistency, InconsistentFStar)
