"""Constants for the inexact SQA solver and its audits
"""

# Absolute slack for line-search acceptance tests, lets analytically tight cases pass.
LS_SLACK: float = 1e-12

# Audit slack, scaled by (1 + |F_k|) at the point of use.
AUDIT_SLACK: float = 1e-10

# Relative allowance on declared metric bounds.
METRIC_BOUND_RTOL: float = 1e-9

DEFAULT_MAX_TRIALS: int = 200

# Oracle defaults.
ORACLE_MAX_STEPS: int = 10**6
ORACLE_TOL: float = 1e-14
REFERENCE_TOL: float = 1e-12

# Diagnostics thresholds for asymptotic audits.
DECAY_RATIO: float = 0.1
NUMERICAL_FLOOR: float = 1e-14

LINESEARCH_VARIANTS = {'LS1', 'LS2', 'LS3', 'LS4'}

POLICY_KINDS = {'scaled-identity', 'clipped-diagonal', 'clipped-secant'}

INNER_MODES = {'certificate', 'fixed-count', 'exact'}

CATALOG_NAMES = {'sc-quadratic-l1',
                 'logistic-l1',
                 'quartic',
                 'qg-not-ossc',
                 'counterexample-region',
                 'fbs-reference'}

SUPPORTED_AUDITS = ('lemma3', 'lemma2', 'inexact_decrease', 'thm2_bound', 'floor', 'a4')

DIRECTION_TOLERANCE = 'direction-tolerance'
FGAP_TOLERANCE = 'fgap-tolerance'
MAX_OUTER = 'max-outer'
ERROR = 'error'

TRACE_COLUMNS = ('k',
                 'F_k',
                 'fgap',
                 'alpha_k',
                 'dir_norm',
                 'dir_norm_metric',
                 'Q_bar',
                 'inner_iters',
                 'certified',
                 'ls_trials',
                 'dist_to_X')

# (instance, dimension, seed) rows rebuilt by `isqa fixtures --regen`.
FIXTURE_SET = (('sc-quadratic-l1', 5, 42),
               ('sc-quadratic-l1', 20, 7),
               ('logistic-l1', 5, 42),
               ('quartic', 3, 0),
               ('qg-not-ossc', 1, 0))

FIXTURE_FILE = 'reference_solutions.csv'
FIXTURE_VERSION = 1
