"""Harness settings and experiment config parsing
"""
import copy
import itertools
import json
from dataclasses import dataclass, field
from os import getenv
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from dacite import Config, DaciteError, DaciteFieldError, UnexpectedDataError, from_dict

from .const import DEFAULT_MAX_TRIALS, SUPPORTED_AUDITS
from .driver import SolverConfig
from .errors import ConfigError, UsageError
from .inner import InexactnessPolicy
from .linesearch import LineSearchSpec
from .metric_policy import MetricPolicy
from .problems import ProblemInstance, catalog_instantiate

try:
    from dotenv import load_dotenv # type: ignore
    load_dotenv()
except ModuleNotFoundError:
    pass

_DACITE_CONFIG = Config(strict=True, type_hooks={float: float})


def parse_audits(value: Union[str, List[str], Tuple[str, ...]]) -> Tuple[str, ...]:
    """'all', 'none' or a comma separated subset of the supported audits"""
    if isinstance(value, str):
        if value == 'all':
            return tuple(SUPPORTED_AUDITS)
        if value in ('none', ''):
            return ()
        value = [name.strip() for name in value.split(',') if name.strip()]
    unknown = [name for name in value if name not in SUPPORTED_AUDITS]
    if unknown:
        raise ConfigError('audits', f'unknown audits {unknown}, expected a subset of {list(SUPPORTED_AUDITS)}')
    return tuple(value)


@dataclass
class HarnessSettings:
    """Process-wide benchmark settings

    Attributes:
        seed: Overrides every problem and run seed when set
        jobs: Worker threads for independent runs
        audits: Overrides the per-run audit lists when set
        fixtures_dir: Where reference fixtures are read and written
    """
    seed: Optional[int] = None
    jobs: int = 1
    audits: Optional[Tuple[str, ...]] = None
    fixtures_dir: str = 'fixtures'

    @classmethod
    def build(cls,
              seed: Optional[int] = None,
              jobs: Optional[int] = None,
              audits: Optional[Union[str, List[str]]] = None,
              fixtures_dir: Optional[str] = None,
              file_name: Optional[str] = None,
              read_env: bool = True) -> 'HarnessSettings':
        """Build settings with hierarchical loading

        Configuration priority (highest to lowest):
        1. Values specified as arguments to build()
        2. Values from file specified by file_name parameter
        3. Values from individual environment variables (if read_env=True)
        4. Values from settings file specified by ISQA_SETTINGS_FILE env var
        5. Default values

        Raises:
            ConfigError: If a value cannot be converted or is out of range
        """
        settings = cls._get_default_settings()
        if read_env:
            settings.update(cls._load_settings_from_env_file())
            settings.update(cls._load_settings_from_env_vars())
        if file_name:
            settings.update(cls._load_settings_file(file_name))
        settings.update({key: value for key, value in
                         (('seed', seed), ('jobs', jobs), ('audits', audits), ('fixtures_dir', fixtures_dir))
                         if value is not None})

        if settings['audits'] is not None:
            settings['audits'] = parse_audits(settings['audits'])
        if int(settings['jobs']) < 1:
            raise ConfigError('jobs', 'jobs must be >= 1')
        return cls(seed=None if settings['seed'] is None else int(settings['seed']),
                   jobs=int(settings['jobs']),
                   audits=settings['audits'],
                   fixtures_dir=str(settings['fixtures_dir']))

    @staticmethod
    def _get_default_settings() -> Dict[str, Any]:
        return {'seed': None, 'jobs': 1, 'audits': None, 'fixtures_dir': 'fixtures'}

    @staticmethod
    def _load_settings_from_env_file() -> Dict[str, Any]:
        """Load settings from the ISQA_SETTINGS_FILE environment variable"""
        file_path = getenv('ISQA_SETTINGS_FILE')
        if file_path:
            return HarnessSettings._load_settings_file(file_path)
        return {}

    @staticmethod
    def _load_settings_from_env_vars() -> Dict[str, Any]:
        settings: Dict[str, Any] = {}
        HarnessSettings._add_env_var(settings, 'ISQA_SEED', 'seed', int)
        HarnessSettings._add_env_var(settings, 'ISQA_JOBS', 'jobs', int)
        HarnessSettings._add_env_var(settings, 'ISQA_AUDITS', 'audits', str)
        HarnessSettings._add_env_var(settings, 'ISQA_FIXTURES_DIR', 'fixtures_dir', str)
        return settings

    @staticmethod
    def _add_env_var(settings: Dict[str, Any], env_name: str, key: str, converter) -> None:
        """Add an environment variable to the settings dict if it is set"""
        value = getenv(env_name)
        if value:
            try:
                settings[key] = converter(value)
            except ValueError as error:
                raise ConfigError(env_name, f'cannot parse {value!r}: {error}') from error

    @staticmethod
    def _load_settings_file(file_path: str) -> Dict[str, Any]:
        """Load settings from a JSON file; unknown keys are rejected"""
        path = Path(file_path)
        if not path.exists():
            return {}
        try:
            with open(path, 'r') as handle:
                data = json.load(handle)
        except json.JSONDecodeError as error:
            raise ConfigError(str(path), f'invalid JSON: {error}') from error
        unknown = set(data) - {'seed', 'jobs', 'audits', 'fixtures_dir'}
        if unknown:
            raise ConfigError(sorted(unknown)[0], 'unknown settings key')
        return data


# Config file schema

@dataclass
class ProblemSection:
    name: str
    dimension: int = 5
    seed: Optional[int] = None


@dataclass
class PolicySection:
    kind: str = 'scaled-identity'
    m: Optional[float] = None
    M: Optional[float] = None
    tau: Optional[float] = None
    memory: int = 5


@dataclass
class InexactnessSection:
    eta: float = 0.9
    mode: str = 'certificate'
    n_inner: Optional[int] = None
    sigma: Optional[float] = None
    max_iterations: Optional[int] = None
    near_exact_tol: Optional[float] = None


@dataclass
class LineSearchSection:
    variant: str = 'LS3'
    beta: float = 0.5
    gamma: float = 0.5
    alpha_bar: float = 1.0
    max_trials: int = DEFAULT_MAX_TRIALS


@dataclass
class RunSection:
    name: str
    problem: ProblemSection
    metric_policy: PolicySection = field(default_factory=PolicySection)
    inexactness: InexactnessSection = field(default_factory=InexactnessSection)
    linesearch: LineSearchSection = field(default_factory=LineSearchSection)
    max_outer: int = 1000
    tol_direction: float = 1e-10
    tol_fgap: Optional[float] = None
    seed: Optional[int] = None
    audits: List[str] = field(default_factory=list)
    keep_iterates: bool = False


def _format_value(value: Any) -> str:
    return format(value, 'g') if isinstance(value, float) else str(value)


def expand_sweep(run: Dict[str, Any]) -> List[Dict[str, Any]]:
    """Cartesian expansion of a run's `sweep` block over dotted paths

    Expanded runs are named <name>__<leaf>=<value> for every swept path.
    """
    run = dict(run)
    sweep = run.pop('sweep', None)
    if not sweep:
        return [run]
    name = run.get('name', 'run')
    if not isinstance(sweep, dict):
        raise ConfigError(f'{name}.sweep', 'sweep must map dotted paths to value lists')
    for path, values in sweep.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f'{name}.sweep.{path}', 'sweep values must be a non-empty list')
    paths = list(sweep)
    expanded = []
    for combination in itertools.product(*(sweep[path] for path in paths)):
        variant = copy.deepcopy(run)
        suffix = []
        for path, value in zip(paths, combination):
            keys = path.split('.')
            section = variant
            for key in keys[:-1]:
                section = section.setdefault(key, {})
                if not isinstance(section, dict):
                    raise ConfigError(f'{name}.sweep.{path}', f'{key} is not a section')
            section[keys[-1]] = value
            suffix.append(f'{keys[-1]}={_format_value(value)}')
        variant['name'] = '__'.join([name] + suffix)
        expanded.append(variant)
    return expanded


def _dacite_error(prefix: str, error: DaciteError) -> ConfigError:
    if isinstance(error, UnexpectedDataError):
        key = ','.join(sorted(error.keys))
        return ConfigError(f'{prefix}.{key}', f'unknown key {key}')
    if isinstance(error, DaciteFieldError) and error.field_path:
        return ConfigError(f'{prefix}.{error.field_path}', str(error))
    return ConfigError(prefix, str(error))


class _InstanceCache:
    """Instances shared by runs naming the same (problem, dimension, seed)"""

    def __init__(self):
        self._instances: Dict[Tuple[str, int, int], ProblemInstance] = {}

    def get(self, name: str, dimension: int, seed: int) -> ProblemInstance:
        key = (name, dimension, seed)
        if key not in self._instances:
            self._instances[key] = catalog_instantiate(name, dimension, seed)
        return self._instances[key]


def _build_policy(section: PolicySection, instance: ProblemInstance) -> MetricPolicy:
    if section.kind == 'scaled-identity':
        tau = section.tau
        if tau is None:
            L = instance.objective.smooth.lipschitz or instance.known_local_L
            tau = 1.0 / L if L else 1.0
        return MetricPolicy.scaled_identity(tau)
    if section.m is None or section.M is None:
        raise UsageError(f'{section.kind} needs both m and M')
    return MetricPolicy(kind=section.kind, m=section.m, M=section.M, memory=section.memory)


def build_solver_config(run: RunSection, settings: HarnessSettings, cache: _InstanceCache,
                        file_seed: Optional[int] = None) -> SolverConfig:
    """Turn one parsed run into a SolverConfig

    Raises:
        ConfigError: Naming the section whose rule was violated
    """
    seed = next((s for s in (settings.seed, run.seed, file_seed) if s is not None), 0)
    problem_seed = settings.seed if settings.seed is not None else (
        run.problem.seed if run.problem.seed is not None else seed)
    try:
        instance = cache.get(run.problem.name, run.problem.dimension, problem_seed)
    except UsageError as error:
        raise ConfigError(f'{run.name}.problem', str(error)) from error
    try:
        policy = _build_policy(run.metric_policy, instance)
    except UsageError as error:
        raise ConfigError(f'{run.name}.metric_policy', str(error)) from error
    try:
        inexactness = InexactnessPolicy(**vars(run.inexactness))
    except UsageError as error:
        raise ConfigError(f'{run.name}.inexactness', str(error)) from error
    try:
        linesearch = LineSearchSpec(**vars(run.linesearch))
        linesearch.validate(policy.m)
    except UsageError as error:
        raise ConfigError(f'{run.name}.linesearch.gamma' if 'gamma' in str(error)
                          else f'{run.name}.linesearch', str(error)) from error
    if not run.tol_direction >= 0:
        raise ConfigError(f'{run.name}.tol_direction', 'tol_direction must be >= 0')
    if run.tol_fgap is not None and not run.tol_fgap > 0:
        raise ConfigError(f'{run.name}.tol_fgap', 'tol_fgap must be positive')
    audits = settings.audits if settings.audits is not None else parse_audits(run.audits)
    try:
        return SolverConfig(problem=instance,
                            metric_policy=policy,
                            inexactness=inexactness,
                            linesearch=linesearch,
                            max_outer=run.max_outer,
                            tol_direction=run.tol_direction,
                            tol_fgap=run.tol_fgap,
                            seed=seed,
                            name=run.name,
                            audits=audits,
                            keep_iterates=run.keep_iterates)
    except UsageError as error:
        raise ConfigError(run.name, str(error)) from error


def parse_config_data(data: Dict[str, Any], settings: Optional[HarnessSettings] = None) -> List[SolverConfig]:
    """Validate a decoded config object and expand it into solver configs"""
    settings = HarnessSettings() if settings is None else settings
    if not isinstance(data, dict):
        raise ConfigError('config', 'top level must be an object')
    unknown = set(data) - {'runs', 'seed'}
    if unknown:
        raise ConfigError(sorted(unknown)[0], 'unknown key')
    runs = data.get('runs')
    if not isinstance(runs, list):
        raise ConfigError('runs', 'runs must be a list')
    file_seed = data.get('seed')
    if file_seed is not None and not isinstance(file_seed, int):
        raise ConfigError('seed', 'seed must be an integer')

    cache = _InstanceCache()
    configs = []
    for position, raw in enumerate(runs):
        if not isinstance(raw, dict):
            raise ConfigError(f'runs[{position}]', 'each run must be an object')
        for expanded in expand_sweep(raw):
            prefix = expanded.get('name', f'runs[{position}]')
            try:
                run = from_dict(RunSection, expanded, config=_DACITE_CONFIG)
            except DaciteError as error:
                raise _dacite_error(prefix, error) from error
            configs.append(build_solver_config(run, settings, cache, file_seed))
    names = [config.name for config in configs]
    duplicates = sorted({name for name in names if names.count(name) > 1})
    if duplicates:
        raise ConfigError(duplicates[0], 'run names must be unique')
    return configs


def parse_config(path: Union[str, Path], settings: Optional[HarnessSettings] = None) -> List[SolverConfig]:
    """Read a JSON experiment config into validated solver configs

    Raises:
        ConfigError: Missing file, invalid JSON, schema or cross-field violation
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(str(path), 'config file does not exist')
    try:
        with open(path, 'r') as handle:
            data = json.load(handle)
    except json.JSONDecodeError as error:
        raise ConfigError(str(path), f'invalid JSON: {error}') from error
    return parse_config_data(data, settings)
