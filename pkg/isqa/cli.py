#! /usr/local/bin/python
"""Benchmark harness command line
"""
import argparse
import csv
import json
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from colorama import init, Fore, Back, Style

from .config import HarnessSettings, parse_audits, parse_config
from .const import ERROR, FIXTURE_FILE, TRACE_COLUMNS
from .diagnostics import (SubproblemAuditor, qlinear_ratio, run_audits, sublinear_score,
                          sublinear_verdict)
from .driver import IterationRecord, SolveReport, SolverConfig, sqa_run
from .errors import IsqaError, UsageError
from .oracle import read_fixtures, regen_fixtures

# init colorama
init(autoreset=True)

SUMMARY_FILE = 'summary.jsonl'

_INT_COLUMNS = {'k', 'inner_iters', 'ls_trials'}
_OPTIONAL_COLUMNS = {'fgap', 'dist_to_X'}


def _format_cell(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return '1' if value else '0'
    if isinstance(value, int):
        return str(value)
    return f'{value:.17g}'


def trace_columns(include_fgap: bool) -> List[str]:
    return [c for c in TRACE_COLUMNS if include_fgap or c != 'fgap']


def emit_trace(report: SolveReport, path: Union[str, Path], include_fgap: Optional[bool] = None) -> Path:
    """Write one CSV row per record, 17 significant digits

    The fgap column is written only when the optimal value is known, which
    defaults to whether any record carries an fgap.
    """
    if include_fgap is None:
        include_fgap = any(r.fgap is not None for r in report.records)
    columns = trace_columns(include_fgap)
    path = Path(path)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for record in report.records:
            writer.writerow([_format_cell(getattr(record, column)) for column in columns])
    return path


def _parse_cell(column: str, text: str) -> Any:
    if column in _OPTIONAL_COLUMNS and text == '':
        return None
    if column == 'certified':
        return text == '1'
    if column in _INT_COLUMNS:
        return int(text)
    return float(text)


def read_trace(path: Union[str, Path]) -> List[IterationRecord]:
    """Parse a trace written by emit_trace back into records

    Raises:
        UsageError: Header does not match the trace columns
    """
    with Path(path).open(newline='') as handle:
        reader = csv.reader(handle)
        header = next(reader, [])
        if header not in (trace_columns(True), trace_columns(False)):
            raise UsageError(f'unexpected trace header {header}')
        records = []
        for row in reader:
            values = {column: _parse_cell(column, text) for column, text in zip(header, row)}
            values.setdefault('fgap', None)
            records.append(IterationRecord(**values))
    return records


def _trace_name(name: str) -> str:
    return re.sub(r'[^A-Za-z0-9_.=+-]', '_', name) + '.csv'


def run_single(config: SolverConfig, out_dir: Path) -> Dict[str, Any]:
    """Solve one config, write its trace and return its summary row"""
    problem = config.problem
    summary: Dict[str, Any] = {'name': config.name,
                               'problem': problem.name,
                               'dimension': problem.dimension,
                               'seed': config.seed,
                               'policy': config.metric_policy.kind,
                               'variant': config.linesearch.variant,
                               'eta': config.effective_eta,
                               'mode': config.inexactness.mode}
    auditor = SubproblemAuditor(config) if 'a4' in config.audits else None
    report = sqa_run(config, observer=auditor)
    summary.update({'termination_reason': report.termination_reason,
                    'error': report.error,
                    'iterations': len(report.records),
                    'total_inner_iterations': report.total_inner_iterations,
                    'uncertified': sum(1 for r in report.records if not r.certified),
                    'final_F': report.final_F})
    try:
        trace = emit_trace(report, out_dir / _trace_name(config.name),
                           include_fgap=problem.known_F_star is not None)
        summary['trace'] = str(trace)
    except OSError as error:
        summary.update({'termination_reason': ERROR, 'error': f'trace write failed: {error}'})

    if problem.known_F_star is not None:
        summary['final_fgap'] = report.final_F - problem.known_F_star
        try:
            rates = qlinear_ratio(report, problem.known_F_star, burn_in=len(report.records) // 5)
            summary['tail_q_max'] = rates.tail_q_max
            summary['sublinear'] = sublinear_verdict(sublinear_score(report, problem.known_F_star))
        except IsqaError as error:
            summary['rate_error'] = str(error)

    audits = {}
    if config.audits and report.termination_reason != ERROR:
        try:
            for result in run_audits(report, config, config.audits, auditor):
                audits[result.name] = 'skipped' if result.skipped else (
                    'pass' if result.passed else f'fail ({len(result.violations)} violations)')
        except IsqaError as error:
            audits['error'] = str(error)
    summary['audits'] = audits
    summary['ok'] = (summary['termination_reason'] != ERROR
                     and all(v in ('pass', 'skipped') for v in audits.values()))
    return summary


def _print_summary(summary: Dict[str, Any]) -> None:
    line = (f"{summary['name']}: {summary['termination_reason']} after {summary['iterations']} "
            f"iterations, F={summary['final_F']:.6e}")
    if not summary['ok']:
        detail = summary.get('error') or ', '.join(f'{k}={v}' for k, v in summary['audits'].items())
        print(f'{Back.RED}{Fore.YELLOW}FAILED {line} -> {detail}')
    elif summary['uncertified']:
        print(f"{Fore.YELLOW}{line} ({summary['uncertified']} uncertified inner solves)")
    else:
        print(f'{Fore.GREEN}{line}')


def run_benchmark(configs: Sequence[SolverConfig], out_dir: Union[str, Path], jobs: int = 1) -> int:
    """Run every config, write traces plus summary.jsonl; nonzero iff any run failed"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        summaries = list(pool.map(lambda config: run_single(config, out_dir), configs))
    summary_path = out_dir / SUMMARY_FILE
    with summary_path.open('w') as handle:
        for summary in summaries:
            print(json.dumps(summary, sort_keys=True), file=handle)
    for summary in summaries:
        _print_summary(summary)
    failed = sum(1 for s in summaries if not s['ok'])
    colour = Fore.GREEN if not failed else Fore.RED
    print(f'{colour}{Style.BRIGHT}{len(summaries) - failed}/{len(summaries)} runs passed')
    print(f'{Fore.GREEN}{Style.BRIGHT}Summary written to {summary_path}')
    return 1 if failed else 0


def run_run(args: argparse.Namespace) -> int:
    """Run"""
    settings = HarnessSettings.build(seed=args.seed, jobs=args.jobs, audits=args.audits)
    configs = parse_config(args.config, settings)
    return run_benchmark(configs, args.out, settings.jobs)


def run_audit(args: argparse.Namespace) -> int:
    """Re-run the record-based audits on a stored trace"""
    configs = parse_config(args.spec, HarnessSettings.build())
    wanted = args.run or Path(args.trace).stem
    matches = [c for c in configs if c.name == wanted or _trace_name(c.name) == Path(args.trace).name]
    if not matches and len(configs) == 1:
        matches = configs
    if not matches:
        print(f'{Fore.RED}No run named {wanted} in {args.spec}')
        return 2
    config = matches[0]
    records = read_trace(args.trace)
    report = SolveReport(final_point=config.problem.x0, final_F=None, records=records,
                         termination_reason='trace',
                         total_inner_iterations=sum(r.inner_iters for r in records),
                         name=config.name)
    names = parse_audits(args.audits) if args.audits else (config.audits or parse_audits('all'))
    failed = 0
    for result in run_audits(report, config, names):
        if result.skipped:
            print(f'{Fore.BLUE}{Style.DIM}{result.name}: skipped ({result.detail})')
        elif result.passed:
            print(f'{Fore.GREEN}{result.name}: pass ({result.checked} checked)')
        else:
            failed += 1
            print(f'{Back.RED}{Fore.YELLOW}{result.name}: FAIL at k={result.violations[:10]}')
    return 1 if failed else 0


def run_fixtures(args: argparse.Namespace) -> int:
    """Rebuild or list reference fixtures"""
    directory = Path(args.dir or HarnessSettings.build().fixtures_dir)
    if args.regen:
        path = regen_fixtures(directory, force=args.force)
        print(f'{Fore.GREEN}{Style.BRIGHT}Fixtures written to {path}')
        return 0
    for record in read_fixtures(directory / FIXTURE_FILE):
        print(f'{record.instance} n={record.dimension} seed={record.seed} F*={record.F_star:.17g}')
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Operate the isqa benchmark harness from the command line"""

    parser = argparse.ArgumentParser(
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description='''Benchmark harness for inexact successive quadratic approximation.

Set ISQA_SEED to override every seed in a config file, e.g.
'export ISQA_SEED=7'
''')

    subparsers = parser.add_subparsers(help='isqa commands')

    run_parser = subparsers.add_parser('run', help='Run every config in a file')
    run_parser.set_defaults(func=run_run)
    run_parser.add_argument('--config', required=True, help='JSON experiment config')
    run_parser.add_argument('--out', required=True, help='Output directory for traces and summary')
    run_parser.add_argument('--jobs', type=int, default=None, help='Parallel runs')
    run_parser.add_argument('--audits', default=None, help='all, none or a comma separated list')
    run_parser.add_argument('--seed', type=int, default=None, help='Override every seed')

    audit_parser = subparsers.add_parser('audit', help='Audit a stored trace')
    audit_parser.set_defaults(func=run_audit)
    audit_parser.add_argument('--trace', required=True, help='Trace CSV written by run')
    audit_parser.add_argument('--spec', required=True, help='Config the trace was produced from')
    audit_parser.add_argument('--run', default=None, help='Run name, defaults to the trace file stem')
    audit_parser.add_argument('--audits', default=None, help='all, none or a comma separated list')

    fixtures_parser = subparsers.add_parser('fixtures', help='List or rebuild oracle fixtures')
    fixtures_parser.set_defaults(func=run_fixtures)
    fixtures_parser.add_argument('--regen', action='store_true', help='Rebuild the fixture file')
    fixtures_parser.add_argument('--force', action='store_true', help='Overwrite existing fixtures')
    fixtures_parser.add_argument('--dir', default=None, help='Fixture directory')

    args = parser.parse_args(argv)
    if not hasattr(args, 'func'):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except IsqaError as error:
        print(f'{Back.RED}{Fore.YELLOW}Error -> {error}')
        return 2
    except OSError as error:
        print(f'{Back.RED}{Fore.YELLOW}Error -> {error}')
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
