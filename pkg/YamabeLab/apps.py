"""
.. module:: apps
    :platform: Unix
    :synopsis: The ``yamabe-lab`` command line and the batch runs behind it.

``yamabe-lab <subcommand> --scenario <path> --out <dir>`` with the
subcommands ``oracle``, ``solve``, ``exhaust``, ``probe`` and ``report``.
Exit codes: 0 success, 2 failed assertion, 3 missing inputs, 4 solver
failure.
"""
import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import blowup_probe, cfg, storage
from .closed_forms import oracle_residual, oracle_u, oracle_v
from .elliptic_solver import convergence_study, fitted_order, matching_oracle
from .exceptions import InvalidDomain, IoError, MissingReport, YamabeLabError
from .exhaustion import rescale_and_fit, run_exhaustion
from .grids import RADIAL
from .scenario import load_scenario
from .utils import get_logger


logger = get_logger('apps')

ORACLE_COLUMNS = ('oracle', 'point', 'u', 'v', 'residual')
CONVERGENCE_COLUMNS = ('cells', 'spacing', 'error', 'residual')


def with_overrides(scenario, grid=None, tol=None):
    """Scenario with command-line solver overrides applied."""
    params = scenario.params
    if grid is not None:
        params = params.with_grid(grid)
    if tol is not None:
        params = replace(params, tol=tol)
    return replace(scenario, params=params)


def _first_index(schedule):
    return replace(schedule, radii=schedule.radii[:1], truncations=schedule.truncations[:1])


def run_rows(run, probes, verdicts=None):
    """run.csv rows: one per index and probe, or one per index without probes."""
    verdicts = verdicts or {}
    rows = []
    r = run.schedule.primary_radii
    rhat = run.schedule.coupled_radii
    for rec in run.records:
        diag = rec.diagnostics
        base = {'i': rec.index, 'r_i': r[rec.index], 'rhat_i': rhat[rec.index],
                'newton_iters': diag.get('newton_iters'), 'residual': diag.get('residual'),
                'bracket_gap': diag.get('bracket_gap'), 'm_i': rec.m,
                'sup_ric_near': rec.sup_ric_near, 'sup_ric_far': rec.sup_ric_far}
        if not probes:
            rows.append(base)
            continue
        for spec in probes:
            outcome = rec.probes.get(spec.id)
            row = dict(base)
            row['probe_id'] = spec.id
            row['probe_Rnn'] = outcome.r_nn if outcome is not None else None
            row['pinch_flag'] = bool(outcome.pinch) if outcome is not None and \
                outcome.pinch is not None else None
            verdict = verdicts.get(spec.id)
            row['verdict'] = verdict.classification if verdict is not None else None
            rows.append(row)
    return rows


def _copy_scenario(scenario, out_dir):
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, cfg.SCENARIO_COPY), 'w', encoding='utf-8') as handle:
            handle.write(scenario.source)
    except OSError as error:
        raise IoError(str(error))


def _write_fit(scenario, run, out_dir):
    fit = rescale_and_fit(run, scenario.fit.basis(scenario.n), scenario.fit.shell)
    columns = ('i', 'residual') + tuple('coef_{}'.format(k) for k in range(len(fit.names)))
    rows = []
    for rec, coef, res in zip(run.records, fit.coefficients, fit.residuals):
        row = {'i': rec.index, 'residual': res}
        row.update({'coef_{}'.format(k): c for k, c in enumerate(coef)})
        rows.append(row)
    storage.write_csv(os.path.join(out_dir, cfg.FIT_CSV), columns, rows)
    return fit


def run(scenario, out_dir, threads=None, first_only=False):
    """
    Run a scenario and write its report files.

    :param scenario: A parsed scenario.
    :type scenario: :class:`~YamabeLab.scenario.Scenario`
    :param out_dir: Output directory; created when missing.
    :param first_only: Solve index 0 only.
    :rtype: :class:`~YamabeLab.exhaustion.ExhaustionRun`

    raises:
        * IoError: If the output directory cannot be written.
    """
    _copy_scenario(scenario, out_dir)
    schedule = _first_index(scenario.schedule) if first_only else scenario.schedule
    cache = storage.FieldCache(out_dir) if scenario.cache else None
    result = run_exhaustion(schedule, scenario.params, scenario.annulus, scenario.regions,
                            scenario.probes, cache, threads)
    verdicts = blowup_probe.verdicts(result, scenario.probes)
    rows = run_rows(result, scenario.probes, verdicts)
    storage.write_run_csv(out_dir, rows)
    storage.write_plot(out_dir, rows)
    if scenario.fit is not None and len(result) > 0:
        _write_fit(scenario, result, out_dir)
    return result


def study(scenario, out_dir):
    """Refinement study of index 0 against the matching closed form."""
    dom = scenario.schedule.domain(0)
    if dom.symmetry != RADIAL:
        raise InvalidDomain('refinement studies need a radial domain with a closed form')
    result = convergence_study(dom, matching_oracle(dom), scenario.study, scenario.params)
    rows = [dict(zip(CONVERGENCE_COLUMNS, row)) for row in result.rows()]
    storage.write_csv(os.path.join(out_dir, cfg.CONVERGENCE_CSV), CONVERGENCE_COLUMNS, rows)
    if result.order is None:
        logger.warning('No convergence order over grids %s: errors are at solver noise.',
                       scenario.study)
    else:
        logger.info('Convergence order %.3f over grids %s.', result.order, scenario.study)
    return result


def oracle(scenario, out_dir):
    """Evaluate the configured closed forms at their points."""
    rows = []
    for spec, points in scenario.oracles:
        pts = np.asarray(points, dtype=float)
        u = oracle_u(spec, pts)
        v = oracle_v(spec, pts)
        res = oracle_residual(spec, pts)
        for p, a, b, c in zip(points, u, v, res):
            rows.append({'oracle': spec.kind, 'point': ' '.join(repr(t) for t in p),
                         'u': a, 'v': b, 'residual': c})
    storage.write_csv(os.path.join(out_dir, cfg.ORACLE_CSV), ORACLE_COLUMNS, rows)
    return rows


def probe(scenario, out_dir, threads=None):
    """
    Rerun the probes on cached fields only.

    raises:
        * MissingReport: If any index has no record or a stale one.
    """
    cache = storage.FieldCache(out_dir)
    schedule = scenario.schedule
    missing = sorted(set(range(len(schedule))) - set(cache.indices()))
    if missing:
        raise MissingReport('no field records for indices {} in {}'.format(missing, out_dir))
    for i in range(len(schedule)):
        if cache.load(i, schedule.domain(i), scenario.params) is None:
            raise MissingReport('no cached field for index {} in {}'.format(i, out_dir))
    return run(replace(scenario, cache=True), out_dir, threads)


# REPORT

def _column(rows, name):
    seen = {}
    for row in rows:
        seen.setdefault(int(row['i']), storage.number(row.get(name)))
    return np.array([seen[i] for i in sorted(seen)])


def fitted_exponent(rows):
    """Log-log slope of ``m_i`` against ``r_i``, or None."""
    r = _column(rows, 'r_i')
    m = _column(rows, 'm_i')
    ok = np.isfinite(r) & np.isfinite(m) & (r > 0) & (m > 0)
    if np.sum(ok) < 2:
        return None
    slope, _ = np.polyfit(np.log(r[ok]), np.log(m[ok]), 1)
    return float(slope)


def _verdicts(rows):
    found = {}
    for row in rows:
        if row.get('probe_id') and row.get('verdict'):
            found[row['probe_id']] = row['verdict']
    return found


def _check(assertion, rows, verdicts, slope):
    kind = assertion['kind']
    if kind == 'verdict':
        got = verdicts.get(assertion['probe_id'])
        return got == assertion['expect'], 'verdict {} = {}'.format(assertion['probe_id'], got)
    if kind == 'slope':
        lo = assertion.get('min', -np.inf)
        hi = assertion.get('max', np.inf)
        ok = slope is not None and lo <= slope <= hi
        return ok, 'slope {} in [{}, {}]'.format(slope, lo, hi)
    values = _column(rows, assertion['column'])
    values = values[np.isfinite(values)]
    if kind == 'range':
        lo = assertion.get('min', -np.inf)
        hi = assertion.get('max', np.inf)
        ok = values.size > 0 and bool(np.all((values >= lo) & (values <= hi)))
        return ok, '{} in [{}, {}]'.format(assertion['column'], lo, hi)
    ok = values.size > 1 and bool(np.all(np.diff(values) > 0))
    return ok, '{} increasing'.format(assertion['column'])


def report(out_dir, out=sys.stdout):
    """
    Print a summary of a run directory and evaluate its assertions.

    :rtype: exit code, 0 when every assertion passes and 2 otherwise.

    raises:
        * MissingReport: If run.csv is absent.
    """
    rows = storage.read_run_csv(out_dir)
    if not rows:
        raise MissingReport('run.csv in {} has no rows'.format(out_dir))
    verdicts = _verdicts(rows)
    for pid in sorted(verdicts):
        out.write('{}: {}\n'.format(pid, verdicts[pid]))
    if verdicts and all(v == blowup_probe.BOUNDED for v in verdicts.values()):
        out.write('all probes bounded\n')
    for name in ('sup_ric_near', 'sup_ric_far'):
        values = _column(rows, name)
        values = values[np.isfinite(values)]
        if values.size:
            out.write('{} range [{!r}, {!r}]\n'.format(name, float(values.min()),
                                                     float(values.max())))
    slope = fitted_exponent(rows)
    if slope is not None:
        out.write('m_i exponent {!r}\n'.format(slope))
    conv = os.path.join(out_dir, cfg.CONVERGENCE_CSV)
    if os.path.exists(conv):
        crow = storage.read_csv(conv)
        h = [float(r['spacing']) for r in crow]
        e = [float(r['error']) for r in crow]
        order = fitted_order(h, e)
        if order is not None:
            out.write('convergence order {!r}\n'.format(order))
        elif e:
            out.write('convergence exact on every grid\n')
    assertions = ()
    copy = os.path.join(out_dir, cfg.SCENARIO_COPY)
    if os.path.exists(copy):
        assertions = load_scenario(copy).assertions
    failed = 0
    for assertion in assertions:
        ok, text = _check(assertion, rows, verdicts, slope)
        out.write('{} {}\n'.format('PASS' if ok else 'FAIL', text))
        failed += not ok
    return cfg.EXIT_OK if not failed else cfg.EXIT_ASSERTION


# COMMAND LINE

def build_parser():
    parser = argparse.ArgumentParser(prog='yamabe-lab',
                                     description='Singular Yamabe numerical lab.')
    parser.add_argument('subcommand', choices=('oracle', 'solve', 'exhaust', 'probe', 'report'))
    parser.add_argument('--scenario', help='TOML scenario file')
    parser.add_argument('--out', help='output directory')
    parser.add_argument('--threads', type=int, default=None)
    parser.add_argument('--grid', type=int, default=None)
    parser.add_argument('--tol', type=float, default=None)
    return parser


def _load(args):
    if not args.scenario or not os.path.exists(args.scenario):
        raise MissingReport('scenario file {!r} not found'.format(args.scenario))
    scenario = load_scenario(args.scenario)
    return with_overrides(scenario, args.grid, args.tol)


def main(argv=None, out=sys.stdout):
    args = build_parser().parse_args(argv)
    try:
        if args.subcommand == 'report':
            if not args.out:
                raise MissingReport('report needs --out')
            return report(args.out, out)
        scenario = _load(args)
        out_dir = args.out or scenario.out_dir
        if not out_dir:
            raise MissingReport('no output directory given')
        if args.subcommand == 'oracle':
            oracle(scenario, out_dir)
        elif args.subcommand == 'solve':
            run(scenario, out_dir, args.threads, first_only=True)
            if scenario.study:
                study(scenario, out_dir)
        elif args.subcommand == 'exhaust':
            run(scenario, out_dir, args.threads)
        else:
            probe(scenario, out_dir, args.threads)
    except YamabeLabError as error:
        logger.error('%s', error)
        return error.exit_code
    except ValueError as error:
        logger.error('%s', error)
        return cfg.EXIT_MISSING
    return cfg.EXIT_OK


def entry_point():
    sys.exit(main())

