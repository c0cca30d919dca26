"""
.. module:: scenario
    :platform: Unix
    :synopsis: TOML scenario files.

:func:`parse_scenario` validates the whole document before anything is
built, collecting every violation with its dotted key path, and raises a
single :class:`~YamabeLab.exceptions.SchemaError`.
"""
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import cfg
from .blowup_probe import (ARC, CLASSIFY, PINCH, PROBE_KINDS, SEGMENT,
                           ProbeSpec)
from .closed_forms import KINDS, Constant, GreenPole, make_oracle
from .conformal_core import FLAT, SPHERE, Background
from .elliptic_solver import SolverParams
from .exceptions import SchemaError, YamabeLabError
from .exhaustion import (AlternatingLaw, Annulus, CoupledLaw, GeometricLaw,
                         Region, TableLaw, build_schedule, resolve_radii)
from .grids import AXISYMMETRIC, RADIAL, Ball, DomainSpec, Slab, Tube
from .utils import get_logger


logger = get_logger('scenario')

ASSERTION_KINDS = ('verdict', 'range', 'increasing', 'slope')


@dataclass(frozen=True)
class FitSpec(object):
    poles: tuple
    constant: bool = True
    shell: tuple = cfg.DEFAULT_FIT_SHELL

    def basis(self, n):
        members = [GreenPole(n, p) for p in self.poles]
        if self.constant:
            members.append(Constant(n))
        return members


@dataclass(frozen=True)
class Scenario(object):
    """A validated scenario with its schedule already built."""
    name: str
    background: Background
    schedule: object
    params: SolverParams
    probes: tuple = ()
    annulus: Annulus = None
    regions: dict = None
    fit: FitSpec = None
    oracles: tuple = ()
    study: tuple = ()
    assertions: tuple = ()
    out_dir: str = None
    cache: bool = True
    source: str = field(default='', repr=False)

    @property
    def n(self):
        return self.background.n

    @property
    def base(self):
        return self.schedule.base


class _Checker(object):
    """Collects ``(key_path, reason)`` pairs while reading a document."""

    def __init__(self):
        self.violations = []

    def fail(self, path, reason):
        self.violations.append((path, reason))

    def table(self, doc, key, path=None, required=False):
        value = doc.get(key)
        path = path or key
        if value is None:
            if required:
                self.fail(path, 'missing table')
            return {}
        if not isinstance(value, dict):
            self.fail(path, 'must be a table')
            return {}
        return value

    def array(self, doc, key, path=None):
        value = doc.get(key, [])
        if not isinstance(value, list):
            self.fail(path or key, 'must be an array')
            return []
        return value

    def number(self, doc, key, path, required=False, default=None, positive=False):
        value = doc.get(key)
        if value is None:
            if required:
                self.fail(path, 'missing number')
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, 'must be a number')
            return default
        if positive and not value > 0:
            self.fail(path, 'must be positive')
            return default
        return float(value)

    def integer(self, doc, key, path, required=False, default=None, minimum=None):
        value = doc.get(key)
        if value is None:
            if required:
                self.fail(path, 'missing integer')
            return default
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(path, 'must be an integer')
            return default
        if minimum is not None and value < minimum:
            self.fail(path, 'must be >= {}'.format(minimum))
            return default
        return value

    def boolean(self, doc, key, path, default=False):
        value = doc.get(key, default)
        if not isinstance(value, bool):
            self.fail(path, 'must be true or false')
            return default
        return value

    def choice(self, doc, key, path, options, default=None):
        value = doc.get(key, default)
        if value is None:
            return None
        if value not in options:
            self.fail(path, 'must be one of {}'.format(', '.join(options)))
            return default
        return value

    def point(self, doc, key, path, n, required=True):
        value = doc.get(key)
        if value is None:
            if required:
                self.fail(path, 'missing point')
            return None
        if (not isinstance(value, list) or
                any(isinstance(t, bool) or not isinstance(t, (int, float)) for t in value)):
            self.fail(path, 'must be an array of numbers')
            return None
        if n is not None and len(value) != n:
            self.fail(path, 'must have {} coordinates'.format(n))
            return None
        return tuple(float(t) for t in value)


def _background(check, doc):
    table = check.table(doc, 'background', required=True)
    kind = check.choice(table, 'kind', 'background.kind', (FLAT, SPHERE), default=FLAT)
    n = table.get('n')
    if isinstance(n, bool) or not isinstance(n, int):
        check.fail('background.n', 'n must be an integer >= {}'.format(cfg.MIN_DIMENSION))
        return None
    if n < cfg.MIN_DIMENSION:
        check.fail('background.n', 'n >= {}'.format(cfg.MIN_DIMENSION))
        return None
    return Background(kind or FLAT, n)


def _law(check, entry, path):
    forms = [key for key in ('r0', 'radii', 'couple', 'alternating') if key in entry]
    if len(forms) != 1:
        check.fail(path, 'give exactly one radius law: r0 and q, radii, couple, or alternating')
        return None
    form = forms[0]
    try:
        if form == 'r0':
            r0 = check.number(entry, 'r0', path + '.r0', required=True, positive=True)
            q = check.number(entry, 'q', path + '.q', required=True)
            return None if r0 is None or q is None else GeometricLaw(r0, q)
        if form == 'radii':
            radii = check.array(entry, 'radii', path + '.radii')
            if not radii or any(isinstance(r, bool) or not isinstance(r, (int, float)) or
                                not r > 0 for r in radii):
                check.fail(path + '.radii', 'must be an array of positive numbers')
                return None
            return TableLaw(tuple(radii))
        if form == 'couple':
            couple = check.integer(entry, 'couple', path + '.couple', required=True, minimum=0)
            k = check.number(entry, 'k_exp', path + '.k_exp', required=True)
            return None if couple is None or k is None else CoupledLaw(couple, k)
        alt = check.table(entry, 'alternating', path + '.alternating')
        r = check.number(alt, 'r', path + '.alternating.r', required=True)
        k = check.number(alt, 'k', path + '.alternating.k', required=True)
        role = check.choice(alt, 'role', path + '.alternating.role', ('primary', 'secondary'))
        if r is None or k is None or role is None:
            return None
        law = AlternatingLaw(r, k, role)
        law.radii(1)
        return law
    except ValueError as error:
        check.fail(path, str(error))
        return None


def _tube_window(n):
    return '{:g} < k <= {}'.format((n - 2) / 2.0, n - 2)


def _exclusions(check, doc, n):
    shapes, laws = [], []
    for i, entry in enumerate(check.array(doc, 'exclusions')):
        path = 'exclusions[{}]'.format(i)
        if not isinstance(entry, dict):
            check.fail(path, 'must be a table')
            continue
        shape = check.choice(entry, 'shape', path + '.shape', ('ball', 'tube', 'halfspace'))
        if shape is None:
            check.fail(path + '.shape', 'missing shape')
            continue
        if shape == 'halfspace':
            shapes.append(('halfspace', None))
            laws.append(None)
            continue
        if shape == 'ball':
            center = check.point(entry, 'center', path + '.center', n)
            shapes.append(('ball', center))
        else:
            k = check.integer(entry, 'k', path + '.k', required=True)
            if k is not None and n is not None and not (n - 2) / 2.0 < k <= n - 2:
                check.fail(path + '.k', 'admissible window {}'.format(_tube_window(n)))
                k = None
            shapes.append(('tube', k))
        laws.append(_law(check, entry, path))
    return shapes, laws


def _make_exclusions(shapes, radii):
    excl = []
    for (shape, arg), r in zip(shapes, radii):
        if shape == 'ball':
            excl.append(Ball(arg, r))
        elif shape == 'tube':
            excl.append(Tube(arg, r))
        else:
            excl.append(Slab())
    return tuple(excl)


def _within_truncation(dom, p):
    p = np.asarray(p, dtype=float)
    slack = 1.0 + 1e-12
    if dom.symmetry == RADIAL:
        s = float(dom.radial_coordinate(p))
        return s <= dom.truncation * slack
    if dom.singular_outer:
        return np.linalg.norm(p - np.asarray(dom.center)) <= dom.truncation * slack
    z, rho = dom.reduce(p)
    zs = [zc for zc, _ in dom.reduced_balls()]
    return (float(rho) <= dom.truncation * slack and
            min(zs) - dom.truncation * slack <= float(z) <= max(zs) + dom.truncation * slack)


def _schedule(check, doc, bg, shapes, laws):
    table = check.table(doc, 'schedule')
    indices = check.integer(table, 'indices', 'schedule.indices', default=0, minimum=0)
    truncation = check.number(table, 'truncation', 'schedule.truncation', positive=True,
                              required=bg is not None and not bg.is_sphere)
    truncation_law = check.choice(table, 'truncation_law', 'schedule.truncation_law',
                                  ('fixed', 'scaled'), default='fixed')
    singular_outer = check.boolean(table, 'singular_outer', 'schedule.singular_outer')
    symmetry = check.choice(table, 'symmetry', 'schedule.symmetry', (RADIAL, AXISYMMETRIC))
    if not shapes and not singular_outer:
        check.fail('exclusions', 'nothing is excised')
    if check.violations or bg is None:
        return None
    try:
        row = resolve_radii(laws, 1)[0]
        radii = [None if np.isnan(r) else float(r) for r in row]
        base = DomainSpec(bg, _make_exclusions(shapes, radii), truncation=truncation,
                          symmetry=symmetry, singular_outer=singular_outer)
        return build_schedule(base, laws, indices, truncation_law)
    except YamabeLabError as error:
        check.fail('exclusions', str(error))
    except ValueError as error:
        check.fail('schedule', str(error))
    return None


def _solver(check, doc):
    table = check.table(doc, 'solver')
    kwargs = {}
    tol = check.number(table, 'tol', 'solver.tol', positive=True)
    if tol is not None:
        kwargs['tol'] = tol
    max_newton = check.integer(table, 'max_newton', 'solver.max_newton', minimum=1)
    if max_newton is not None:
        kwargs['max_newton'] = max_newton
    grid = check.integer(table, 'grid', 'solver.grid', minimum=cfg.MIN_GRID)
    if grid is not None:
        kwargs['radial_grid'] = kwargs['axisymmetric_grid'] = grid
    grading = check.number(table, 'grading', 'solver.grading')
    if grading is not None:
        if grading < 1:
            check.fail('solver.grading', 'must be >= 1')
        else:
            kwargs['grading'] = grading
    return SolverParams(**kwargs)


def _probe(check, entry, path, n, seen):
    pid = entry.get('id')
    if not isinstance(pid, str) or not pid:
        check.fail(path + '.id', 'missing probe id')
    elif pid in seen:
        check.fail(path + '.id', 'duplicate probe id {!r}'.format(pid))
    seen.add(pid)
    kind = check.choice(entry, 'kind', path + '.kind', PROBE_KINDS)
    if kind is None:
        check.fail(path + '.kind', 'missing probe kind')
        return None
    point = check.point(entry, 'point', path + '.point', n)
    kwargs = {}
    if kind == SEGMENT:
        kwargs['direction'] = check.point(entry, 'direction', path + '.direction', n)
        kwargs['epsilon'] = check.number(entry, 'epsilon', path + '.epsilon', required=True,
                                         positive=True)
    elif kind == ARC:
        kwargs['end'] = check.point(entry, 'end', path + '.end', n)
        kwargs['radius'] = check.number(entry, 'radius', path + '.radius', required=True,
                                        positive=True)
    elif kind == PINCH:
        kwargs['direction'] = check.point(entry, 'direction', path + '.direction', n,
                                          required=False)
        kwargs['epsilon'] = check.number(entry, 'epsilon', path + '.epsilon', required=True,
                                         positive=True)
    elif kind == CLASSIFY:
        kwargs['rho'] = check.number(entry, 'rho', path + '.rho', required=True, positive=True)
        kwargs['growth'] = check.number(entry, 'growth', path + '.growth',
                                        default=cfg.DEFAULT_GROWTH, positive=True)
        kwargs['threshold'] = check.number(entry, 'threshold', path + '.threshold',
                                           positive=True)
    if point is None or not isinstance(pid, str):
        return None
    return ProbeSpec(pid, kind, point, **kwargs)


def _points_in_truncation(check, base, named):
    for path, p in named:
        if p is not None and not _within_truncation(base, p):
            check.fail(path, 'point lies outside the truncation')


def _oracles(check, doc, n):
    out = []
    for i, entry in enumerate(check.array(doc, 'oracles')):
        path = 'oracles[{}]'.format(i)
        if not isinstance(entry, dict):
            check.fail(path, 'must be a table')
            continue
        kind = check.choice(entry, 'kind', path + '.kind', tuple(KINDS))
        points = check.array(entry, 'points', path + '.points')
        pts = [check.point({'p': p}, 'p', '{}.points[{}]'.format(path, k), n)
               for k, p in enumerate(points)]
        if kind is None or n is None or any(p is None for p in pts):
            continue
        params = {k: v for k, v in entry.items() if k not in ('kind', 'points')}
        try:
            out.append((make_oracle(kind, n, **params), tuple(pts)))
        except (TypeError, ValueError, YamabeLabError) as error:
            check.fail(path, str(error))
    return tuple(out)


def _assertions(check, doc):
    out = []
    for i, entry in enumerate(check.array(doc, 'assertions')):
        path = 'assertions[{}]'.format(i)
        if not isinstance(entry, dict):
            check.fail(path, 'must be a table')
            continue
        kind = check.choice(entry, 'kind', path + '.kind', ASSERTION_KINDS)
        if kind is None:
            check.fail(path + '.kind', 'missing assertion kind')
            continue
        if kind == 'verdict' and ('probe_id' not in entry or 'expect' not in entry):
            check.fail(path, 'verdict assertions need probe_id and expect')
        if kind in ('range', 'increasing') and 'column' not in entry:
            check.fail(path, '{} assertions need a column'.format(kind))
        if kind in ('range', 'slope'):
            check.number(entry, 'min', path + '.min')
            check.number(entry, 'max', path + '.max')
        out.append(dict(entry))
    return tuple(out)


def parse_scenario(text):
    """
    Parse and validate a TOML scenario.

    :param text: Scenario text.
    :type text: str
    :rtype: :class:`Scenario`

    raises:
        * SchemaError: With every violation found, as ``(key_path, reason)``.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as error:
        raise SchemaError([('', 'invalid TOML: {}'.format(error))])
    check = _Checker()
    name = doc.get('name', 'scenario')
    if not isinstance(name, str):
        check.fail('name', 'must be a string')
    bg = _background(check, doc)
    n = bg.n if bg is not None else None
    shapes, laws = _exclusions(check, doc, n)
    params = _solver(check, doc)
    probes, seen = [], set()
    for i, entry in enumerate(check.array(doc, 'probes')):
        if isinstance(entry, dict):
            probes.append(_probe(check, entry, 'probes[{}]'.format(i), n, seen))
        else:
            check.fail('probes[{}]'.format(i), 'must be a table')
    norm = check.table(doc, 'normalization')
    annulus = None
    if norm:
        center = check.point(norm, 'center', 'normalization.center', n)
        inner = check.number(norm, 'inner', 'normalization.inner', required=True)
        outer = check.number(norm, 'outer', 'normalization.outer', required=True, positive=True)
        if inner is not None and outer is not None and not 0 <= inner < outer:
            check.fail('normalization', 'need 0 <= inner < outer')
        elif center is not None and inner is not None and outer is not None:
            annulus = Annulus(center, inner, outer)
    regions = None
    region_tables = check.table(doc, 'regions')
    if region_tables:
        regions = {}
        for key in ('near', 'far'):
            t = check.table(region_tables, key, 'regions.' + key, required=True)
            p = check.point(t, 'point', 'regions.{}.point'.format(key), n)
            r = check.number(t, 'radius', 'regions.{}.radius'.format(key), required=True,
                             positive=True)
            if p is not None and r is not None:
                regions[key] = Region(p, r, complement=key == 'far')
    fit = None
    fit_table = check.table(doc, 'fit')
    if fit_table:
        poles = [check.point({'p': p}, 'p', 'fit.poles[{}]'.format(k), n)
                 for k, p in enumerate(check.array(fit_table, 'poles', 'fit.poles'))]
        shell = fit_table.get('shell', list(cfg.DEFAULT_FIT_SHELL))
        if (not isinstance(shell, list) or len(shell) != 2 or
                not all(isinstance(s, (int, float)) for s in shell) or not 0 <= shell[0] < shell[1]):
            check.fail('fit.shell', 'must be a pair lo < hi')
            shell = cfg.DEFAULT_FIT_SHELL
        constant = check.boolean(fit_table, 'constant', 'fit.constant', default=True)
        if not poles and not constant:
            check.fail('fit', 'the basis is empty')
        if all(p is not None for p in poles):
            fit = FitSpec(tuple(poles), constant, tuple(float(s) for s in shell))
    oracles = _oracles(check, doc, n)
    study = check.table(doc, 'study')
    grids = check.array(study, 'grids', 'study.grids')
    for k, g in enumerate(grids):
        if isinstance(g, bool) or not isinstance(g, int) or g < cfg.MIN_GRID:
            check.fail('study.grids[{}]'.format(k), 'must be an integer >= {}'.format(cfg.MIN_GRID))
    assertions = _assertions(check, doc)
    output = check.table(doc, 'output')
    out_dir = output.get('dir')
    if out_dir is not None and not isinstance(out_dir, str):
        check.fail('output.dir', 'must be a string')
    cache = check.boolean(output, 'cache', 'output.cache', default=True)
    schedule = _schedule(check, doc, bg, shapes, laws)
    if schedule is not None:
        named = [('probes[{}].point'.format(i), s.point) for i, s in enumerate(probes) if s]
        named += [('probes[{}].end'.format(i), s.end) for i, s in enumerate(probes)
                  if s and s.end is not None]
        if annulus is not None:
            named.append(('normalization.center', annulus.center))
        for key, region in (regions or {}).items():
            named.append(('regions.{}.point'.format(key), region.point))
        if fit is not None:
            named += [('fit.poles[{}]'.format(k), p) for k, p in enumerate(fit.poles)]
        _points_in_truncation(check, schedule.base, named)
    if regions is not None and len(regions) != 2:
        check.fail('regions', 'need both near and far')
    if check.violations:
        raise SchemaError(check.violations)
    logger.info('Parsed scenario %r with %s indices.', name, len(schedule))
    return Scenario(name, bg, schedule, params, tuple(probes), annulus, regions, fit,
                    oracles, tuple(grids), assertions, out_dir, cache, text)


def load_scenario(path):
    with open(path, encoding='utf-8') as handle:
        return parse_scenario(handle.read())
