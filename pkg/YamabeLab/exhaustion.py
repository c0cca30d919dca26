"""
.. module:: exhaustion
    :platform: Unix
    :synopsis: Schedules of shrinking exclusions, solves across them and the
        normalised limits of the solutions.

A schedule is a base :class:`~YamabeLab.grids.DomainSpec` together with one
radius law per exclusion. Index ``i`` of the schedule is the domain with the
radii of row ``i``; domains increase with ``i``. Every index is solved
independently on a worker pool; results are assembled in index order and
all cache writes happen in the calling thread.
"""
from dataclasses import dataclass, field

import numpy as np

from . import cfg
from .blowup_probe import global_sup, region_sup, run_probe
from .closed_forms import GreenPole, Multipole
from .elliptic_solver import (SolverParams, default_barriers, monotone_bracket,
                              solve)
from .exceptions import (DegenerateBasis, NonMonotoneSchedule,
                         YamabeLabError)
from .grids import AXISYMMETRIC, Ball
from .utils import WorkerPool, get_logger


logger = get_logger('exhaustion')


# RADIUS LAWS

@dataclass(frozen=True)
class GeometricLaw(object):
    """``r_i = r0 q^i`` with ``0 < q < 1``."""
    r0: float
    q: float

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError('r0 must be positive, got {}'.format(self.r0))
        if not 0 < self.q < 1:
            raise ValueError('q must lie in (0, 1), got {}'.format(self.q))

    def radii(self, count, resolved=None):
        return self.r0 * self.q ** np.arange(count, dtype=float)


@dataclass(frozen=True)
class TableLaw(object):
    """Explicit per-index radii."""
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, 'values', tuple(float(r) for r in self.values))

    def radii(self, count, resolved=None):
        if len(self.values) < count:
            raise ValueError('radius table has {} entries, the schedule needs {}'.format(
                len(self.values), count))
        return np.array(self.values[:count])


@dataclass(frozen=True)
class CoupledLaw(object):
    """``rhat_i = r_i^k`` where ``r_i`` are the radii of exclusion ``couple``."""
    couple: int
    k: float

    def __post_init__(self):
        if not self.k > 1:
            raise ValueError('coupling exponent must exceed 1, got {}'.format(self.k))

    def radii(self, count, resolved):
        base = resolved.get(self.couple)
        if base is None:
            raise ValueError('exclusion {} cannot be coupled to'.format(self.couple))
        return base ** self.k


def alternating_table(r, k, count, role):
    """
    Radii of a pair of alternately shrinking exclusions.

    With ``j = 1, 2, ...`` the ``primary`` exclusion has radius
    ``r^(k^(j-1))`` for odd ``j`` and ``r^(k^j)`` for even ``j``; the
    ``secondary`` one has ``r^(k^j)`` for odd ``j`` and ``r^(k^(j-1))`` for
    even ``j``. At every step exactly one of the two shrinks.
    """
    if not 0 < r < 1:
        raise ValueError('r must lie in (0, 1), got {}'.format(r))
    if not k > 1:
        raise ValueError('k must exceed 1, got {}'.format(k))
    j = np.arange(1, count + 1)
    odd = j % 2 == 1
    if role == 'primary':
        power = np.where(odd, j - 1, j)
    elif role == 'secondary':
        power = np.where(odd, j, j - 1)
    else:
        raise ValueError('role must be primary or secondary, got {!r}'.format(role))
    return tuple(float(r ** (float(k) ** p)) for p in power)


@dataclass(frozen=True)
class AlternatingLaw(object):
    r: float
    k: float
    role: str

    def radii(self, count, resolved=None):
        return np.array(alternating_table(self.r, self.k, count, self.role))


def coupling_threshold(n):
    """Smallest exponent ruled out: ``k`` must exceed ``1 + 2(n+3)/(n-2)``."""
    return 1.0 + 2.0 * (n + 3) / (n - 2)


def coupling_admissible(n, k):
    return (n - 2) * (k - 1) / 2.0 > n + 3


# SCHEDULES

@dataclass(frozen=True)
class ExhaustionSchedule(object):
    """
    Validated schedule of domains ``Omega_0 ⊂ Omega_1 ⊂ ...``.

    ``radii[i]`` holds the exclusion radii of index ``i`` and
    ``truncations[i]`` its outer truncation. ``below_threshold`` flags a
    coupling exponent too small for the curvature estimates to apply.
    """
    base: object
    laws: tuple
    radii: tuple
    truncations: tuple
    below_threshold: bool = False

    def __len__(self):
        return len(self.radii)

    def domain(self, i):
        return self.base.with_radii(self.radii[i]).with_truncation(self.truncations[i])

    def domains(self):
        return [self.domain(i) for i in range(len(self))]

    @property
    def primary_radii(self):
        """``r_i``: radii of the first exclusion."""
        return tuple(row[0] if row else None for row in self.radii)

    @property
    def coupled_radii(self):
        """``rhat_i``: the coupled exclusion, else the last of several, else None."""
        coupled = [k for k, law in enumerate(self.laws) if isinstance(law, CoupledLaw)]
        if coupled:
            k = coupled[0]
        elif len(self.laws) > 1:
            k = len(self.laws) - 1
        else:
            return tuple(None for _ in self.radii)
        return tuple(row[k] for row in self.radii)


def resolve_radii(laws, count):
    """
    Radius table of a list of laws, shape ``(count, len(laws))``.

    Coupled laws are resolved after the others; radius-free entries are NaN.
    """
    resolved = {}
    for k, law in enumerate(laws):
        if law is None:
            resolved[k] = np.full(count, np.nan)
        elif not isinstance(law, CoupledLaw):
            resolved[k] = np.asarray(law.radii(count), dtype=float)
    plain = dict(resolved)
    for k, law in enumerate(laws):
        if isinstance(law, CoupledLaw):
            resolved[k] = law.radii(count, plain)
    if not laws:
        return np.zeros((count, 0))
    return np.stack([resolved[k] for k in range(len(laws))], axis=1)


def build_schedule(base, laws, indices, truncation_law='fixed'):
    """
    Build and validate a schedule.

    :param base: Domain whose exclusions the laws act on.
    :param laws: One radius law per exclusion of ``base``; None keeps a
        radius-free exclusion (a slab) unchanged.
    :param indices: Largest index ``I_max``; the schedule has ``I_max + 1``
        domains.
    :param truncation_law: ``'fixed'`` keeps the base truncation,
        ``'scaled'`` shrinks it with the first exclusion radius.
    :rtype: :class:`ExhaustionSchedule`

    raises:
        * NonMonotoneSchedule: If a radius grows, or nothing shrinks at
          some step.
        * OverlappingExclusions: If exclusions meet at some index.
    """
    laws = tuple(laws)
    if len(laws) != len(base.exclusions):
        raise ValueError('need one radius law per exclusion')
    if truncation_law not in ('fixed', 'scaled'):
        raise ValueError('unknown truncation law {!r}'.format(truncation_law))
    count = int(indices) + 1
    if count < 1:
        raise ValueError('indices must be >= 0')
    table = resolve_radii(laws, count)
    sized = np.array([law is not None for law in laws])
    for i in range(count - 1):
        step = table[i + 1, sized] - table[i, sized]
        if np.any(step > 0):
            raise NonMonotoneSchedule('a radius grows between indices {} and {}'.format(i, i + 1))
        if not np.any(step < 0):
            raise NonMonotoneSchedule('nothing shrinks between indices {} and {}'.format(i, i + 1))
    rows = tuple(tuple(None if not sized[k] else float(table[i, k]) for k in range(len(laws)))
                 for i in range(count))
    if truncation_law == 'scaled':
        truncations = tuple(base.truncation * row[0] / rows[0][0] for row in rows)
    else:
        truncations = (base.truncation,) * count
    below = False
    for law in laws:
        if isinstance(law, CoupledLaw) and not coupling_admissible(base.n, law.k):
            below = True
            logger.warning('Coupling exponent k = %s is below the threshold %.4g for n = %s.',
                           law.k, coupling_threshold(base.n), base.n)
    schedule = ExhaustionSchedule(base, laws, rows, truncations, below)
    for i in range(count):
        schedule.domain(i)
    logger.info('Built a schedule of %s domains.', count)
    return schedule


# RUNS

@dataclass(frozen=True)
class Annulus(object):
    """Closed annulus ``inner <= |x - center| <= outer``."""
    center: tuple
    inner: float
    outer: float

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise ValueError('annulus radii must satisfy 0 <= inner < outer')


@dataclass(frozen=True)
class Region(object):
    """The ball ``B_radius(point)``, or its complement."""
    point: tuple
    radius: float
    complement: bool = False

    def sup(self, field):
        return region_sup(field, self.point, self.radius, self.complement)


def _anchor(dom):
    balls = dom.balls
    return tuple(balls[-1].center) if balls else (0.0,) * dom.n


def default_annulus(schedule, delta=cfg.DEFAULT_ANNULUS_DELTA):
    base = schedule.base
    center = tuple(base.balls[0].center) if base.balls else (0.0,) * base.n
    return Annulus(center, delta / 2.0, delta)


def default_regions(schedule):
    """Near region around the last exclusion and the complement of a larger ball."""
    point = _anchor(schedule.base)
    row = schedule.radii[0]
    r0 = (row[-1] if row else None) or 0.0
    return {'near': Region(point, max(cfg.NEAR_RADIUS, 2 * r0)),
            'far': Region(point, max(cfg.FAR_RADIUS, 4 * r0), complement=True)}


@dataclass(frozen=True, eq=False)
class IndexRecord(object):
    index: int
    radii: tuple
    domain: object
    upper: object
    lower: object = None
    m: float = float('nan')
    sup_ric_near: float = float('nan')
    sup_ric_far: float = float('nan')
    sup_ric_all: float = float('nan')
    probes: dict = field(default_factory=dict)
    cached: bool = False

    @property
    def diagnostics(self):
        return self.upper.diagnostics


@dataclass(frozen=True, eq=False)
class ExhaustionRun(object):
    schedule: ExhaustionSchedule
    params: SolverParams
    records: tuple
    annulus: Annulus
    regions: dict
    monotonicity: tuple = ()

    def __len__(self):
        return len(self.records)

    @property
    def m(self):
        return np.array([rec.m for rec in self.records])


def _node_sample(field):
    """Points and ``u`` at the free nodes of a field."""
    mask = np.asarray(field.free & ~field.excised)
    pts = field.node_points()[mask]
    u = field.values[mask] ** (-(field.n - 2) / 2.0)
    return pts, u


def annulus_minimum(field, annulus):
    """
    Minimum of ``u`` over a closed annulus: every node whose orbit meets it,
    plus interpolated samples on both bounding spheres.
    """
    pts, u = _node_sample(field)
    center = np.asarray(annulus.center, dtype=float)
    mask = np.asarray(field.free & ~field.excised)
    dmin, dmax = field.orbit_distance_range(center)
    hit = (dmax[mask] >= annulus.inner) & (dmin[mask] <= annulus.outer)
    values = [u[hit]]
    axis, _, perp = field.domain.frame()
    theta = np.linspace(0.0, np.pi, cfg.ANNULUS_BOUNDARY_SAMPLES)
    ring = np.cos(theta)[:, None] * axis + np.sin(theta)[:, None] * perp
    for radius in (annulus.inner, annulus.outer):
        if radius <= 0:
            continue
        sphere = center + radius * ring
        sphere = sphere[field.covers(sphere)]
        if sphere.shape[0]:
            values.append(field.u(sphere))
    values = np.concatenate(values)
    return float(np.min(values)) if values.size else float('nan')


def solve_pair(dom, p, data=None):
    """
    ``(lower, upper)`` fields of one domain; ``lower`` is None unless the
    domain is bracketed.
    """
    if dom.symmetry == AXISYMMETRIC and data is None and not dom.singular_outer:
        sub, sup = default_barriers(dom)
        return monotone_bracket(dom, sub, sup, p)
    return None, solve(dom, p, data)


def _run_index(schedule, i, p, annulus, regions, probes, cache, data):
    dom = schedule.domain(i)
    hit = cache.load(i, dom, p) if cache is not None else None
    if hit is not None:
        lower, upper = hit
        logger.info('Index %s loaded from the field cache.', i)
    else:
        lower, upper = solve_pair(dom, p, data)
    return IndexRecord(
        index=i, radii=schedule.radii[i], domain=dom, upper=upper, lower=lower,
        m=annulus_minimum(upper, annulus),
        sup_ric_near=regions['near'].sup(upper),
        sup_ric_far=regions['far'].sup(upper),
        sup_ric_all=global_sup(upper),
        probes={spec.id: run_probe(spec, upper) for spec in probes},
        cached=hit is not None)


def monotonicity_defects(records):
    """
    Largest ``(u_{i+1} - u_i) / max(1, u_i)`` over the free nodes of index
    ``i`` inside the support of index ``i + 1``, per consecutive pair.
    """
    defects = []
    for rec, nxt in zip(records[:-1], records[1:]):
        pts, u = _node_sample(rec.upper)
        keep = nxt.upper.covers(pts)
        if not keep.any():
            defects.append(float('nan'))
            continue
        later = nxt.upper.u(pts[keep])
        defects.append(float(np.max((later - u[keep]) / np.maximum(1.0, u[keep]))))
    return tuple(defects)


def run_exhaustion(schedule, p=None, annulus=None, regions=None, probes=(), cache=None,
                   threads=None, data=None):
    """
    Solve every index of a schedule and collect the per-index statistics.

    :param schedule: A validated schedule.
    :type schedule: :class:`ExhaustionSchedule`
    :param p: Solver parameters.
    :param annulus: Where ``m_i`` is taken; :func:`default_annulus` when None.
    :param regions: ``{'near': Region, 'far': Region}``;
        :func:`default_regions` when None.
    :param probes: :class:`~YamabeLab.blowup_probe.ProbeSpec` list run on
        every upper field.
    :param cache: Optional field cache with ``load(i, dom, p)`` and
        ``store(i, lower, upper, p)``.
    :param threads: Worker count, see :func:`~YamabeLab.utils.resolve_threads`.
    :param data: Optional closed form supplying all Dirichlet values.
    :rtype: :class:`ExhaustionRun`

    raises:
        * YamabeLabError: Any solver or probe error, tagged with its index.
    """
    p = p or SolverParams()
    annulus = annulus or default_annulus(schedule)
    regions = regions or default_regions(schedule)
    probes = tuple(probes)

    def job(i):
        try:
            return _run_index(schedule, i, p, annulus, regions, probes, cache, data)
        except YamabeLabError as error:
            raise error.annotate(i)

    records = tuple(WorkerPool(threads).map(job, range(len(schedule))))
    if cache is not None:
        for rec in records:
            if not rec.cached:
                cache.store(rec.index, rec.lower, rec.upper, p)
    defects = monotonicity_defects(records)
    slack = cfg.COMPARISON_SLACK * p.tol
    for i, defect in enumerate(defects):
        if defect > slack:
            logger.warning('u grows by %.3e between indices %s and %s.', defect, i, i + 1)
    return ExhaustionRun(schedule, p, records, annulus, regions, defects)


# LIMITS

@dataclass(frozen=True)
class FitResult(object):
    """Least-squares coefficients and relative residual of each index."""
    names: tuple
    coefficients: tuple
    residuals: tuple

    @property
    def decreasing(self):
        r = np.asarray(self.residuals)
        return bool(np.all(np.diff(r) < 0))


def _poles(basis):
    poles = []
    for member in basis:
        if isinstance(member, GreenPole):
            poles.append(member.pole)
        elif isinstance(member, Multipole):
            poles.extend(member.poles)
    return [np.asarray(pole) for pole in poles]


def rescale_and_fit(run, basis, shell=cfg.DEFAULT_FIT_SHELL, poles=None):
    """
    Fit ``w_i = u_i / m_i`` against a basis of harmonic closed forms.

    The fit uses the free nodes whose distance to the nearest pole lies in
    ``shell``. Poles default to those of the basis, else to the centers of
    the excised balls.

    :param run: Any object with ``records`` carrying ``upper`` and ``m``.
    :param basis: GreenPole, Multipole and Constant oracles.
    :rtype: :class:`FitResult`

    raises:
        * DegenerateBasis: If the Gram matrix is too badly conditioned or no
          node lies in the shell.
    """
    basis = list(basis)
    lo, hi = shell
    coefficients, residuals = [], []
    for rec in run.records:
        fld = rec.upper
        centers = poles if poles is not None else _poles(basis)
        if not centers:
            centers = [np.asarray(b.center) for b in fld.domain.exclusions
                       if isinstance(b, Ball)]
        pts, u = _node_sample(fld)
        near = np.min([np.linalg.norm(pts - np.asarray(c), axis=-1) for c in centers], axis=0)
        keep = (near >= lo) & (near <= hi)
        if not keep.any():
            raise DegenerateBasis('no node in the fit shell {}'.format(tuple(shell)))
        B = np.stack([member.u(pts[keep]) for member in basis], axis=1)
        w = u[keep] / rec.m
        gram = B.T @ B
        cond = np.linalg.cond(gram)
        if not cond <= cfg.GRAM_CONDITION_LIMIT:
            raise DegenerateBasis('Gram condition {:.3e}'.format(cond))
        coef, _, _, _ = np.linalg.lstsq(B, w, rcond=None)
        residuals.append(float(np.linalg.norm(B @ coef - w) / np.linalg.norm(w)))
        coefficients.append(tuple(float(c) for c in coef))
    names = tuple(member.kind for member in basis)
    return FitResult(names, tuple(coefficients), tuple(residuals))


def normalization_exponent(run):
    """Log-log slope of ``m_i`` against the first exclusion radius."""
    r = np.asarray(run.schedule.primary_radii, dtype=float)
    slope, _ = np.polyfit(np.log(r), np.log(run.m), 1)
    return float(slope)


def self_similarity_defect(run):
    """
    Largest relative gap between ``u_i(x)`` and
    ``lam^(-(n-2)/2) u_0(x / lam)``, ``lam = r_i / r_0``, over the free
    nodes of every index.
    """
    first = run.records[0]
    r0 = first.radii[0]
    exponent = -(first.domain.n - 2) / 2.0
    worst = 0.0
    for rec in run.records[1:]:
        lam = rec.radii[0] / r0
        pts, u = _node_sample(rec.upper)
        back = pts / lam
        keep = first.upper.covers(back)
        expected = lam ** exponent * first.upper.u(back[keep])
        gap = np.abs(u[keep] - expected) / np.maximum(1.0, expected)
        if gap.size:
            worst = max(worst, float(np.max(gap)))
    return worst


def pointwise_limit(run, x):
    """``u_i(x)`` along the run."""
    x = np.asarray(x, dtype=float)
    return tuple(float(rec.upper.u(x[None, :])[0]) for rec in run.records)
