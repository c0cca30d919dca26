"""
.. module:: blowup_probe
    :platform: Unix
    :synopsis: Probes that look for curvature blow-up in solved fields.

Paths are sampled with the cubic interpolant of a :class:`SampledField`;
the directional derivative of ``v`` along a path comes from a cubic spline
through the samples, anchored at ``v = 0`` where the path crosses the
singular boundary. Ricci components are always rebuilt from the jets of
``v`` and reported in the orthonormal frame of ``v^-2 g``.

Verdicts produced by :func:`classify` are numerical evidence only.
"""
import threading
import weakref
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import cfg
from .conformal_core import report_from_components, ricci_components
from .exceptions import (InterpolationFailure, NonFinite, OutOfSupport,
                         PathOutsideDomain, RadiusTooSmall)
from .utils import get_logger


logger = get_logger('blowup_probe')

SEGMENT = 'segment'
ARC = 'arc'
PINCH = 'pinch'
CLASSIFY = 'classify'
PROBE_KINDS = (SEGMENT, ARC, PINCH, CLASSIFY)

BLOWUP = 'BlowupEvidence'
BOUNDED = 'BoundedEvidence'
INCONCLUSIVE = 'Inconclusive'


@dataclass(frozen=True)
class ProbeResult(object):
    """
    Outcome of a segment or arc probe.

    ``t_star`` is where the path enters the domain, ``t_argmax`` where the
    path derivative of ``v`` is largest, ``slope`` and ``curvature`` the
    first and second path derivatives there. ``pinch`` is set when the
    argmax is interior to the sampled interval. Arc probes also carry the
    two parts of the second derivative, ``tangential + transverse``.
    """
    kind: str
    start: tuple
    end: tuple
    epsilon: float
    t_star: float
    t_argmax: float
    value: float
    slope: float
    curvature: float
    pinch: bool
    r_nn: float
    mean_value_bound: float
    mean_value_ok: bool
    tangential: float = None
    transverse: float = None


@dataclass(frozen=True)
class PinchCheck(object):
    """``v + |d_nu nu v| <= epsilon |grad v|`` at a point."""
    holds: bool
    value: float
    second: float
    gradient: float
    point: tuple
    direction: tuple
    epsilon: float
    r_nn: float

    @property
    def pinch(self):
        return self.holds


@dataclass(frozen=True)
class RegionSample(object):
    """Largest ``|Ric|`` over the nodes of one region of one field."""
    value: float

    pinch = None

    @property
    def r_nn(self):
        return self.value


@dataclass(frozen=True)
class BlowupVerdict(object):
    point: tuple
    rho: float
    values: tuple
    classification: str
    threshold: float
    growth: float
    probe_id: str = None


@dataclass(frozen=True)
class ProbeSpec(object):
    """
    A configured probe.

    ``segment`` uses ``point``, ``direction`` and ``epsilon``; ``arc`` uses
    ``point``, ``end`` and ``radius``; ``pinch`` uses ``point`` and
    ``epsilon`` with an optional ``direction``; ``classify`` uses
    ``point``, ``rho`` and optionally ``growth`` and ``threshold``.
    """
    id: str
    kind: str
    point: tuple
    direction: tuple = None
    epsilon: float = None
    end: tuple = None
    radius: float = None
    rho: float = None
    growth: float = cfg.DEFAULT_GROWTH
    threshold: float = None

    def __post_init__(self):
        if self.kind not in PROBE_KINDS:
            raise ValueError('Unknown probe kind {!r}'.format(self.kind))


# NODAL CURVATURE

_nodal_cache = weakref.WeakKeyDictionary()
_nodal_lock = threading.Lock()


def nodal_ricci(field):
    """
    Largest eigenvalue modulus of Ricci at every free node of a field.

    :rtype: ``(mask, extremal)`` shaped like the grid; ``extremal`` is NaN
        off the mask.
    """
    with _nodal_lock:
        cached = _nodal_cache.get(field)
    if cached is not None:
        return cached
    mask = np.array(field.free & ~field.excised)
    extremal = np.full(field.shape, np.nan)
    pts = field.node_points()[mask]
    if pts.shape[0]:
        j = field.jet(pts)
        comp = ricci_components(field.domain.background, pts, j)
        extremal[mask] = report_from_components(comp).extremal_abs
    result = (mask, extremal)
    with _nodal_lock:
        _nodal_cache[field] = result
    return result


def region_sup(field, point, radius, complement=False):
    """
    Largest nodal ``|Ric|`` over the ball ``B_radius(point)``, or over its
    complement. Symmetric grids count a node when its orbit meets the region.

    :rtype: float, NaN when no node falls in the region.
    """
    mask, extremal = nodal_ricci(field)
    dmin, dmax = field.orbit_distance_range(np.asarray(point, dtype=float))
    inside = (dmax > radius) if complement else (dmin <= radius)
    vals = extremal[mask & inside]
    return float(np.max(vals)) if vals.size else float('nan')


def global_sup(field):
    mask, extremal = nodal_ricci(field)
    vals = extremal[mask]
    return float(np.max(vals)) if vals.size else float('nan')


# PATHS

def _unit(v, name):
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if not norm > 0:
        raise ValueError('{} must be a nonzero vector'.format(name))
    return v / norm


def _crossing(dom, path, outside, inside):
    """Parameter between two samples where ``path`` crosses the boundary, on the inside."""
    def f(t):
        return float(dom.signed_distance(path(t)))
    lo, hi = min(outside, inside), max(outside, inside)
    if f(outside) == 0.0:
        t = float(outside)
    else:
        t = float(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    for _ in range(64):
        if f(t) >= 0.0:
            break
        t = float(np.nextafter(t, inside))
    return t


def _inside_interval(dom, path, lo, hi):
    """
    The stretch of ``[lo, hi]`` where the path lies in the domain.

    :rtype: ``(t_start, t_end, entered, left)``.
    """
    ts = np.linspace(lo, hi, cfg.PATH_SAMPLES)
    sd = dom.signed_distance(path(ts))
    inside = sd > 0
    if not inside.any():
        raise PathOutsideDomain('no sample of the path lies in the domain')
    first = int(np.argmax(inside))
    last = len(ts) - 1 - int(np.argmax(inside[::-1]))
    if not inside[first:last + 1].all():
        raise PathOutsideDomain('the path leaves the domain and comes back')
    entered = first > 0
    left = last < len(ts) - 1
    t0 = _crossing(dom, path, ts[first - 1], ts[first]) if entered else lo
    t1 = _crossing(dom, path, ts[last + 1], ts[last]) if left else hi
    return t0, t1, entered, left


def _sample(field, path, t0, t1, entered, left):
    ts = np.linspace(t0, t1, cfg.PATH_SAMPLES)
    vals = np.zeros(ts.shape)
    body = np.ones(ts.shape, dtype=bool)
    body[0] = not entered
    body[-1] = not left
    pts = path(ts[body])
    if not np.all(field.covers(pts)):
        raise PathOutsideDomain('the path runs outside the grid support')
    try:
        vals[body] = field.interpolate(pts)
    except NonFinite as error:
        raise InterpolationFailure(str(error))
    if not np.all(np.isfinite(vals)):
        raise InterpolationFailure('non-finite samples on the path')
    return ts, vals


def _argmax(ts, vals):
    """Spline, refined derivative argmax and whether it is interior."""
    spline = CubicSpline(ts, vals)
    d1 = spline(ts, 1)
    k = int(np.argmax(d1))
    t_i = float(ts[k])
    interior = 0 < k < len(ts) - 1
    if interior:
        d2 = spline.derivative(2)
        a, b = ts[k - 1], ts[k + 1]
        if d2(a) * d2(b) < 0:
            t_i = float(brentq(d2, a, b))
    return spline, t_i, interior


def _mean_value(ts, vals):
    slopes = np.diff(vals) / np.diff(ts)
    bound = (vals[-1] - vals[0]) / (ts[-1] - ts[0])
    return float(bound), bool(np.max(slopes) >= bound - 1e-12 * abs(bound))


def _frame_component(field, point, nu):
    point = np.asarray(point, dtype=float)
    j = field.jet(point[None, :])
    comp = ricci_components(field.domain.background, point[None, :], j)[0]
    return float(nu @ comp @ nu), j


def segment_probe(field, x0, direction, epsilon):
    """
    Probe ``v`` along ``x0 + t d``, ``0 <= t <= epsilon``.

    :param field: A solved field.
    :type field: :class:`~YamabeLab.grids.SampledField`
    :param x0: Start point; it may lie inside an excised region.
    :param direction: Direction of the segment, normalised here.
    :param epsilon: Length of the segment.
    :rtype: :class:`ProbeResult`

    raises:
        * PathOutsideDomain: If the segment never enters the domain, leaves
          it again or runs off the grid.
        * InterpolationFailure: Near non-finite samples.
    """
    x0 = np.asarray(x0, dtype=float)
    d = _unit(direction, 'direction')
    if not epsilon > 0:
        raise ValueError('epsilon must be positive, got {}'.format(epsilon))
    dom = field.domain

    def path(t):
        return x0 + np.multiply.outer(t, d)

    t0, t1, entered, left = _inside_interval(dom, path, 0.0, float(epsilon))
    if left:
        raise PathOutsideDomain('the segment leaves the domain before epsilon')
    ts, vals = _sample(field, path, t0, t1, entered, left)
    spline, t_i, interior = _argmax(ts, vals)
    bound, ok = _mean_value(ts, vals)
    r_nn, _ = _frame_component(field, path(t_i), d)
    logger.debug('Segment probe from %s: t* = %.6g, argmax %.6g, pinch %s.',
                 tuple(x0), t0, t_i, interior)
    return ProbeResult(SEGMENT, tuple(x0), tuple(d), float(epsilon), float(t0), t_i,
                       float(spline(t_i)), float(spline(t_i, 1)), float(spline(t_i, 2)),
                       interior, r_nn, bound, ok)


def pinch_condition(field, x, nu, epsilon):
    """
    Test ``v(x) + |d_nu nu v(x)| <= epsilon |grad v(x)|`` on grid jets.

    raises:
        * OutOfSupport: For points off the grid or near its truncation edges.
    """
    x = np.asarray(x, dtype=float)
    nu = _unit(nu, 'nu')
    if not field.covers(x[None, :], strict=True)[0]:
        raise OutOfSupport('{} is not interior to the field support'.format(tuple(x)))
    r_nn, j = _frame_component(field, x, nu)
    value = float(j.value[0])
    second = float(abs(nu @ j.hessian[0] @ nu))
    gradient = float(np.linalg.norm(j.gradient[0]))
    return PinchCheck(bool(value + second <= epsilon * gradient), value, second, gradient,
                      tuple(x), tuple(nu), float(epsilon), r_nn)


def pinch_search(field, x0, epsilon):
    """
    First node of ``B_epsilon(x0)`` and coordinate direction where the pinch
    condition holds, scanning nodes in grid order.

    :rtype: :class:`PinchCheck` or None.
    """
    x0 = np.asarray(x0, dtype=float)
    pts = field.node_points()[np.asarray(field.free & ~field.excised)]
    pts = pts[np.linalg.norm(pts - x0, axis=-1) < epsilon]
    pts = pts[field.covers(pts, strict=True)] if pts.shape[0] else pts
    if not pts.shape[0]:
        return None
    j = field.jet(pts)
    n = field.n
    second = np.abs(np.diagonal(j.hessian, axis1=-2, axis2=-1))
    gradient = np.linalg.norm(j.gradient, axis=-1)
    holds = j.value[:, None] + second <= epsilon * gradient[:, None]
    if not holds.any():
        return None
    p, k = np.unravel_index(int(np.argmax(holds.ravel())), holds.shape)
    return pinch_condition(field, pts[p], np.eye(n)[k], epsilon)


def _arc_frame(x0, x1):
    chord = np.linalg.norm(x1 - x0)
    en = (x1 - x0) / chord
    k = int(np.argmin(np.abs(en)))
    e1 = np.zeros_like(en)
    e1[k] = 1.0
    e1 = e1 - (e1 @ en) * en
    return chord, en, e1 / np.linalg.norm(e1)


def arc_probe(field, x0, x1, radius):
    """
    Probe ``v`` along the circular arc of radius ``radius`` from ``x0`` to
    ``x1``, ``sigma(t) = x0 + ((R^2-(t-e)^2)^1/2 - (R^2-e^2)^1/2) e1 + t en``
    with ``e`` half the chord, ``en`` along the chord and ``e1`` the
    coordinate axis least aligned with it.

    raises:
        * RadiusTooSmall: If ``radius < 4 |x1 - x0|``.
        * PathOutsideDomain: If the inside part of the arc is not connected
          or runs off the grid.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if not np.linalg.norm(x1 - x0) > 0:
        raise ValueError('arc end points coincide')
    chord, en, e1 = _arc_frame(x0, x1)
    R = float(radius)
    if R < cfg.ARC_RADIUS_FACTOR * chord:
        raise RadiusTooSmall('R = {} with chord {}'.format(R, chord))
    eps = chord / 2.0
    base = np.sqrt(R * R - eps * eps)

    def path(t):
        t = np.asarray(t, dtype=float)
        bulge = np.sqrt(R * R - (t - eps) ** 2) - base
        return x0 + np.multiply.outer(bulge, e1) + np.multiply.outer(t, en)

    t0, t1, entered, left = _inside_interval(field.domain, path, 0.0, chord)
    ts, vals = _sample(field, path, t0, t1, entered, left)
    spline, t_i, interior = _argmax(ts, vals)
    bound, ok = _mean_value(ts, vals)
    root = np.sqrt(R * R - (t_i - eps) ** 2)
    tangent = -(t_i - eps) / root * e1 + en
    second_1 = -1.0 / root - (t_i - eps) ** 2 / root ** 3
    nu = tangent / np.linalg.norm(tangent)
    r_nn, j = _frame_component(field, path(t_i), nu)
    tangential = float(tangent @ j.hessian[0] @ tangent)
    transverse = float(second_1 * (j.gradient[0] @ e1))
    return ProbeResult(ARC, tuple(x0), tuple(x1), eps, float(t0), t_i, float(spline(t_i)),
                       float(spline(t_i, 1)), float(spline(t_i, 2)), interior, r_nn,
                       bound, ok, tangential, transverse)


# CLASSIFICATION

def classify_values(values, threshold, growth=cfg.DEFAULT_GROWTH):
    """
    Label a per-index sequence of ``sup |Ric|``.

    BlowupEvidence needs the last three values finite, each at least
    ``growth`` times the previous one, and the last above ``threshold``.
    BoundedEvidence needs every finite value within the band of
    ``BOUNDED_BAND_FACTOR`` times the first one.
    """
    vals = np.asarray(values, dtype=float)
    window = cfg.BLOWUP_WINDOW
    if vals.size >= window:
        last = vals[-window:]
        if np.all(np.isfinite(last)) and np.all(last[:-1] > 0):
            ratios = last[1:] / last[:-1]
            if np.all(ratios >= growth) and last[-1] > threshold:
                return BLOWUP
    finite = vals[np.isfinite(vals)]
    if finite.size and np.all(finite <= cfg.BOUNDED_BAND_FACTOR * finite[0]):
        return BOUNDED
    return INCONCLUSIVE


def default_threshold(run):
    return cfg.THRESHOLD_FACTOR * run.records[0].sup_ric_all


def classify(run, point, rho, threshold=None, growth=cfg.DEFAULT_GROWTH, probe_id=None):
    """
    Classify the behaviour of ``sup |Ric|`` over ``B_rho(point)`` along a run.

    :param run: A finished exhaustion run.
    :type run: :class:`~YamabeLab.exhaustion.ExhaustionRun`
    :param threshold: Defaults to ``THRESHOLD_FACTOR`` times the index-0
        sup over the whole domain.
    :rtype: :class:`BlowupVerdict`
    """
    point = tuple(float(t) for t in point)
    if threshold is None:
        threshold = default_threshold(run)
    values = tuple(region_sup(rec.upper, point, rho) for rec in run.records)
    cell = run.records[0].upper.spacing_at(point)
    if not rho > 2 * cell:
        logger.warning('rho = %.3g is within two grid cells (%.3g) of %s.', rho, cell, point)
        label = INCONCLUSIVE
    else:
        label = classify_values(values, threshold, growth)
    return BlowupVerdict(point, float(rho), values, label, float(threshold), float(growth),
                         probe_id)


def run_probe(spec, field):
    """
    Evaluate one configured probe on one field.

    :rtype: :class:`ProbeResult`, :class:`PinchCheck`, :class:`RegionSample`
        or None when a pinch search finds nothing.
    """
    if spec.kind == SEGMENT:
        return segment_probe(field, spec.point, spec.direction, spec.epsilon)
    if spec.kind == ARC:
        return arc_probe(field, spec.point, spec.end, spec.radius)
    if spec.kind == PINCH:
        if spec.direction is not None:
            return pinch_condition(field, spec.point, spec.direction, spec.epsilon)
        return pinch_search(field, spec.point, spec.epsilon)
    return RegionSample(region_sup(field, spec.point, spec.rho))


def verdicts(run, specs):
    """Verdicts of every ``classify`` probe, keyed by probe id."""
    return {spec.id: classify(run, spec.point, spec.rho, spec.threshold, spec.growth, spec.id)
            for spec in specs if spec.kind == CLASSIFY}
