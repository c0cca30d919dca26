"""
.. module:: grids
    :platform: Unix
    :synopsis: Domains with excised regions, graded solver grids and sampled
        fields with local interpolation.

A :class:`DomainSpec` is a background with a list of excised regions and an
outer truncation. Symmetric domains are reduced to one radial coordinate
``s`` or to the axisymmetric pair ``(z, rho)``; a :class:`SampledField`
stores ``v`` on such a reduced grid and rebuilds full n-dimensional jets
from the symmetry.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from . import cfg
from .closed_forms import check_tube
from .conformal_core import FLAT, SPHERE, Background, Jet2
from .exceptions import (InvalidDomain, NonFinite, OutOfSupport,
                         OverlappingExclusions)
from .utils import get_logger


logger = get_logger('grids')

RADIAL = 'radial'
AXISYMMETRIC = 'axisymmetric'


# EXCLUSIONS

@dataclass(frozen=True)
class Ball(object):
    """Closed ball removed from the domain."""
    center: tuple
    radius: float

    shape = 'ball'

    def __post_init__(self):
        object.__setattr__(self, 'center', tuple(float(t) for t in self.center))
        object.__setattr__(self, 'radius', float(self.radius))
        if not self.radius > 0:
            raise InvalidDomain('ball radius must be positive, got {}'.format(self.radius))

    def signed_distance(self, x):
        d = np.asarray(x, dtype=float) - np.asarray(self.center)
        return np.sqrt(np.sum(d * d, axis=-1)) - self.radius

    def with_radius(self, radius):
        return Ball(self.center, radius)

    def descriptor(self):
        return {'shape': self.shape, 'center': list(self.center), 'radius': self.radius}


@dataclass(frozen=True)
class Tube(object):
    """Solid tube ``|x''| <= radius`` around the span of the first k axes."""
    k: int
    radius: float

    shape = 'tube'

    def __post_init__(self):
        object.__setattr__(self, 'radius', float(self.radius))
        if not self.radius > 0:
            raise InvalidDomain('tube radius must be positive, got {}'.format(self.radius))

    def signed_distance(self, x):
        y = np.asarray(x, dtype=float)[..., self.k:]
        return np.sqrt(np.sum(y * y, axis=-1)) - self.radius

    def with_radius(self, radius):
        return Tube(self.k, radius)

    def descriptor(self):
        return {'shape': self.shape, 'k': int(self.k), 'radius': self.radius}


@dataclass(frozen=True)
class Slab(object):
    """The closed half-space ``x_n <= 0``."""

    shape = 'halfspace'
    radius = None

    def signed_distance(self, x):
        return np.array(np.asarray(x, dtype=float)[..., -1])

    def with_radius(self, radius):
        return self

    def descriptor(self):
        return {'shape': self.shape}


def exclusion_from_descriptor(desc):
    shape = desc['shape']
    if shape == Ball.shape:
        return Ball(tuple(desc['center']), desc['radius'])
    if shape == Tube.shape:
        return Tube(int(desc['k']), desc['radius'])
    if shape == Slab.shape:
        return Slab()
    raise InvalidDomain('unknown exclusion shape {!r}'.format(shape))


# DOMAINS

def _unit(v):
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class DomainSpec(object):
    """
    A background geometry minus excised regions, cut at a truncation.

    :param background: Flat space or the sphere chart.
    :type background: :class:`~YamabeLab.conformal_core.Background`
    :param exclusions: Balls, one tube or one slab.
    :param truncation: Outer radius. For ``singular_outer`` domains this is
        the radius of a sphere on which the metric blows up, otherwise the
        shell carrying Dirichlet data. Sphere charts default to
        ``DEFAULT_CHART_TRUNCATION``.
    :param symmetry: ``'radial'`` or ``'axisymmetric'``; inferred when None.
    :param singular_outer: Whether the outer sphere is a singular boundary.
    :param center: Center of the singular outer sphere, the origin by default.

    raises:
        * InvalidDomain: For inconsistent shapes, a missing truncation or
          exclusions that do not fit inside the truncation.
        * InvalidTube: For an inadmissible tube dimension.
        * OverlappingExclusions: If two excised balls meet.
    """
    background: Background
    exclusions: tuple = ()
    truncation: float = None
    symmetry: str = None
    singular_outer: bool = False
    center: tuple = None

    def __post_init__(self):
        n = self.background.n
        object.__setattr__(self, 'exclusions', tuple(self.exclusions))
        if self.center is None:
            object.__setattr__(self, 'center', (0.0,) * n)
        object.__setattr__(self, 'center', tuple(float(t) for t in self.center))
        if len(self.center) != n:
            raise InvalidDomain('outer center must have {} coordinates'.format(n))
        if self.truncation is None:
            if self.background.is_sphere:
                object.__setattr__(self, 'truncation', cfg.DEFAULT_CHART_TRUNCATION)
            else:
                raise InvalidDomain('flat domains need a truncation')
        object.__setattr__(self, 'truncation', float(self.truncation))
        if not self.truncation > 0:
            raise InvalidDomain('truncation must be positive')
        self._validate_shapes()
        symmetry = self.symmetry or self._infer_symmetry()
        if symmetry == RADIAL:
            self._check_radial()
        elif symmetry == AXISYMMETRIC:
            self._check_axisymmetric()
        else:
            raise InvalidDomain('unknown symmetry {!r}'.format(symmetry))
        object.__setattr__(self, 'symmetry', symmetry)

    @property
    def n(self):
        return self.background.n

    @property
    def balls(self):
        return tuple(e for e in self.exclusions if isinstance(e, Ball))

    @property
    def radii(self):
        return tuple(e.radius for e in self.exclusions)

    def _validate_shapes(self):
        n = self.n
        balls = self.balls
        others = [e for e in self.exclusions if not isinstance(e, Ball)]
        if others and len(self.exclusions) != 1:
            raise InvalidDomain('tubes and slabs must be the only exclusion')
        for e in others:
            if isinstance(e, Tube):
                check_tube(n, e.k)
            elif not isinstance(e, Slab):
                raise InvalidDomain('unknown exclusion {!r}'.format(e))
            if self.background.is_sphere:
                raise InvalidDomain('{} exclusions need a flat background'.format(e.shape))
            if self.singular_outer:
                raise InvalidDomain('{} exclusions take Dirichlet outer data'.format(e.shape))
            if e.radius is not None and not e.radius < self.truncation:
                raise InvalidDomain('{} radius must be below the truncation'.format(e.shape))
        for b in balls:
            if len(b.center) != n:
                raise InvalidDomain('ball center must have {} coordinates'.format(n))
        for i, a in enumerate(balls):
            for b in balls[i + 1:]:
                gap = np.linalg.norm(np.subtract(a.center, b.center)) - a.radius - b.radius
                if not gap > 0:
                    raise OverlappingExclusions('{} and {}'.format(a, b))
        for b in balls:
            if self.singular_outer:
                reach = np.linalg.norm(np.subtract(b.center, self.center)) + b.radius
            else:
                reach = b.radius
            if not reach < self.truncation:
                raise InvalidDomain('{} is not inside the truncation {}'.format(b, self.truncation))
        if not self.exclusions and not self.singular_outer:
            raise InvalidDomain('nothing is excised')

    def _infer_symmetry(self):
        if self._radial_profile() is not None:
            return RADIAL
        return AXISYMMETRIC

    def _radial_profile(self):
        centered = not np.any(np.asarray(self.center))
        if not self.exclusions:
            return 'poincare' if centered else None
        if len(self.exclusions) != 1:
            return None
        e = self.exclusions[0]
        if isinstance(e, Tube):
            return 'tube'
        if isinstance(e, Slab):
            return 'slab'
        if not np.any(np.asarray(e.center)) and not self.singular_outer:
            return 'ball'
        return None

    def _check_radial(self):
        if self._radial_profile() is None:
            raise InvalidDomain('radial symmetry needs one exclusion centered at the origin')

    def _features(self):
        points = [np.asarray(b.center) for b in self.balls]
        if self.singular_outer:
            points.append(np.asarray(self.center))
        return points

    def _check_axisymmetric(self):
        if any(not isinstance(e, Ball) for e in self.exclusions):
            raise InvalidDomain('axisymmetric domains only excise balls')
        axis, origin, _ = self.frame()
        scale = max([1.0] + [np.linalg.norm(p) for p in self._features()])
        for p in self._features():
            off = (p - origin) - np.dot(p - origin, axis) * axis
            if np.linalg.norm(off) > 1e-9 * scale:
                raise InvalidDomain('ball centers are not collinear')
        if self.background.is_sphere and np.linalg.norm(origin) > 1e-12 * scale:
            raise InvalidDomain('on the sphere chart the axis must pass through the origin')

    @property
    def profile(self):
        """Radial profile name: ball, tube, slab or poincare."""
        return self._radial_profile() if self.symmetry == RADIAL else None

    @property
    def transverse_dimension(self):
        profile = self.profile
        if profile == 'tube':
            return self.n - self.exclusions[0].k
        if profile == 'slab':
            return 1
        return self.n

    def frame(self):
        """
        Axis direction, axis origin and a perpendicular unit vector.

        The axis joins the two farthest feature points, or is the last
        coordinate axis through a single one. The origin is the projection of
        the coordinate origin onto the axis.
        """
        n = self.n
        points = self._features()
        axis = np.zeros(n)
        axis[-1] = 1.0
        if len(points) >= 2:
            first = points[0]
            far = max(points, key=lambda p: np.linalg.norm(p - first))
            if np.linalg.norm(far - first) > 0:
                axis = _unit(far - first)
        anchor = points[0] if points else np.zeros(n)
        origin = anchor - np.dot(anchor, axis) * axis
        perp = np.zeros(n)
        perp[int(np.argmin(np.abs(axis)))] = 1.0
        perp = _unit(perp - np.dot(perp, axis) * axis)
        return axis, origin, perp

    # reduced coordinates

    def radial_direction(self):
        n = self.n
        e = np.zeros(n)
        profile = self.profile
        if profile == 'tube':
            e[self.exclusions[0].k] = 1.0
        elif profile == 'slab':
            e[-1] = 1.0
        else:
            e[0] = 1.0
        return e

    def radial_coordinate(self, x):
        x = np.asarray(x, dtype=float)
        profile = self.profile
        if profile == 'tube':
            y = x[..., self.exclusions[0].k:]
            return np.sqrt(np.sum(y * y, axis=-1))
        if profile == 'slab':
            return np.array(x[..., -1])
        return np.sqrt(np.sum(x * x, axis=-1))

    def reduce(self, x):
        """Reduced coordinates: ``(s,)`` or ``(z, rho)`` arrays."""
        x = np.asarray(x, dtype=float)
        if self.symmetry == RADIAL:
            return (self.radial_coordinate(x),)
        axis, origin, _ = self.frame()
        y = x - origin
        z = y @ axis
        off = y - z[..., None] * axis
        return z, np.sqrt(np.sum(off * off, axis=-1))

    def embed(self, *coords):
        """Points of n-space with the given reduced coordinates."""
        if self.symmetry == RADIAL:
            s = np.asarray(coords[0], dtype=float)
            return s[..., None] * self.radial_direction()
        axis, origin, perp = self.frame()
        z, rho = (np.asarray(c, dtype=float) for c in coords)
        return origin + z[..., None] * axis + rho[..., None] * perp

    def reduced_balls(self):
        """``(z_c, r)`` of each ball on the axis."""
        axis, origin, _ = self.frame()
        return [(float(np.dot(np.asarray(b.center) - origin, axis)), b.radius)
                for b in self.balls]

    def reduced_outer(self):
        if not self.singular_outer:
            return None
        axis, origin, _ = self.frame()
        return float(np.dot(np.asarray(self.center) - origin, axis)), self.truncation

    def reduced_signed_distance(self, z, rho):
        """
        Distance to the excised set in the meridian half-plane, negative
        inside it, with radius and orientation of the nearest sphere.

        The orientation is +1 for an excised ball and -1 for the excised
        exterior of a singular outer sphere.
        """
        z = np.asarray(z, dtype=float)
        rho = np.asarray(rho, dtype=float)
        best = np.full(np.broadcast(z, rho).shape, np.inf)
        radius = np.ones_like(best)
        sigma = np.ones_like(best)
        spheres = [(zc, r, 1.0) for zc, r in self.reduced_balls()]
        outer = self.reduced_outer()
        if outer is not None:
            spheres.append((outer[0], outer[1], -1.0))
        for zc, r, sg in spheres:
            dist = np.sqrt((z - zc) ** 2 + rho ** 2)
            d = (dist - r) if sg > 0 else (r - dist)
            closer = d < best
            best = np.where(closer, d, best)
            radius = np.where(closer, r, radius)
            sigma = np.where(closer, sg, sigma)
        return best, radius, sigma

    def signed_distance(self, x):
        """Distance to the excised set, negative inside it."""
        x = np.asarray(x, dtype=float)
        best = np.full(x.shape[:-1], np.inf)
        for e in self.exclusions:
            best = np.minimum(best, e.signed_distance(x))
        if self.singular_outer:
            d = x - np.asarray(self.center)
            best = np.minimum(best, self.truncation - np.sqrt(np.sum(d * d, axis=-1)))
        return best

    def contains(self, x):
        return self.signed_distance(x) > 0

    def extension(self, d, radius, sigma):
        """
        Smooth continuation ``d + sigma d^2 / (2 r)`` of ``v`` across a
        spherical boundary, exact for the hyperbolic ball and its exterior.
        """
        return d + sigma * d * d / (2.0 * radius)

    # transforms

    def with_radii(self, radii):
        radii = list(radii)
        if len(radii) != len(self.exclusions):
            raise InvalidDomain('need one radius per exclusion')
        excl = tuple(e.with_radius(r) for e, r in zip(self.exclusions, radii))
        return replace(self, exclusions=excl)

    def with_truncation(self, truncation):
        return replace(self, truncation=truncation)

    def descriptor(self):
        return {'background': {'kind': self.background.kind, 'n': self.n},
                'exclusions': [e.descriptor() for e in self.exclusions],
                'truncation': self.truncation,
                'symmetry': self.symmetry,
                'singular_outer': bool(self.singular_outer),
                'center': list(self.center)}

    @classmethod
    def from_descriptor(cls, desc):
        bg = Background(desc['background']['kind'], int(desc['background']['n']))
        return cls(bg, tuple(exclusion_from_descriptor(e) for e in desc['exclusions']),
                   truncation=desc['truncation'], symmetry=desc['symmetry'],
                   singular_outer=desc['singular_outer'], center=tuple(desc['center']))


def scale_domain(dom, lam):
    """Image of a domain under ``x -> lam x``."""
    lam = float(lam)
    if not lam > 0:
        raise InvalidDomain('scale must be positive')
    excl = []
    for e in dom.exclusions:
        if isinstance(e, Ball):
            excl.append(Ball(tuple(lam * np.asarray(e.center)), lam * e.radius))
        else:
            excl.append(e.with_radius(None if e.radius is None else lam * e.radius))
    return replace(dom, exclusions=tuple(excl), truncation=lam * dom.truncation,
                   center=tuple(lam * np.asarray(dom.center)))


def invert_domain(dom, truncation=None):
    """
    Image of a ball domain under the inversion ``x -> x/|x|^2``.

    Balls away from the origin stay balls; a ball around the origin turns
    into the singular outer sphere and a singular outer sphere around the
    origin into an excised ball. Without a singular outer sphere in the
    image the new truncation must be given.

    raises:
        * InvalidDomain: For tubes, slabs, the origin on a boundary, or a
          missing truncation.
    """
    from .closed_forms import _invert_ball

    if any(not isinstance(e, Ball) for e in dom.exclusions):
        raise InvalidDomain('only ball domains can be inverted')
    balls = []
    outer = None
    for b in dom.balls:
        center, radius, outside = _invert_ball(b.center, b.radius)
        if outside:
            balls.append(Ball(center, radius))
        else:
            outer = (center, radius)
    if dom.singular_outer:
        center, radius, outside = _invert_ball(dom.center, dom.truncation)
        if outside:
            raise InvalidDomain('the singular outer sphere must enclose the origin')
        balls.append(Ball(center, radius))
    if outer is not None:
        return DomainSpec(dom.background, tuple(balls), truncation=outer[1],
                          singular_outer=True, center=outer[0])
    if truncation is None:
        raise InvalidDomain('the inverted domain needs a truncation')
    return DomainSpec(dom.background, tuple(balls), truncation=truncation)


# GRIDS

def _unit_nodes(cells, grading, length=1.0):
    """``length (e^(b xi) - 1)/(e^b - 1)`` on a uniform ``xi`` grid."""
    xi = np.linspace(0.0, 1.0, cells + 1)
    beta = cfg.GRADING_REFERENCE_CELLS * np.log(grading)
    if beta == 0:
        return length * xi
    return length * np.expm1(beta * xi) / np.expm1(beta)


def radial_nodes(lo, hi, cells, grading=cfg.DEFAULT_GRADING, cluster='lo'):
    """
    Graded nodes on ``[lo, hi]`` clustered toward ``lo`` or ``hi``.

    With ``lo > 0`` the nodes are ``lo`` times the nodes of ``[1, hi/lo]``,
    so domains with equal radius ratio get exactly scaled node sets.
    Doubling ``cells`` keeps every old node.
    """
    if cluster == 'hi':
        t = _unit_nodes(cells, grading, hi - lo)
        return np.concatenate([[lo], (hi - t[::-1])[1:-1], [hi]])
    if lo > 0:
        s = lo * (1.0 + _unit_nodes(cells, grading, hi / lo - 1.0))
    else:
        s = lo + _unit_nodes(cells, grading, hi - lo)
    s[0], s[-1] = lo, hi
    return s


def graded_axis(lo, hi, features, h_far, slope):
    """
    Nodes on ``[lo, hi]`` with spacing ``min(h_far, h + slope d)`` minimized
    over the features ``(a, b, h)``, ``d`` the distance to ``[a, b]``.
    """
    features = [(min(a, b), max(a, b), min(h, h_far)) for a, b, h in features]

    def spacing(x):
        return min([h + slope * max(a - x, 0.0, x - b) for a, b, h in features] + [h_far])

    nodes = [lo]
    x = lo
    while x < hi:
        h = spacing(x)
        for _ in range(3):
            h = min(h, spacing(x + h))
        x = x + h
        nodes.append(x)
    nodes = np.asarray(nodes)
    if len(nodes) > 2 and (nodes[-1] - hi) > 0.5 * (nodes[-1] - nodes[-2]):
        nodes = nodes[:-1]
    return lo + (nodes - lo) * (hi - lo) / (nodes[-1] - lo)


def axisymmetric_nodes(dom, cells, grading=cfg.DEFAULT_GRADING):
    """
    Tensor grid ``(z, rho)`` covering the meridian half-plane of a domain.

    The box spans the ball centers plus the truncation in ``z`` and the
    truncation in ``rho``; a singular outer sphere gets its disk plus a
    margin of two cells. Spacings are graded toward every ball and the axis.
    """
    reduced = dom.reduced_balls()
    outer = dom.reduced_outer()
    slope = (grading - 1.0) * cfg.GRADING_REFERENCE_CELLS / cells
    if outer is not None:
        zo, big = outer
        margin = 2.0 * big / cells
        zlo, zhi, rhi = zo - big - margin, zo + big + margin, big + margin
    else:
        big = dom.truncation
        zs = [zc for zc, _ in reduced]
        zlo, zhi, rhi = min(zs) - big, max(zs) + big, big
    z_far = (zhi - zlo) / cells
    r_far = rhi / cells
    # each ball keeps its own near spacing
    near = [(zc, r, r * cfg.BALL_CELLS / cells) for zc, r in reduced]
    z = graded_axis(zlo, zhi, [(zc - r, zc + r, h) for zc, r, h in near], z_far, slope)
    rho = graded_axis(0.0, rhi, [(0.0, r, h) for _, r, h in near], r_far, slope)
    return z, rho


# LOCAL INTERPOLATION

def lagrange_weights(nodes, x):
    """
    Lagrange basis weights and their first two derivatives.

    :param nodes: Array ``(P, k)`` of distinct abscissae per point.
    :param x: Array ``(P,)`` of evaluation points.
    :rtype: Three arrays of shape ``(P, k)``.
    """
    npts, k = nodes.shape
    diff = x[:, None] - nodes
    w0 = np.zeros((npts, k))
    w1 = np.zeros((npts, k))
    w2 = np.zeros((npts, k))
    for j in range(k):
        others = [m for m in range(k) if m != j]
        den = np.prod([nodes[:, j] - nodes[:, m] for m in others], axis=0)
        w0[:, j] = np.prod([diff[:, m] for m in others], axis=0) / den
        for m in others:
            rest = [q for q in others if q != m]
            w1[:, j] += np.prod([diff[:, q] for q in rest], axis=0) / den
            for q in rest:
                last = [l for l in rest if l != q]
                w2[:, j] += np.prod([diff[:, l] for l in last], axis=0) / den
    return w0, w1, w2


def _window(nodes, x, width=4):
    cell = np.searchsorted(nodes, x, side='right') - 1
    cell = np.clip(cell, 0, len(nodes) - 2)
    return np.clip(cell - 1, 0, len(nodes) - width)


def _axis_weights(nodes, x, regular_center):
    """
    Window starts and weights ``(w0, w1, w2, w1_over_x)`` along one axis.

    Near a regular center (the symmetry axis or the Poincare center) the
    stencil is quadratic in ``t = x^2`` on the first three nodes, which keeps
    the even symmetry of the field.
    """
    start = _window(nodes, x)
    idx = start[:, None] + np.arange(4)
    w0, w1, w2 = lagrange_weights(nodes[idx], x)
    with np.errstate(divide='ignore', invalid='ignore'):
        w1x = w1 / x[:, None]
    if regular_center:
        central = x < nodes[1]
        if np.any(central):
            xc = x[central]
            t = nodes[:3] ** 2
            tw0, tw1, tw2 = lagrange_weights(np.tile(t, (len(xc), 1)), xc * xc)
            pad = np.zeros((len(xc), 1))
            start[central] = 0
            w0[central] = np.hstack([tw0, pad])
            w1[central] = np.hstack([2.0 * xc[:, None] * tw1, pad])
            w2[central] = np.hstack([2.0 * tw1 + 4.0 * (xc * xc)[:, None] * tw2, pad])
            w1x[central] = np.hstack([2.0 * tw1, pad])
    return start, w0, w1, w2, w1x


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


@dataclass(frozen=True, eq=False)
class SampledField(object):
    """
    Samples of ``v`` on the reduced grid of a symmetric domain.

    :param domain: The solved domain.
    :param coords: ``(s,)`` for radial grids, ``(z, rho)`` for
        axisymmetric ones.
    :param values: ``v`` at every node; excised nodes hold the smooth
        continuation of ``v`` across the boundary.
    :param excised: Nodes outside the domain.
    :param fixed: Nodes with Dirichlet values (excised ones included).
    :param diagnostics: ``residual``, ``newton_iters``, ``bracket_gap``,
        ``converged``, ``mode`` and, for brackets, the pinned node count.
    """
    domain: DomainSpec
    coords: tuple
    values: np.ndarray
    excised: np.ndarray
    fixed: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        coords = tuple(np.array(c, dtype=float) for c in self.coords)
        shape = tuple(len(c) for c in coords)
        arrays = {}
        for name, dtype in (('values', float), ('excised', bool), ('fixed', bool)):
            a = np.array(getattr(self, name), dtype=dtype)
            if a.shape != shape:
                raise InvalidDomain('{} has shape {}, grid {}'.format(name, a.shape, shape))
            a.flags.writeable = False
            arrays[name] = a
        for c in coords:
            c.flags.writeable = False
        object.__setattr__(self, 'coords', coords)
        for name, a in arrays.items():
            object.__setattr__(self, name, a)
        object.__setattr__(self, 'diagnostics', dict(self.diagnostics))

    @property
    def n(self):
        return self.domain.n

    @property
    def geometry(self):
        return self.domain.symmetry

    @property
    def shape(self):
        return self.values.shape

    @property
    def free(self):
        return ~self.fixed

    @property
    def regular_center(self):
        """Whether the first radial node is a regular center."""
        if self.geometry == AXISYMMETRIC:
            return True
        return self.domain.profile == 'poincare'

    @property
    def max_spacing(self):
        return max(float(np.max(np.diff(c))) for c in self.coords)

    def spacing_at(self, x):
        """Largest grid spacing of the cells around ``x``."""
        reduced = self.domain.reduce(np.asarray(x, dtype=float))
        h = 0.0
        for c, r in zip(self.coords, reduced):
            k = int(np.clip(np.searchsorted(c, r) - 1, 0, len(c) - 2))
            lo, hi = max(k - 1, 0), min(k + 2, len(c) - 1)
            h = max(h, float(np.max(np.diff(c[lo:hi + 1]))))
        return h

    def node_coords(self):
        """Reduced coordinates of every node, each shaped like the grid."""
        if self.geometry == RADIAL:
            return (self.coords[0],)
        return tuple(np.meshgrid(*self.coords, indexing='ij'))

    def node_points(self):
        return self.domain.embed(*self.node_coords())

    def orbit_distance_range(self, point):
        """
        Smallest and largest distance from ``point`` to the symmetry orbit of
        every node.
        """
        dom = self.domain
        p = np.asarray(point, dtype=float)
        if self.geometry == AXISYMMETRIC:
            zp, rp = dom.reduce(p)
            z, rho = self.node_coords()
            dz = (z - zp) ** 2
            return np.sqrt(dz + (rho - rp) ** 2), np.sqrt(dz + (rho + rp) ** 2)
        s = self.coords[0]
        profile = dom.profile
        if profile == 'slab':
            return np.abs(p[-1] - s), np.full(s.shape, np.inf)
        if profile == 'tube':
            k = dom.exclusions[0].k
            c = np.linalg.norm(p[k:])
            return np.abs(c - s), np.full(s.shape, np.inf)
        c = np.linalg.norm(p)
        return np.abs(c - s), c + s

    # interpolation

    def _unsupported(self, reduced, strict):
        dom = self.domain
        bad = np.zeros(reduced[0].shape, dtype=bool)
        for c, r in zip(self.coords, reduced):
            bad |= (r < c[0]) | (r > c[-1]) | ~np.isfinite(r)
        if strict and not dom.singular_outer:
            if self.geometry == RADIAL:
                bad |= reduced[0] > self.coords[0][-3]
            else:
                z, rho = reduced
                zc, rc = self.coords
                bad |= (z < zc[2]) | (z > zc[-3]) | (rho > rc[-3])
        if self.geometry == AXISYMMETRIC:
            d, _, _ = dom.reduced_signed_distance(*reduced)
            bad |= d < -1e-9 * dom.truncation
        return bad

    def _support(self, reduced, strict):
        bad = self._unsupported(reduced, strict)
        if np.any(bad):
            raise OutOfSupport('{} point(s) outside the grid support'.format(int(np.sum(bad))))

    def covers(self, x, strict=False):
        """Mask of the points of n-space inside the domain and the grid support."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape((-1, self.n))
        reduced = tuple(np.atleast_1d(r) for r in self.domain.reduce(flat))
        ok = self.domain.contains(flat) & ~self._unsupported(reduced, strict)
        return ok.reshape(x.shape[:-1])

    def _gather(self, index):
        stencil = self.values[index]
        if not np.all(np.isfinite(stencil)):
            raise NonFinite('in the interpolation stencil')
        return stencil

    def reduced_derivatives(self, reduced, strict=False):
        """
        Value and derivatives of ``v`` in reduced coordinates.

        Radial grids return ``(f, f_s, f_ss, f_s/s)``; axisymmetric grids
        return ``(f, f_z, f_r, f_zz, f_zr, f_rr, f_r/r)``.
        """
        reduced = tuple(np.atleast_1d(np.asarray(r, dtype=float)) for r in reduced)
        self._support(reduced, strict)
        if self.geometry == RADIAL:
            s = reduced[0]
            start, w0, w1, w2, w1s = _axis_weights(self.coords[0], s, self.regular_center)
            vals = self._gather(start[:, None] + np.arange(4))
            with np.errstate(invalid='ignore'):
                return tuple(np.sum(w * vals, axis=-1) for w in (w0, w1, w2, w1s))
        z, rho = reduced
        zs, a0, a1, a2, _ = _axis_weights(self.coords[0], z, False)
        rs, b0, b1, b2, b1r = _axis_weights(self.coords[1], rho, True)
        zi = zs[:, None] + np.arange(4)
        ri = rs[:, None] + np.arange(4)
        vals = self._gather((zi[:, :, None], ri[:, None, :]))

        def contract(wz, wr):
            return np.einsum('pi,pj,pij->p', wz, wr, vals)

        return (contract(a0, b0), contract(a1, b0), contract(a0, b1),
                contract(a2, b0), contract(a1, b1), contract(a0, b2), contract(a0, b1r))

    def interpolate(self, x, strict=False):
        """``v`` at points of n-space by local cubic interpolation."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        flat = x.reshape((-1, self.n))
        reduced = self.domain.reduce(flat)
        return self.reduced_derivatives(reduced, strict)[0].reshape(shape)

    def u(self, x, strict=False):
        return self.interpolate(x, strict) ** (-(self.n - 2) / 2.0)

    def jet(self, x, strict=False):
        """
        Full n-dimensional jet of ``v`` rebuilt from the reduced derivatives.

        raises:
            * OutOfSupport: Outside the grid, inside an excised region or,
              with ``strict``, within two cells of a truncation edge.
            * NonFinite: For non-finite stencil samples.
        """
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        n = self.n
        pts = x.reshape((-1, n))
        dom = self.domain
        eye = np.eye(n)
        if self.geometry == RADIAL:
            s = dom.radial_coordinate(pts)
            f, f1, f2, f1s = self.reduced_derivatives((s,), strict)
            profile = dom.profile
            if profile == 'slab':
                e = dom.radial_direction()
                grad = f1[:, None] * e
                hess = f2[:, None, None] * np.outer(e, e)
            else:
                proj = np.ones(n)
                if profile == 'tube':
                    proj[:dom.exclusions[0].k] = 0.0
                y = pts * proj
                with np.errstate(divide='ignore', invalid='ignore'):
                    unit = np.where(s[:, None] > 0, y / s[:, None], 0.0)
                uu = _outer(unit, unit)
                grad = f1s[:, None] * y
                hess = (f2[:, None, None] * uu +
                        f1s[:, None, None] * (np.diag(proj) - uu))
        else:
            axis, origin, _ = dom.frame()
            z, rho = dom.reduce(pts)
            f, fz, fr, fzz, fzr, frr, frr_over = self.reduced_derivatives((z, rho), strict)
            off = (pts - origin) - z[:, None] * axis
            with np.errstate(divide='ignore', invalid='ignore'):
                e = np.where(rho[:, None] > 0, off / rho[:, None], 0.0)
            aa = np.outer(axis, axis)
            ee = _outer(e, e)
            ae = _outer(np.broadcast_to(axis, e.shape), e)
            grad = fz[:, None] * axis + fr[:, None] * e
            hess = (fzz[:, None, None] * aa + fzr[:, None, None] * (ae + np.swapaxes(ae, 1, 2)) +
                    frr[:, None, None] * ee + frr_over[:, None, None] * (eye - aa - ee))
        return Jet2(f.reshape(shape), grad.reshape(shape + (n,)),
                    hess.reshape(shape + (n, n)))

    def with_diagnostics(self, **diagnostics):
        diag = dict(self.diagnostics)
        diag.update(diagnostics)
        return replace(self, diagnostics=diag)
