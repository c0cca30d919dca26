"""
.. module:: closed_forms
    :platform: Unix
    :synopsis: Exact solutions and harmonic building blocks.

Every oracle provides ``u`` and ``v = u^(-2/(n-2))`` together with exact
jets. They serve as ground truth, as Dirichlet data for truncated solves and
as sub/supersolution barriers.
"""
from dataclasses import dataclass

import numpy as np

from .conformal_core import FLAT, Background, Jet2
from .exceptions import InvalidDomain, InvalidTube, OutsideDomain
from .utils import get_logger


logger = get_logger('closed_forms')


def _point(p, n, name):
    p = tuple(float(t) for t in p)
    if len(p) != n:
        raise InvalidDomain('{} must have {} coordinates, got {}'.format(name, n, len(p)))
    return p


def _ball(ball, n):
    center, radius = ball
    if not radius > 0:
        raise InvalidDomain('ball radius must be positive, got {}'.format(radius))
    return (_point(center, n, 'ball center'), float(radius))


def tube_constant(n, k):
    """Slope c of ``v = c |x''|`` for the complement of a k-plane."""
    return ((k - (n - 2) / 2.0) * (2.0 / n)) ** -0.5


def check_tube(n, k):
    if isinstance(k, bool) or int(k) != k:
        raise InvalidTube('got k = {!r}'.format(k))
    if not (n - 2) / 2.0 < k <= n - 2:
        raise InvalidTube('n = {}, k = {}, need {} < k <= {}'.format(
            n, k, (n - 2) / 2.0, n - 2))
    return int(k)


@dataclass(frozen=True)
class OracleSpec(object):
    """Base of all closed forms; ``n`` is the dimension."""
    n: int

    harmonic = False
    kind = None

    def __post_init__(self):
        Background(FLAT, self.n)

    def contains(self, x):
        raise NotImplementedError

    def jet_u(self, x):
        return self.jet_v(x) ** (-(self.n - 2) / 2.0)

    def jet_v(self, x):
        return self.jet_u(x) ** (-2.0 / (self.n - 2))

    def v(self, x):
        return self.jet_v(x).value

    def u(self, x):
        if self.harmonic:
            return self.jet_u(x).value
        return self.v(x) ** (-(self.n - 2) / 2.0)


def _exterior_v(x, center, radius):
    d = x - np.asarray(center)
    return (np.sum(d * d, axis=-1) - radius * radius) / (2.0 * radius)


@dataclass(frozen=True)
class ExteriorBall(OracleSpec):
    """Hyperbolic metric on the complement of a closed ball."""
    center: tuple
    radius: float

    kind = 'ExteriorBall'

    def __post_init__(self):
        super(ExteriorBall, self).__post_init__()
        c, r = _ball((self.center, self.radius), self.n)
        object.__setattr__(self, 'center', c)
        object.__setattr__(self, 'radius', r)

    def contains(self, x):
        return _exterior_v(x, self.center, self.radius) > 0

    def v(self, x):
        return _exterior_v(x, self.center, self.radius)

    def jet_v(self, x):
        q = Jet2.squared_distance(x, self.center) - self.radius ** 2
        return q * (1.0 / (2.0 * self.radius))


@dataclass(frozen=True)
class PoincareBall(OracleSpec):
    """Hyperbolic metric of the open ball of radius R."""
    radius: float
    center: tuple = None

    kind = 'PoincareBall'

    def __post_init__(self):
        super(PoincareBall, self).__post_init__()
        center = self.center if self.center is not None else (0.0,) * self.n
        c, r = _ball((center, self.radius), self.n)
        object.__setattr__(self, 'center', c)
        object.__setattr__(self, 'radius', r)

    def contains(self, x):
        return self.v(x) > 0

    def v(self, x):
        d = x - np.asarray(self.center)
        return (self.radius ** 2 - np.sum(d * d, axis=-1)) / (2.0 * self.radius)

    def jet_v(self, x):
        q = Jet2.squared_distance(x, self.center)
        return (q - self.radius ** 2) * (-1.0 / (2.0 * self.radius))


@dataclass(frozen=True)
class HalfSpace(OracleSpec):
    """Hyperbolic half-space ``x_n > 0``."""

    kind = 'HalfSpace'

    def contains(self, x):
        return np.asarray(x)[..., -1] > 0

    def v(self, x):
        return np.array(np.asarray(x, dtype=float)[..., -1])

    def jet_v(self, x):
        return Jet2.coordinate(x, self.n - 1)


@dataclass(frozen=True)
class TubeComplement(OracleSpec):
    """Complement of the k-plane spanned by the first k coordinates."""
    k: int

    kind = 'TubeComplement'

    def __post_init__(self):
        super(TubeComplement, self).__post_init__()
        object.__setattr__(self, 'k', check_tube(self.n, self.k))

    @property
    def slope(self):
        return tube_constant(self.n, self.k)

    def _s(self, x):
        y = np.asarray(x, dtype=float)[..., self.k:]
        return np.sqrt(np.sum(y * y, axis=-1))

    def contains(self, x):
        return self._s(x) > 0

    def v(self, x):
        return self.slope * self._s(x)

    def jet_v(self, x):
        x = np.asarray(x, dtype=float)
        proj = np.zeros(self.n)
        proj[self.k:] = 1.0
        y = x * proj
        s = self._s(x)
        unit = y / s[..., None]
        hess = (np.diag(proj) - unit[..., :, None] * unit[..., None, :]) / s[..., None, None]
        return Jet2(s, unit, hess) * self.slope


@dataclass(frozen=True)
class GreenPole(OracleSpec):
    """``c |x - x0|^(2-n)``, harmonic away from the pole."""
    pole: tuple
    coefficient: float = 1.0

    kind = 'GreenPole'
    harmonic = True

    def __post_init__(self):
        super(GreenPole, self).__post_init__()
        object.__setattr__(self, 'pole', _point(self.pole, self.n, 'pole'))
        if not self.coefficient > 0:
            raise InvalidDomain('coefficient must be positive')

    def contains(self, x):
        d = np.asarray(x, dtype=float) - np.asarray(self.pole)
        return np.sum(d * d, axis=-1) > 0

    def jet_u(self, x):
        q = Jet2.squared_distance(x, self.pole)
        return (q ** ((2.0 - self.n) / 2.0)) * self.coefficient


@dataclass(frozen=True)
class Multipole(OracleSpec):
    """Positive combination of Green poles."""
    poles: tuple
    coefficients: tuple

    kind = 'Multipole'
    harmonic = True

    def __post_init__(self):
        super(Multipole, self).__post_init__()
        poles = tuple(_point(p, self.n, 'pole') for p in self.poles)
        coefs = tuple(float(a) for a in self.coefficients)
        if not poles or len(poles) != len(coefs):
            raise InvalidDomain('need one positive coefficient per pole')
        if any(not a > 0 for a in coefs):
            raise InvalidDomain('Multipole coefficients must be positive')
        object.__setattr__(self, 'poles', poles)
        object.__setattr__(self, 'coefficients', coefs)

    @property
    def members(self):
        return [GreenPole(self.n, p, a) for p, a in zip(self.poles, self.coefficients)]

    def contains(self, x):
        return np.logical_and.reduce([m.contains(x) for m in self.members])

    def jet_u(self, x):
        members = self.members
        total = members[0].jet_u(x)
        for m in members[1:]:
            total = total + m.jet_u(x)
        return total


class _BallFamily(OracleSpec):

    @property
    def members(self):
        return [ExteriorBall(self.n, c, r) for c, r in self.balls]

    def contains(self, x):
        return np.logical_and.reduce([m.contains(x) for m in self.members])

    def u(self, x):
        return np.sum([m.u(x) for m in self.members], axis=0)

    def v(self, x):
        return self.u(x) ** (-2.0 / (self.n - 2))


@dataclass(frozen=True)
class BallSum(_BallFamily):
    """Sum of exterior-ball solutions, a supersolution."""
    balls: tuple

    kind = 'BallSum'

    def __post_init__(self):
        super(BallSum, self).__post_init__()
        if not self.balls:
            raise InvalidDomain('BallSum needs at least one ball')
        object.__setattr__(self, 'balls', tuple(_ball(b, self.n) for b in self.balls))

    def jet_u(self, x):
        members = self.members
        total = members[0].jet_u(x)
        for m in members[1:]:
            total = total + m.jet_u(x)
        return total


@dataclass(frozen=True)
class TwoBallSuper(_BallFamily):
    """``u_1 + u_2`` for two exterior-ball solutions."""
    p1: tuple
    r1: float
    p2: tuple
    r2: float

    kind = 'TwoBallSuper'

    def __post_init__(self):
        super(TwoBallSuper, self).__post_init__()
        for ball in ((self.p1, self.r1), (self.p2, self.r2)):
            _ball(ball, self.n)

    @property
    def balls(self):
        return (_ball((self.p1, self.r1), self.n), _ball((self.p2, self.r2), self.n))

    def jet_u(self, x):
        first, second = self.members
        return first.jet_u(x) + second.jet_u(x)


@dataclass(frozen=True)
class BallMaximum(_BallFamily):
    """Pointwise maximum of exterior-ball solutions, a subsolution."""
    balls: tuple

    kind = 'BallMaximum'

    def __post_init__(self):
        super(BallMaximum, self).__post_init__()
        if not self.balls:
            raise InvalidDomain('BallMaximum needs at least one ball')
        object.__setattr__(self, 'balls', tuple(_ball(b, self.n) for b in self.balls))

    def v(self, x):
        return np.min([m.v(x) for m in self.members], axis=0)

    def u(self, x):
        return np.max([m.u(x) for m in self.members], axis=0)

    def jet_v(self, x):
        members = self.members
        values = np.array([m.v(x) for m in members])
        pick = np.argmin(values, axis=0)
        jets = [m.jet_v(x) for m in members]
        value = np.choose(pick, [j.value for j in jets])
        grad = np.choose(pick[..., None], [j.gradient for j in jets])
        hess = np.choose(pick[..., None, None], [j.hessian for j in jets])
        return Jet2(value, grad, hess)


@dataclass(frozen=True)
class Constant(OracleSpec):
    """A positive constant, harmonic and conformally flat."""
    value: float = 1.0

    kind = 'Constant'
    harmonic = True

    def __post_init__(self):
        super(Constant, self).__post_init__()
        if not self.value > 0:
            raise InvalidDomain('constant must be positive')

    def contains(self, x):
        return np.ones(np.asarray(x).shape[:-1], dtype=bool)

    def jet_u(self, x):
        return Jet2.constant(self.value, x)


KINDS = {cls.kind: cls for cls in (ExteriorBall, PoincareBall, HalfSpace,
                                   TubeComplement, GreenPole, Multipole,
                                   TwoBallSuper, BallSum, BallMaximum, Constant)}


def make_oracle(kind, n, **params):
    """
    Build an oracle from its kind name and keyword parameters.

    raises:
        * KeyError: For an unknown kind.
    """
    return KINDS[kind](n=n, **params)


def _checked(spec, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n:
        raise OutsideDomain('point dimension {} != {}'.format(x.shape[-1], spec.n))
    inside = np.asarray(spec.contains(x))
    if not np.all(inside):
        raise OutsideDomain('{} at {}'.format(spec.kind, x[~inside][0] if x.ndim > 1 else x))
    return x


def oracle_u(spec, x):
    """
    Exact ``u`` of an oracle at one point or a batch of points.

    raises:
        * OutsideDomain: If any point lies outside the oracle's domain.
    """
    x = _checked(spec, x)
    return spec.u(x)


def oracle_v(spec, x):
    """``v = u^(-2/(n-2))``, in closed form where it is polynomial."""
    x = _checked(spec, x)
    return spec.v(x)


def oracle_jet_u(spec, x):
    return spec.jet_u(_checked(spec, x))


def oracle_jet_v(spec, x):
    return spec.jet_v(_checked(spec, x))


def oracle_residual(spec, x):
    """
    ``lap u`` for harmonic oracles, ``lap u - n(n-2)/4 u^((n+2)/(n-2))``
    for the others. Supersolutions such as :class:`BallSum` give values
    <= 0.
    """
    x = _checked(spec, x)
    j = spec.jet_u(x)
    lap = j.laplacian()
    if spec.harmonic:
        return lap
    n = spec.n
    return lap - 0.25 * n * (n - 2) * j.value ** ((n + 2.0) / (n - 2.0))


# ISOMETRIES OF THE CONFORMAL METRICS

def scale_oracle(spec, lam):
    """
    Oracle for ``lam^(-(n-2)/2) u(x / lam)``, the pullback of the metric of
    ``spec`` under ``x -> x / lam``.
    """
    n = spec.n
    lam = float(lam)
    w = lam ** (-(n - 2) / 2.0)
    sc = lambda p: tuple(lam * np.asarray(p))
    if isinstance(spec, ExteriorBall):
        return ExteriorBall(n, sc(spec.center), lam * spec.radius)
    if isinstance(spec, PoincareBall):
        return PoincareBall(n, lam * spec.radius, sc(spec.center))
    if isinstance(spec, HalfSpace):
        return spec
    if isinstance(spec, GreenPole):
        return GreenPole(n, sc(spec.pole), spec.coefficient * w * lam ** (n - 2))
    if isinstance(spec, Multipole):
        return Multipole(n, tuple(sc(p) for p in spec.poles),
                         tuple(a * w * lam ** (n - 2) for a in spec.coefficients))
    if isinstance(spec, (BallSum, TwoBallSuper)):
        return BallSum(n, tuple((sc(c), lam * r) for c, r in spec.balls))
    if isinstance(spec, Constant):
        return Constant(n, spec.value * w)
    raise InvalidDomain('no scaling rule for {}'.format(spec.kind))


def _invert_ball(center, radius):
    c = np.asarray(center)
    den = float(np.dot(c, c) - radius * radius)
    if den == 0:
        raise InvalidDomain('the inversion center lies on the sphere')
    return tuple(c / den), radius / abs(den), den > 0


def invert_oracle(spec):
    """
    Kelvin transform ``|x|^(2-n) u(x/|x|^2)``, the pullback under the
    inversion in the unit sphere.
    """
    n = spec.n
    if isinstance(spec, ExteriorBall):
        center, radius, outside = _invert_ball(spec.center, spec.radius)
        if outside:
            return ExteriorBall(n, center, radius)
        return PoincareBall(n, radius, center)
    if isinstance(spec, GreenPole):
        a = np.asarray(spec.pole)
        a2 = float(np.dot(a, a))
        if a2 == 0:
            return Constant(n, spec.coefficient)
        return GreenPole(n, tuple(a / a2), spec.coefficient * a2 ** ((2.0 - n) / 2.0))
    if isinstance(spec, Multipole):
        members = [invert_oracle(m) for m in spec.members]
        if any(not isinstance(m, GreenPole) for m in members):
            raise InvalidDomain('a pole sits at the inversion center')
        return Multipole(n, tuple(m.pole for m in members),
                         tuple(m.coefficient for m in members))
    if isinstance(spec, (BallSum, TwoBallSuper)):
        balls = []
        for c, r in spec.balls:
            center, radius, outside = _invert_ball(c, r)
            if not outside:
                raise InvalidDomain('a ball contains the inversion center')
            balls.append((center, radius))
        return BallSum(n, tuple(balls))
    if isinstance(spec, Constant):
        return GreenPole(n, (0.0,) * n, spec.value)
    raise InvalidDomain('no inversion rule for {}'.format(spec.kind))


def invert_points(x):
    x = np.asarray(x, dtype=float)
    return x / np.sum(x * x, axis=-1)[..., None]
