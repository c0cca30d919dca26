"""
.. module:: conformal_core
    :platform: Unix
    :synopsis: Background geometries, second-order jets and the curvature of
        conformal metrics ``v^-2 g``.

The conformal metric is always handled through ``v = u^(-2/(n-2))``. Ricci
components are returned in the orthonormal frame ``{v e_k}`` of ``v^-2 g``,
where ``{e_k}`` is orthonormal for the background ``g``. Round spheres are
handled in the stereographic chart ``g = phi^2 delta`` with
``phi = 2/(1+|x|^2)``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import cfg
from .exceptions import (InvalidDimension, InvalidDomain, NonFinite,
                         NonpositiveConformalFactor, PoleCollision)
from .utils import get_logger


logger = get_logger('conformal_core')

FLAT = 'flat'
SPHERE = 'sphere'


@dataclass(frozen=True)
class Background(object):
    """
    Flat n-space or the unit round n-sphere seen in a stereographic chart.

    :param kind: ``'flat'`` or ``'sphere'``.
    :param n: Dimension, an integer >= 3.

    raises:
        * InvalidDimension: If n is not an integer >= 3.
        * ValueError: For an unknown kind.
    """
    kind: str = FLAT
    n: int = 3

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise InvalidDimension('got {!r}'.format(self.n))
        if self.n < cfg.MIN_DIMENSION:
            raise InvalidDimension('got {}'.format(self.n))
        if self.kind not in (FLAT, SPHERE):
            raise ValueError('Unknown background kind {!r}'.format(self.kind))

    @property
    def is_sphere(self):
        return self.kind == SPHERE

    @property
    def scalar_curvature(self):
        return float(self.n * (self.n - 1)) if self.is_sphere else 0.0

    @property
    def ricci_constant(self):
        """Background Ricci in a g-orthonormal frame is this multiple of I."""
        return float(self.n - 1) if self.is_sphere else 0.0

    def conformal_factor(self, x):
        x = np.asarray(x, dtype=float)
        if not self.is_sphere:
            return np.ones(x.shape[:-1])
        return 2.0 / (1.0 + np.sum(x * x, axis=-1))

    def log_factor_gradient(self, x):
        x = np.asarray(x, dtype=float)
        if not self.is_sphere:
            return np.zeros_like(x)
        return -self.conformal_factor(x)[..., None] * x

    def psi(self, x):
        """Chart factor ``phi^((n-2)/2)`` relating flat and sphere ``u``."""
        return self.conformal_factor(x) ** ((self.n - 2) / 2.0)

    def factor_jet(self, x):
        x = np.asarray(x, dtype=float)
        if not self.is_sphere:
            return Jet2.constant(1.0, x)
        phi = self.conformal_factor(x)
        grad = -(phi ** 2)[..., None] * x
        hess = (2 * phi ** 3)[..., None, None] * x[..., :, None] * x[..., None, :]
        hess = hess - (phi ** 2)[..., None, None] * np.eye(self.n)
        return Jet2(phi, grad, hess)

    def chart_v(self, x, v_flat):
        """``v`` on the sphere chart of a metric given by its flat ``v``."""
        return self.conformal_factor(x) * v_flat


class Jet2(object):
    """
    Value, gradient and Hessian of a scalar field in background coordinates.

    Arrays may carry leading batch axes: ``value`` has shape ``B``,
    ``gradient`` ``B + (n,)`` and ``hessian`` ``B + (n, n)``. Arithmetic
    follows the product and chain rules and keeps the Hessian exactly
    symmetric.
    """

    __slots__ = ('value', 'gradient', 'hessian')
    # numpy scalars on the left defer to the reflected operators
    __array_ufunc__ = None

    def __init__(self, value, gradient, hessian):
        self.value = np.asarray(value, dtype=float)
        self.gradient = np.asarray(gradient, dtype=float)
        self.hessian = np.asarray(hessian, dtype=float)

    @property
    def n(self):
        return self.gradient.shape[-1]

    @classmethod
    def constant(cls, c, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        shape = x.shape[:-1]
        return cls(np.full(shape, float(c)), np.zeros(shape + (n,)),
                   np.zeros(shape + (n, n)))

    @classmethod
    def squared_distance(cls, x, p):
        """Jet of ``|x - p|^2``."""
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(p, dtype=float)
        n = x.shape[-1]
        hess = np.broadcast_to(2.0 * np.eye(n), x.shape[:-1] + (n, n))
        return cls(np.sum(d * d, axis=-1), 2.0 * d, hess.copy())

    @classmethod
    def coordinate(cls, x, k):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        grad = np.zeros(x.shape)
        grad[..., k] = 1.0
        return cls(x[..., k].copy(), grad, np.zeros(x.shape[:-1] + (n, n)))

    def compose(self, f0, f1, f2):
        """Jet of ``f(self)`` given ``f, f', f''`` evaluated at the value."""
        g = self.gradient
        hess = (f1[..., None, None] * self.hessian +
                f2[..., None, None] * g[..., :, None] * g[..., None, :])
        return Jet2(f0, f1[..., None] * g, hess)

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.value + other.value, self.gradient + other.gradient,
                        self.hessian + other.hessian)
        return Jet2(self.value + other, self.gradient, self.hessian)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.value, -self.gradient, -self.hessian)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet2):
            f, g = self, other
            cross = (f.gradient[..., :, None] * g.gradient[..., None, :] +
                     g.gradient[..., :, None] * f.gradient[..., None, :])
            hess = (f.hessian * g.value[..., None, None] + cross +
                    g.hessian * f.value[..., None, None])
            grad = (f.gradient * g.value[..., None] +
                    g.gradient * f.value[..., None])
            return Jet2(f.value * g.value, grad, hess)
        c = np.asarray(other, dtype=float)
        return Jet2(self.value * c, self.gradient * c[..., None],
                    self.hessian * c[..., None, None])

    __rmul__ = __mul__

    def __pow__(self, p):
        val = self.value
        return self.compose(val ** p, p * val ** (p - 1),
                            p * (p - 1) * val ** (p - 2))

    def __getitem__(self, index):
        return Jet2(self.value[index], self.gradient[index], self.hessian[index])

    def laplacian(self):
        return np.trace(self.hessian, axis1=-2, axis2=-1)

    def __repr__(self):
        return 'Jet2(value={!r}, gradient={!r})'.format(self.value, self.gradient)


@dataclass(frozen=True)
class RicciReport(object):
    """
    Ricci of ``v^-2 g`` in the frame ``{v e_k}``.

    ``components`` is symmetric, ``eigenvalues`` ascending,
    ``extremal_abs`` the largest eigenvalue modulus and ``trace`` the scalar
    curvature. Batched evaluations carry leading axes on every field.
    """
    components: np.ndarray
    eigenvalues: np.ndarray
    extremal_abs: np.ndarray
    trace: np.ndarray = field(default=None)

    def along(self, nu):
        """``R(nu, nu)`` for a background unit vector ``nu``."""
        nu = np.asarray(nu, dtype=float)
        return np.einsum('...i,...ij,...j->...', nu, self.components, nu)


def jacobi_eigenvalues(matrices, tol=cfg.JACOBI_TOL, max_sweeps=cfg.JACOBI_MAX_SWEEPS):
    """
    Eigenvalues of symmetric matrices by cyclic Jacobi rotations.

    Pairs ``(p, q)`` are swept in row order; a matrix stops changing once
    its off-diagonal norm is below ``tol`` times its largest entry.

    :param matrices: Array of shape ``(..., n, n)``.
    :rtype: Array ``(..., n)`` of ascending eigenvalues.
    """
    a = np.array(matrices, dtype=float)
    shape = a.shape[:-2]
    n = a.shape[-1]
    a = a.reshape((-1, n, n)).copy()
    scale = np.max(np.abs(a), axis=(1, 2)) if a.size else np.zeros(0)
    scale = np.where(scale > 0, scale, 1.0)
    idx = np.arange(n)
    for sweep in range(max_sweeps):
        off = a.copy()
        off[:, idx, idx] = 0.0
        if np.all(np.sqrt(np.sum(off * off, axis=(1, 2))) <= tol * scale):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                rotate = apq != 0.0
                safe = np.where(rotate, apq, 1.0)
                theta = (a[:, q, q] - a[:, p, p]) / (2.0 * safe)
                sign = np.where(theta >= 0.0, 1.0, -1.0)
                t = np.where(rotate, sign / (np.abs(theta) + np.sqrt(theta * theta + 1.0)), 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, :, p].copy()
                col_q = a[:, :, q].copy()
                a[:, :, p] = c[:, None] * col_p - s[:, None] * col_q
                a[:, :, q] = s[:, None] * col_p + c[:, None] * col_q
                row_p = a[:, p, :].copy()
                row_q = a[:, q, :].copy()
                a[:, p, :] = c[:, None] * row_p - s[:, None] * row_q
                a[:, q, :] = s[:, None] * row_p + c[:, None] * row_q
    else:
        logger.warning('Jacobi sweeps did not converge in %s sweeps.', max_sweeps)
    eig = np.sort(a[:, idx, idx], axis=1)
    return eig.reshape(shape + (n,))


def _metric_terms(bg, x, j):
    """Covariant Hessian, Laplacian and ``|grad v|^2`` in the metric g."""
    phi = bg.conformal_factor(x)
    w = bg.log_factor_gradient(x)
    g = j.gradient
    inv2 = phi ** -2
    gw = np.sum(w * g, axis=-1)
    eye = np.eye(j.n)
    cov = (j.hessian -
           (w[..., :, None] * g[..., None, :] + g[..., :, None] * w[..., None, :]) +
           gw[..., None, None] * eye)
    cov = inv2[..., None, None] * cov
    lap = inv2 * (j.laplacian() + (bg.n - 2) * gw)
    grad2 = inv2 * np.sum(g * g, axis=-1)
    return cov, lap, grad2


def ricci_components(bg, x, j):
    """
    Frame Ricci components of ``v^-2 g`` without positivity checks.

    At ``v = 0`` this is the boundary limit ``-(n-1)|grad v|^2 I``.
    """
    n = bg.n
    v = j.value
    cov, lap, grad2 = _metric_terms(bg, x, j)
    diag = bg.ricci_constant * v * v + v * lap - (n - 1) * grad2
    return (n - 2) * v[..., None, None] * cov + diag[..., None, None] * np.eye(n)


def _check_positive(j):
    v = j.value
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(j.gradient)) and
            np.all(np.isfinite(j.hessian))):
        raise NonFinite('in the jet of v')
    if np.any(v <= 0):
        raise NonpositiveConformalFactor('min v = {!r}'.format(float(np.min(v))))


def conformal_ricci(bg, j, x):
    """
    Ricci of ``g_Omega = v^-2 g`` at ``x`` in the frame ``{v e_k}``.

    :param bg: Background geometry.
    :type bg: :class:`Background`
    :param j: Jet of v, possibly batched.
    :type j: :class:`Jet2`
    :param x: Chart point(s) matching the batch of ``j``.
    :rtype: :class:`RicciReport`

    raises:
        * NonpositiveConformalFactor: If any ``v <= 0``.
        * NonFinite: If the jet has non-finite entries.
    """
    _check_positive(j)
    comp = ricci_components(bg, np.asarray(x, dtype=float), j)
    return report_from_components(comp)


def report_from_components(comp):
    eig = jacobi_eigenvalues(comp)
    extremal = np.max(np.abs(eig), axis=-1)
    return RicciReport(comp, eig, extremal, np.trace(comp, axis1=-2, axis2=-1))


def conformal_scalar(bg, j, x):
    """Scalar curvature of ``v^-2 g``: ``v^2 S + 2(n-1) v lap v - n(n-1)|grad v|^2``."""
    _check_positive(j)
    n = bg.n
    v = j.value
    _, lap, grad2 = _metric_terms(bg, np.asarray(x, dtype=float), j)
    return bg.scalar_curvature * v * v + 2 * (n - 1) * v * lap - n * (n - 1) * grad2


def laplace_beltrami(bg, j, x):
    phi = bg.conformal_factor(x)
    w = bg.log_factor_gradient(x)
    return phi ** -2 * (j.laplacian() + (bg.n - 2) * np.sum(w * j.gradient, axis=-1))


def conformal_laplacian(bg, j, x):
    """``L_g u = -lap_g u + (n-2) S_g u / (4(n-1))`` for a jet of ``u``."""
    n = bg.n
    return (-laplace_beltrami(bg, j, x) +
            (n - 2) * bg.scalar_curvature / (4.0 * (n - 1)) * j.value)


def yamabe_residual(bg, j, x):
    """
    Residual of the singular Yamabe equation for a jet of ``u``.

    ``-L_g u - n(n-2)/4 u^((n+2)/(n-2))``; supersolutions give values <= 0.
    """
    n = bg.n
    return (-conformal_laplacian(bg, j, x) -
            0.25 * n * (n - 2) * j.value ** ((n + 2.0) / (n - 2.0)))


def v_residual(bg, j, x):
    """``v lap_g v + S v^2/(2(n-1)) - (n/2)(|grad_g v|^2 - 1)``."""
    n = bg.n
    v = j.value
    _, lap, grad2 = _metric_terms(bg, np.asarray(x, dtype=float), j)
    return v * lap + bg.scalar_curvature * v * v / (2.0 * (n - 1)) - 0.5 * n * (grad2 - 1.0)


def jet2(field, x):
    """
    Value, gradient and Hessian of a sampled field at ``x``.

    Symmetric geometries are expanded to the full n-dimensional jet.

    raises:
        * OutOfSupport: If x is outside the grid or within two cells of an
          outer grid edge.
        * NonFinite: If the stencil holds non-finite samples.
    """
    return field.jet(np.asarray(x, dtype=float), strict=True)


# STEREOGRAPHIC CHARTS

@dataclass(frozen=True)
class Cap(object):
    """Closed geodesic ball on the unit sphere; angle 0 is a single point."""
    center: tuple
    angle: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        norm = np.linalg.norm(c)
        if norm == 0 or not 0.0 <= self.angle < np.pi:
            raise InvalidDomain('cap center {} angle {}'.format(self.center, self.angle))
        object.__setattr__(self, 'center', tuple(float(t) for t in c / norm))


@dataclass(frozen=True)
class SphereProblem(object):
    """
    The round ``S^n`` minus a finite union of caps, with the chart pole.
    """
    n: int
    caps: tuple = ()
    pole: tuple = None
    allow_rotation: bool = False
    truncation: float = None

    def __post_init__(self):
        Background(SPHERE, self.n)
        if self.pole is None:
            object.__setattr__(self, 'pole', tuple([0.0] * self.n + [1.0]))
        object.__setattr__(self, 'caps', tuple(self.caps))


def _householder(pole):
    """Symmetric orthogonal map sending ``pole`` to the last basis vector."""
    pole = np.asarray(pole, dtype=float)
    pole = pole / np.linalg.norm(pole)
    north = np.zeros_like(pole)
    north[-1] = 1.0
    w = pole - north
    if np.linalg.norm(w) < 1e-15:
        return np.eye(len(pole))
    return np.eye(len(pole)) - 2.0 * np.outer(w, w) / np.dot(w, w)


class ChartTransfer(object):
    """
    A sphere problem written in a stereographic chart.

    ``u_flat = psi * u_sphere`` maps solutions of the sphere problem to
    solutions of the flat problem on the same chart domain, since the two
    describe one and the same metric.
    """

    def __init__(self, n, rotation, flat_domain, sphere_domain, punctures=()):
        self.n = n
        self.rotation = rotation
        self.background = Background(SPHERE, n)
        self.flat_domain = flat_domain
        self.sphere_domain = sphere_domain
        self.punctures = tuple(punctures)

    def chart(self, y):
        z = np.asarray(y, dtype=float) @ self.rotation.T
        return z[..., :-1] / (1.0 - z[..., -1])[..., None]

    def sphere_point(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)[..., None]
        z = np.concatenate([2.0 * x, r2 - 1.0], axis=-1) / (r2 + 1.0)
        return z @ self.rotation.T

    def psi(self, x):
        return self.background.psi(x)

    def to_flat(self, x, u_sphere):
        return self.psi(x) * np.asarray(u_sphere, dtype=float)

    def to_sphere(self, x, u_flat):
        return np.asarray(u_flat, dtype=float) / self.psi(x)


def sphere_transfer(problem):
    """
    Move a problem on ``S^n`` minus caps to an equivalent chart problem.

    A cap containing the chart pole becomes the singular outer boundary, a
    point cap at the pole is dropped, other caps become excised balls and
    other point caps are kept as punctures.

    :type problem: :class:`SphereProblem`
    :rtype: :class:`ChartTransfer`

    raises:
        * PoleCollision: If a cap boundary passes through the pole and no
          rotation is allowed or every candidate pole collides.
    """
    candidates = [problem.pole]
    if problem.allow_rotation:
        candidates += [tuple(-np.asarray(cap.center)) for cap in problem.caps]
    last = None
    for pole in candidates:
        try:
            transfer = _transfer(problem, pole)
        except PoleCollision as error:
            last = error
            if not problem.allow_rotation:
                raise
            logger.info('Chart pole %s collides; trying the next one.', pole)
            continue
        return transfer
    raise last


def _transfer(problem, pole):
    from .grids import Ball, DomainSpec

    n = problem.n
    q = _householder(pole)
    balls = []
    punctures = []
    outer = None
    for cap in problem.caps:
        c = q @ np.asarray(cap.center)
        if cap.angle == 0.0:
            if abs(c[-1] - 1.0) < 1e-12:
                continue
            punctures.append(tuple(c[:-1] / (1.0 - c[-1])))
            continue
        alpha = c[-1] - np.cos(cap.angle)
        if abs(alpha) <= 1e-12:
            raise PoleCollision('cap {}'.format(cap))
        center = tuple(-c[:-1] / alpha)
        radius = float(np.sin(cap.angle) / abs(alpha))
        if alpha < 0:
            balls.append(Ball(center, radius))
        elif outer is not None:
            raise InvalidDomain('two caps contain the chart pole')
        else:
            outer = (center, radius)
    if outer is not None:
        truncation, center, singular = outer[1], outer[0], True
    else:
        extent = max([np.linalg.norm(b.center) + b.radius for b in balls] + [0.0])
        truncation = problem.truncation or max(cfg.DEFAULT_CHART_TRUNCATION, 2.0 * extent)
        center, singular = None, False
    kwargs = dict(exclusions=tuple(balls), truncation=truncation,
                  singular_outer=singular, center=center)
    flat = DomainSpec(Background(FLAT, n), **kwargs)
    sphere = DomainSpec(Background(SPHERE, n), **kwargs)
    logger.info('Sphere problem charted with %s balls, singular outer %s.',
                len(balls), singular)
    return ChartTransfer(n, q, flat, sphere, punctures)
