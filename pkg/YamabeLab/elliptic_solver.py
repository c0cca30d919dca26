"""
.. module:: elliptic_solver
    :platform: Unix
    :synopsis: Newton solvers for the singular Yamabe equation written for
        ``v = u^(-2/(n-2))``.

The discrete unknown is ``v``, which vanishes linearly on every singular
boundary, so the boundary condition is a plain Dirichlet ``v = 0``. The
residual is

    ``F(v) = v lap_g v + S v^2/(2(n-1)) - (n/2)(|grad_g v|^2 - 1)``

and ``F >= 0`` exactly when ``u`` is a supersolution. Radial grids use a
banded direct solve, axisymmetric grids an ILU-preconditioned GMRES.
"""
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

from . import cfg
from .closed_forms import (BallMaximum, BallSum, ExteriorBall, HalfSpace,
                           PoincareBall, TubeComplement)
from .exceptions import (AxisSingularity, BracketOrderViolation,
                         BracketViolation, InvalidDomain, NewtonDiverged,
                         NonConvergence)
from .grids import (AXISYMMETRIC, RADIAL, SampledField, axisymmetric_nodes,
                    radial_nodes)
from .utils import get_logger


logger = get_logger('elliptic_solver')


@dataclass(frozen=True)
class SolverParams(object):
    """
    Tolerances and grid sizes of a solve.

    raises:
        * ValueError: If ``tol <= 0`` or a grid size is below 64.
    """
    tol: float = cfg.DEFAULT_TOL
    max_newton: int = cfg.DEFAULT_MAX_NEWTON
    max_halvings: int = cfg.MAX_HALVINGS
    radial_grid: int = cfg.DEFAULT_RADIAL_GRID
    axisymmetric_grid: int = cfg.DEFAULT_AXISYMMETRIC_GRID
    grading: float = cfg.DEFAULT_GRADING

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError('tol must be positive, got {}'.format(self.tol))
        for name in ('radial_grid', 'axisymmetric_grid'):
            if int(getattr(self, name)) < cfg.MIN_GRID:
                raise ValueError('{} must be at least {}'.format(name, cfg.MIN_GRID))
        if not self.grading >= 1.0:
            raise ValueError('grading must be >= 1, got {}'.format(self.grading))

    def with_grid(self, cells):
        return replace(self, radial_grid=int(cells), axisymmetric_grid=int(cells))


# DISCRETE OPERATORS

def _three_point(hm, hp):
    """Second and first derivative weights on arms ``hm``, ``hp``."""
    tot = hm + hp
    d2 = (2.0 / (hm * tot), -2.0 / (hm * hp), 2.0 / (hp * tot))
    d1 = (-hp / (hm * tot), (hp - hm) / (hm * hp), hm / (hp * tot))
    return d2, d1


class Discretization(object):
    """
    ``F(V) = V (A V) + c_S V^2 - (n/2)(g2 sum_k (G_k V)^2 - 1)`` on a grid.

    ``A`` already carries the ``phi^-2`` factor of the sphere chart and
    ``g2`` is ``phi^-2``. Rows of fixed nodes are empty.
    """

    def __init__(self, dom, coords, A, grads, g2, fixed, excised, banded=False):
        self.domain = dom
        self.coords = tuple(coords)
        self.shape = tuple(len(c) for c in coords)
        self.n = dom.n
        self.A = A.tocsr()
        self.abs_A = abs(self.A)
        self.grads = [G.tocsr() for G in grads]
        self.g2 = np.ravel(g2)
        self.c_s = dom.background.scalar_curvature / (2.0 * (self.n - 1))
        self.fixed = np.ravel(fixed).copy()
        self.excised = np.ravel(excised).copy()
        self.free = ~self.fixed
        self.banded = banded

    def _gradient_square(self, V):
        return self.g2 * sum((G @ V) ** 2 for G in self.grads)

    def residual(self, V):
        F = V * (self.A @ V) + self.c_s * V * V - 0.5 * self.n * (self._gradient_square(V) - 1.0)
        F[self.fixed] = 0.0
        return F

    def scale(self, V):
        """Magnitude of the terms of ``F`` at every node."""
        return (1.0 + np.abs(V) * (self.abs_A @ np.abs(V)) +
                0.5 * self.n * self._gradient_square(V) + abs(self.c_s) * V * V)

    def scaled_residual(self, V):
        return self.residual(V) / self.scale(V)

    def jacobian(self, V, mask):
        AV = self.A @ V
        J = sp.diags(V) @ self.A + sp.diags(AV + 2.0 * self.c_s * V)
        for G in self.grads:
            J = J - self.n * (sp.diags(self.g2 * (G @ V)) @ G)
        J = J.tocsr()
        return J[mask][:, mask]

    def solve(self, J, b):
        if self.banded:
            ab = np.zeros((3, J.shape[0]))
            ab[0, 1:] = J.diagonal(1)
            ab[1, :] = J.diagonal(0)
            ab[2, :-1] = J.diagonal(-1)
            return solve_banded((1, 1), ab, b)
        J = J.tocsc()
        try:
            ilu = spla.spilu(J, drop_tol=1e-8, fill_factor=20)
            prec = spla.LinearOperator(J.shape, ilu.solve)
            x, info = spla.gmres(J, b, M=prec, rtol=cfg.LINEAR_RTOL, atol=0.0,
                                 restart=200, maxiter=50)
        except RuntimeError as error:
            x, info = None, str(error)
        if info != 0:
            logger.warning('GMRES did not converge (%s); falling back to a direct solve.', info)
            x = spla.spsolve(J, b)
        return x


def radial_coords(dom, cells, grading=cfg.DEFAULT_GRADING):
    profile = dom.profile
    outer = dom.truncation
    if profile == 'poincare':
        return (radial_nodes(0.0, outer, cells, grading, cluster='hi'),)
    if profile == 'slab':
        return (radial_nodes(0.0, outer, cells, grading),)
    return (radial_nodes(dom.exclusions[0].radius, outer, cells, grading),)


def _radial_operator(dom, coords):
    s = coords[0]
    n = dom.n
    m = dom.transverse_dimension
    size = len(s)
    phi = dom.background.conformal_factor(dom.embed(s))
    inv2 = phi ** -2
    center = dom.profile == 'poincare'
    fixed = np.zeros(size, dtype=bool)
    fixed[-1] = True
    if not center:
        fixed[0] = True
    i = np.arange(1, size - 1)
    d2, d1 = _three_point(s[i] - s[i - 1], s[i + 1] - s[i])
    a_s = (m - 1) / s[i]
    if dom.background.is_sphere:
        a_s = a_s - (n - 2) * phi[i] * s[i]
    rows, cols, avals, gvals = [], [], [], []
    for offset, w2, w1 in zip((-1, 0, 1), d2, d1):
        rows.append(i)
        cols.append(i + offset)
        avals.append(inv2[i] * (w2 + a_s * w1))
        gvals.append(w1)
    A = sp.coo_matrix((np.concatenate(avals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(size, size))
    G = sp.coo_matrix((np.concatenate(gvals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(size, size))
    if center:
        c = inv2[0] * m * 2.0 / s[1] ** 2
        A = A + sp.coo_matrix(([-c, c], ([0, 0], [0, 1])), shape=(size, size))
    return Discretization(dom, coords, A, [G], inv2, fixed, np.zeros(size, dtype=bool),
                          banded=True)


def _spheres(dom):
    spheres = [(zc, r, 1.0) for zc, r in dom.reduced_balls()]
    outer = dom.reduced_outer()
    if outer is not None:
        spheres.append((outer[0], outer[1], -1.0))
    return spheres


def _cut_arm(spheres, z, rho, dz, dr, h, d_here, d_there):
    """
    Distance along a grid line from a node to the excised set.

    Solves ``|P + t e - C|^2 = r^2`` for each sphere; the signed distances
    give a linear estimate when no root lies in the cell.
    """
    best = np.full(z.shape, np.inf)
    for zc, r, sg in spheres:
        pz = z - zc
        b = pz * dz + rho * dr
        c = pz * pz + rho * rho - r * r
        disc = b * b - c
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t = -b - sq if sg > 0 else -b + sq
        valid = ok & (t > 0) & (t <= h * (1.0 + 1e-12))
        best = np.where(valid, np.minimum(best, t), best)
    with np.errstate(divide='ignore', invalid='ignore'):
        linear = h * d_here / (d_here - d_there)
    return np.where(np.isfinite(best), best, linear)


def _shift(a, di, dj, fill):
    """``out[i, j] = a[i + di, j + dj]`` with ``fill`` off the grid."""
    out = np.full(a.shape, fill, dtype=a.dtype)
    nz, nr = a.shape
    src_i = slice(max(di, 0), nz + min(di, 0))
    dst_i = slice(max(-di, 0), nz + min(-di, 0))
    src_j = slice(max(dj, 0), nr + min(dj, 0))
    dst_j = slice(max(-dj, 0), nr + min(-dj, 0))
    out[dst_i, dst_j] = a[src_i, src_j]
    return out


def _axisymmetric_operator(dom, coords):
    z, rho = coords
    n = dom.n
    nz, nr = len(z), len(rho)
    Z, Rh = np.meshgrid(z, rho, indexing='ij')
    index = np.arange(nz * nr).reshape(nz, nr)
    d, _, _ = dom.reduced_signed_distance(Z, Rh)
    excised = d <= 0
    edge = np.zeros((nz, nr), dtype=bool)
    edge[0, :] = edge[-1, :] = edge[:, -1] = True
    fixed = excised | edge
    spheres = _spheres(dom)

    arms, cuts, spans = {}, {}, {}
    for key, (di, dj) in (('zm', (-1, 0)), ('zp', (1, 0)), ('rm', (0, -1)), ('rp', (0, 1))):
        if di:
            span = np.abs(_shift(Z, di, 0, np.nan) - Z)
        else:
            span = np.abs(_shift(Rh, 0, dj, np.nan) - Rh)
        cut = ~fixed & _shift(excised, di, dj, False)
        arm = span.copy()
        if np.any(cut):
            arm[cut] = _cut_arm(spheres, Z[cut], Rh[cut], float(di), float(dj), span[cut],
                                d[cut], _shift(d, di, dj, np.nan)[cut])
        arms[key], cuts[key], spans[key] = arm, cut, span
    near = np.zeros((nz, nr), dtype=bool)
    for key in arms:
        near |= cuts[key] & (arms[key] < cfg.CUT_CELL_MIN_FRACTION * spans[key])
    fixed = fixed | near
    free = ~fixed

    phi = dom.background.conformal_factor(dom.embed(Z, Rh))
    inv2 = phi ** -2
    with np.errstate(divide='ignore'):
        a_r = (n - 2) / Rh
    a_z = np.zeros_like(Z)
    if dom.background.is_sphere:
        a_z = -(n - 2) * phi * Z
        a_r = a_r - (n - 2) * phi * Rh

    rows, cols, avals = [], [], []
    grows, gcols, gvals = ([], []), ([], []), ([], [])

    def add(mask, step, weights, coef, cut, grad=None, gweights=None):
        r = index[mask]
        keep = ~cut[mask] if cut is not None else np.ones(r.shape, dtype=bool)
        rows.append(r[keep])
        cols.append(r[keep] + step)
        avals.append((coef[mask] * weights)[keep])
        if grad is not None:
            grows[grad].append(r[keep])
            gcols[grad].append(r[keep] + step)
            gvals[grad].append(gweights[keep])

    # z direction, every free node
    hm, hp = arms['zm'][free], arms['zp'][free]
    d2, d1 = _three_point(hm, hp)
    coef_zz = inv2
    for (step, cut), w2, w1 in zip(((-nr, cuts['zm']), (0, None), (nr, cuts['zp'])), d2, d1):
        add(free, step, w2 + (a_z[free] * w1), coef_zz, cut, 0, w1)

    # rho direction off the axis
    off = free & (Rh > 0)
    hm, hp = arms['rm'][off], arms['rp'][off]
    d2, d1 = _three_point(hm, hp)
    for (step, cut), w2, w1 in zip(((-1, cuts['rm']), (0, None), (1, cuts['rp'])), d2, d1):
        add(off, step, w2 + a_r[off] * w1, inv2, cut, 1, w1)

    # the axis: v_rho = 0 and v_rho/rho -> v_rhorho
    on = free & (Rh == 0)
    hp = arms['rp'][on]
    for step, cut, w in ((0, None, -2.0 / hp ** 2), (1, cuts['rp'], 2.0 / hp ** 2)):
        add(on, step, (n - 1) * w, inv2, cut)

    size = nz * nr
    A = sp.coo_matrix((np.concatenate(avals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(size, size))
    grads = [sp.coo_matrix((np.concatenate(gvals[k]) if gvals[k] else np.zeros(0),
                            (np.concatenate(grows[k]) if grows[k] else np.zeros(0, int),
                             np.concatenate(gcols[k]) if gcols[k] else np.zeros(0, int))),
                           shape=(size, size)) for k in (0, 1)]
    A = A.tocsr()
    if not np.all(np.isfinite(A.data)):
        raise AxisSingularity('in the assembled operator')
    disc = Discretization(dom, coords, A, grads, inv2, fixed, excised)
    disc.near = np.ravel(near)
    return disc


def discretize(dom, coords):
    """Discrete operator of a domain on the given reduced grid."""
    if dom.symmetry == RADIAL:
        return _radial_operator(dom, coords)
    return _axisymmetric_operator(dom, coords)


def grid_coords(dom, p):
    if dom.symmetry == RADIAL:
        return radial_coords(dom, p.radial_grid, p.grading)
    return axisymmetric_nodes(dom, p.axisymmetric_grid, p.grading)


# BOUNDARY DATA

def oracle_values(dom, oracle, points):
    """``v`` of a flat closed form in the domain's background."""
    with np.errstate(invalid='ignore', divide='ignore'):
        v = oracle.v(points)
    return dom.background.chart_v(points, v)


def matching_oracle(dom):
    """The closed form giving the outer data of a radial domain."""
    n = dom.n
    profile = dom.profile
    if profile == 'ball':
        return ExteriorBall(n, (0.0,) * n, dom.exclusions[0].radius)
    if profile == 'tube':
        return TubeComplement(n, dom.exclusions[0].k)
    if profile == 'slab':
        return HalfSpace(n)
    if profile == 'poincare':
        return PoincareBall(n, dom.truncation)
    raise InvalidDomain('no matching closed form for {} domains'.format(dom.symmetry))


def default_barriers(dom):
    """``(sub, super)`` in ``u``: the maximum and the sum of ball solutions."""
    balls = tuple((b.center, b.radius) for b in dom.balls)
    if not balls:
        raise InvalidDomain('barriers need excised balls')
    return BallMaximum(dom.n, balls), BallSum(dom.n, balls)


def _initial_guess(dom, disc, points, V):
    """
    Distance to the singular set, capped at the largest Dirichlet value
    already in ``V``.

    Free nodes are kept at half the smallest positive distance or above.
    """
    d = dom.background.chart_v(points, dom.signed_distance(points))
    inside = d[disc.free]
    inside = inside[inside > 0]
    floor = 0.5 * inside.min() if inside.size else 1.0
    guess = np.maximum(d, floor)
    cap = float(np.max(V[disc.fixed])) if np.any(disc.fixed) else 0.0
    if cap > 0:
        guess = np.minimum(guess, cap)
    return guess


def _boundary_values(dom, disc, points, data_values):
    """Values at fixed nodes: Dirichlet data, zero or the boundary expansion."""
    V = np.zeros(disc.fixed.shape)
    if dom.symmetry == RADIAL:
        if dom.profile == 'poincare':
            V[-1] = 0.0 if data_values is None else data_values[-1]
        else:
            V[-1] = data_values[-1]
        return V
    Z, Rh = np.meshgrid(*disc.coords, indexing='ij')
    d, rad, sg = dom.reduced_signed_distance(Z, Rh)
    ext = dom.background.chart_v(points, np.ravel(dom.extension(d, rad, sg)))
    special = disc.excised | disc.near
    V[special] = ext[special]
    edge = disc.fixed & ~special
    if data_values is not None:
        V[edge] = np.ravel(data_values)[edge]
    else:
        V[edge] = ext[edge]
    return V


# NEWTON

def _state(disc, V, tol, lower=None, upper=None):
    F = disc.residual(V)
    r = F / disc.scale(V)
    inactive = disc.free.copy()
    if lower is not None:
        slack = cfg.COMPARISON_SLACK * tol * np.maximum(1.0, np.abs(V))
        active = (((V - lower) <= slack) & (F < 0)) | (((upper - V) <= slack) & (F > 0))
        inactive &= ~active
    norm = float(np.max(np.abs(r[inactive]))) if np.any(inactive) else 0.0
    return F, r, inactive, norm


def _pseudo_step(disc, V, F, J, mask, norm, dt, p, label):
    """
    One implicit Euler step of ``v_t = F(v)`` linearised at ``V``.

    The step is weighted by ``|diag J|``. It is quartered until ``v`` stays
    positive and then grows with the residual ratio, at least by
    ``PSEUDO_TIME_GROWTH``. Returns the new field, its state and the next
    step.
    """
    weight = np.abs(J.diagonal())
    weight = np.maximum(weight, cfg.PSEUDO_TIME_WEIGHT_FLOOR * weight.max())
    for _ in range(p.max_halvings + 1):
        shifted = (J - sp.diags(weight / dt)).tocsr()
        delta = disc.solve(shifted, -F[mask])
        trial = V.copy()
        trial[mask] += delta
        if np.all(np.isfinite(trial)) and np.all(trial[disc.free] > 0):
            state = _state(disc, trial, p.tol)
            ratio = norm / state[3] if state[3] > 0 else np.inf
            dt = min(dt * max(ratio, cfg.PSEUDO_TIME_GROWTH), cfg.PSEUDO_TIME_LIMIT)
            return trial, state, dt
        dt *= 0.25
    raise NewtonDiverged('{}: pseudo time step collapsed at residual {:.3e}'.format(label, norm))


def _newton(disc, V, p, lower=None, upper=None, label='newton', pseudo_time=False):
    """
    Damped Newton on the free nodes, projected onto ``[lower, upper]`` when
    bounds are given.

    With ``pseudo_time`` the iteration starts with implicit Euler steps of
    ``v_t = F(v)`` whose step grows as the residual falls; past
    ``PSEUDO_TIME_LIMIT`` they are Newton steps. Newton steps are halved
    until the scaled residual drops by the Armijo factor and ``v`` stays
    positive; a stalled line search goes back to pseudo time when it is
    enabled. Returns the field, the step count, the final scaled residual
    and the number of nodes pinned at a bound.
    """
    bounded = lower is not None
    free = disc.free
    cap = cfg.MONOTONE_SWEEP_FACTOR * p.max_newton if bounded else p.max_newton
    dt = np.inf
    if pseudo_time:
        cap += cfg.PSEUDO_TIME_MAX_STEPS
        dt = cfg.PSEUDO_TIME_START
    V = V.copy()
    if bounded:
        V[free] = np.clip(V[free], lower[free], upper[free])
    F, r, inactive, norm = _state(disc, V, p.tol, lower, upper)
    for it in range(cap + 1):
        logger.debug('%s step %s: scaled residual %.3e', label, it, norm)
        if norm <= p.tol:
            pinned = int(np.sum(free & ~inactive & (np.abs(r) > p.tol)))
            return V, it, norm, pinned
        if it == cap:
            break
        J = disc.jacobian(V, inactive)
        if dt < cfg.PSEUDO_TIME_LIMIT:
            V, (F, r, inactive, norm), dt = _pseudo_step(disc, V, F, J, inactive, norm, dt, p,
                                                         label)
            continue
        delta = disc.solve(J, -F[inactive])
        alpha = 1.0
        for _ in range(p.max_halvings + 1):
            trial = V.copy()
            trial[inactive] += alpha * delta
            if bounded:
                trial[free] = np.clip(trial[free], lower[free], upper[free])
            if np.all(np.isfinite(trial)) and np.all(trial[free] > 0):
                state = _state(disc, trial, p.tol, lower, upper)
                if state[3] <= (1.0 - cfg.ARMIJO * alpha) * norm:
                    break
            alpha *= 0.5
        else:
            if pseudo_time:
                logger.debug('%s: line search stalled at %.3e, back to pseudo time.',
                             label, norm)
                dt = cfg.PSEUDO_TIME_START
                continue
            if bounded:
                raise NonConvergence('{}: line search stalled at residual {:.3e}'.format(label, norm))
            raise NewtonDiverged('{}: residual {:.3e} after {} steps'.format(label, norm, it))
        V = trial
        F, r, inactive, norm = state
    if bounded:
        raise NonConvergence('{}: {} sweeps, residual {:.3e}'.format(label, cap, norm))
    raise NewtonDiverged('{}: {} steps, residual {:.3e}'.format(label, cap, norm))


def _field(dom, disc, V, **diagnostics):
    shape = disc.shape
    V = V.reshape(shape)
    if dom.symmetry == AXISYMMETRIC and not np.all(np.isfinite(V[:, 0])):
        raise AxisSingularity('non-finite v on the axis')
    return SampledField(dom, disc.coords, V, disc.excised.reshape(shape),
                        disc.fixed.reshape(shape), diagnostics)


def _prepare(dom, p, data=None):
    coords = grid_coords(dom, p)
    disc = discretize(dom, coords)
    points = dom.embed(*(np.meshgrid(*coords, indexing='ij') if len(coords) > 1 else coords))
    points = points.reshape((-1, dom.n))
    data_values = None if data is None else oracle_values(dom, data, points)
    return disc, points, data_values


def _solve_single(dom, p, data, label, mode='newton'):
    disc, points, data_values = _prepare(dom, p, data)
    if data_values is None and dom.symmetry == RADIAL and dom.profile != 'poincare':
        data_values = oracle_values(dom, matching_oracle(dom), points)
    V = _boundary_values(dom, disc, points, data_values)
    if data is not None and dom.symmetry == RADIAL:
        V[disc.fixed] = data_values[disc.fixed]
    guess = _initial_guess(dom, disc, points, V)
    V[disc.free] = guess[disc.free]
    logger.info('Solving %s domain with %s nodes.', dom.symmetry, V.size)
    V, iters, norm, _ = _newton(disc, V, p, label=label, pseudo_time=True)
    logger.info('Solve converged in %s steps, residual %.3e.', iters, norm)
    return _field(dom, disc, V, residual=norm, newton_iters=iters, bracket_gap=None,
                  converged=True, mode=mode)


def solve_radial(dom, p=None, data=None):
    """
    Solve on a radially reduced domain.

    Exclusion boundaries get ``v = 0`` and the truncation shell the matching
    closed form; a Poincare ball has a regular center and ``v = 0`` on the
    outer sphere. An explicit ``data`` oracle supplies every Dirichlet value.

    :type dom: :class:`~YamabeLab.grids.DomainSpec`
    :type p: :class:`SolverParams`
    :param data: Optional closed form for all Dirichlet values.
    :rtype: :class:`~YamabeLab.grids.SampledField`

    raises:
        * NewtonDiverged: If the damped iteration fails.
        * InvalidDomain: For a non-radial domain.
    """
    p = p or SolverParams()
    if dom.symmetry != RADIAL:
        raise InvalidDomain('solve_radial needs a radial domain')
    if data is not None:
        return _solve_single(dom, p, data, 'radial', mode='data')
    return _solve_single(dom, p, None, 'radial')


def solve_axisymmetric(dom, p=None, data=None):
    """
    Solve on an axisymmetric ball domain.

    With a truncation carrying data the solution is bracketed: a lower run
    with the data of the maximum of the ball solutions and an upper run with
    the data of their sum. The upper field is returned with the relative
    ``bracket_gap`` between the two. A singular outer sphere leaves nothing
    to bracket and is solved by plain Newton.

    raises:
        * NewtonDiverged, NonConvergence, BracketViolation,
          BracketOrderViolation: From the iterations.
        * AxisSingularity: For non-finite values on the axis.
    """
    p = p or SolverParams()
    if dom.symmetry != AXISYMMETRIC:
        raise InvalidDomain('solve_axisymmetric needs an axisymmetric domain')
    if data is not None or dom.singular_outer:
        return _solve_single(dom, p, data, 'axisymmetric')
    sub, sup = default_barriers(dom)
    _, upper = monotone_bracket(dom, sub, sup, p)
    return upper


def solve(dom, p=None, data=None):
    if dom.symmetry == RADIAL:
        return solve_radial(dom, p, data)
    return solve_axisymmetric(dom, p, data)


def monotone_bracket(dom, sub, sup, p=None):
    """
    Lower and upper solutions between a subsolution and a supersolution.

    Each run is a projected Newton iteration in the order interval
    ``[v_super, v_sub]``; the lower run uses the data of ``sub``, the upper
    run the data of ``sup`` and is kept above the lower result in ``u``.

    :param sub: Subsolution in ``u`` (the larger ``v``).
    :param sup: Supersolution in ``u``.
    :rtype: ``(lower, upper)`` fields.

    raises:
        * BracketOrderViolation: If ``sub > sup`` somewhere on the grid.
        * BracketViolation: If more than 1% of free nodes stay pinned.
        * NonConvergence: If the sweeps stall.
    """
    p = p or SolverParams()
    disc, points, _ = _prepare(dom, p)
    v_sub = oracle_values(dom, sub, points)
    v_sup = oracle_values(dom, sup, points)
    inside = ~disc.excised
    scale = np.maximum(1.0, np.abs(v_sup[inside]))
    if np.any(v_sub[inside] < v_sup[inside] - 1e-12 * scale):
        worst = int(np.argmin(v_sub[inside] - v_sup[inside]))
        raise BracketOrderViolation('at node {}'.format(worst))
    fields = []
    upper_bound = v_sub
    for label, data in (('lower', v_sub), ('upper', v_sup)):
        V = _boundary_values(dom, disc, points, data)
        V[disc.free] = data[disc.free]
        if dom.symmetry == RADIAL:
            V[disc.fixed] = data[disc.fixed]
        V, iters, norm, pinned = _newton(disc, V, p, lower=v_sup, upper=upper_bound,
                                         label=label)
        if pinned > cfg.MAX_PINNED_FRACTION * np.sum(disc.free):
            raise BracketViolation('{} run: {} nodes pinned at a barrier'.format(label, pinned))
        logger.info('%s run converged in %s sweeps, residual %.3e, %s pinned.',
                    label.capitalize(), iters, norm, pinned)
        fields.append((V, iters, norm, pinned))
        upper_bound = V
    (v_lo, it_lo, res_lo, pin_lo), (v_up, it_up, res_up, pin_up) = fields
    free = disc.free
    exponent = -(dom.n - 2) / 2.0
    u_lo = v_lo[free] ** exponent
    u_up = v_up[free] ** exponent
    gap = float(np.max(np.abs(u_up - u_lo) / np.maximum(1.0, u_lo))) if free.any() else 0.0
    lower = _field(dom, disc, v_lo, residual=res_lo, newton_iters=it_lo, bracket_gap=gap,
                   converged=True, mode='lower', pinned=pin_lo)
    upper = _field(dom, disc, v_up, residual=res_up, newton_iters=it_up, bracket_gap=gap,
                   converged=True, mode='upper', pinned=pin_up)
    return lower, upper


# DIAGNOSTICS

def residual_norm(field):
    """Sup of the scaled residual over the free nodes of a field."""
    disc = discretize(field.domain, field.coords)
    V = np.ravel(field.values).astype(float)
    r = disc.scaled_residual(V)
    free = disc.free
    return float(np.max(np.abs(r[free]))) if free.any() else 0.0


def sample_field(dom, p, v):
    """
    A field holding ``v(x)`` on the solver grid of ``dom``.

    Excised nodes hold the boundary expansion, like solved fields.
    """
    disc, points, _ = _prepare(dom, p)
    V = _boundary_values(dom, disc, points, None) if dom.symmetry == AXISYMMETRIC \
        else np.zeros(points.shape[0])
    inside = ~(disc.excised | getattr(disc, 'near', np.zeros_like(disc.excised)))
    with np.errstate(invalid='ignore', divide='ignore'):
        values = np.asarray(v(points), dtype=float)
    V[inside] = values[inside]
    return _field(dom, disc, V, residual=None, newton_iters=0, bracket_gap=None,
                  converged=False, mode='sampled')


def sample_oracle(dom, p, oracle):
    return sample_field(dom, p, lambda x: oracle_values(dom, oracle, x))


def relative_error(field, oracle):
    """Sup over free nodes of ``|u - u_exact| / u_exact``."""
    pts = field.node_points().reshape((-1, field.n))
    free = np.ravel(field.free)
    exact = oracle_values(field.domain, oracle, pts[free]) ** (-(field.n - 2) / 2.0)
    u = np.ravel(field.values)[free] ** (-(field.n - 2) / 2.0)
    return float(np.max(np.abs(u - exact) / exact))


@dataclass(frozen=True)
class BoundaryFit(object):
    """
    Least-squares fit ``v = a d + b d^2`` in the first boundary layer.

    ``curvature`` is ``H = -2(n-1) b / a``, the mean curvature of the
    boundary for the interior normal, and ``gradient`` is ``a``, the
    extrapolated ``|grad v|`` on the boundary.
    """
    gradient: float
    curvature: float
    spacing: float


def fit_boundary_expansion(field, layer=cfg.BOUNDARY_LAYER_NODES):
    """
    Fit the boundary expansion ``v = d - H d^2 / (2(n-1))`` on a radial
    field.

    raises:
        * InvalidDomain: For fields without a spherical radial boundary.
    """
    dom = field.domain
    if field.geometry != RADIAL or dom.profile not in ('ball', 'poincare'):
        raise InvalidDomain('boundary fits need a radial ball or Poincare field')
    s = field.coords[0]
    v = field.values
    if dom.profile == 'ball':
        d = s[1:layer + 1] - s[0]
        vals = v[1:layer + 1]
        h = s[1] - s[0]
    else:
        d = s[-1] - s[-layer - 1:-1][::-1]
        vals = v[-layer - 1:-1][::-1]
        h = s[-1] - s[-2]
    phi = dom.background.conformal_factor(field.node_points())
    if dom.background.is_sphere:
        scale = phi[1:layer + 1] if dom.profile == 'ball' else phi[-layer - 1:-1][::-1]
        vals = vals / scale
    basis = np.stack([d, d * d], axis=1)
    (a, b), _, _, _ = np.linalg.lstsq(basis, vals, rcond=None)
    return BoundaryFit(float(a), float(-2.0 * (dom.n - 1) * b / a), float(h))


def boundary_gradient(field):
    """``|grad v|`` extrapolated to the inner boundary of a radial field."""
    return fit_boundary_expansion(field).gradient


def fitted_order(spacings, errors):
    """
    Log-log slope of the errors against the spacings.

    Errors at or below ``EXACT_ERROR`` are left out; None when fewer than
    two remain.
    """
    h = np.asarray(spacings, dtype=float)
    e = np.asarray(errors, dtype=float)
    ok = np.isfinite(e) & (e > cfg.EXACT_ERROR)
    if np.sum(ok) < 2:
        return None
    slope, _ = np.polyfit(np.log(h[ok]), np.log(e[ok]), 1)
    return float(slope)


@dataclass(frozen=True)
class ConvergenceStudy(object):
    cells: tuple
    spacings: tuple
    errors: tuple
    residuals: tuple

    @property
    def exact(self):
        """True when every grid reproduces the closed form to solver noise."""
        return bool(np.all(np.asarray(self.errors) <= cfg.EXACT_ERROR))

    @property
    def order(self):
        """Fitted exponent of the error against the largest spacing, or None."""
        return fitted_order(self.spacings, self.errors)

    def rows(self):
        return list(zip(self.cells, self.spacings, self.errors, self.residuals))


def convergence_study(dom, oracle, grids, p=None, data=None):
    """
    Solve ``dom`` on each grid size and measure the sup relative error
    against ``oracle``.

    :param data: Optional closed form for all Dirichlet values.
    """
    p = p or SolverParams()
    cells, spacings, errors, residuals = [], [], [], []
    for size in grids:
        field = solve(dom, p.with_grid(size), data)
        cells.append(int(size))
        spacings.append(field.max_spacing)
        errors.append(relative_error(field, oracle))
        residuals.append(field.diagnostics['residual'])
        logger.info('Grid %s: error %.3e.', size, errors[-1])
    return ConvergenceStudy(tuple(cells), tuple(spacings), tuple(errors), tuple(residuals))
