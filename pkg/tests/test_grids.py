import numpy as np
import pytest

from YamabeLab import cfg
from YamabeLab.closed_forms import ExteriorBall, oracle_jet_v
from YamabeLab.conformal_core import Background
from YamabeLab.exceptions import (InvalidDomain, InvalidTube, OutOfSupport,
                                  OverlappingExclusions)
from YamabeLab.grids import (AXISYMMETRIC, RADIAL, Ball, DomainSpec,
                             SampledField, Slab, Tube, axisymmetric_nodes,
                             invert_domain, lagrange_weights, radial_nodes,
                             scale_domain)


FLAT3 = Background('flat', 3)
O3 = (0.0, 0.0, 0.0)


class TestDomainSpec(object):

    @pytest.mark.parametrize("build,error", [
        (lambda: DomainSpec(FLAT3, (Ball(O3, 1.0),)), InvalidDomain),
        (lambda: DomainSpec(FLAT3, (), truncation=2.0), InvalidDomain),
        (lambda: DomainSpec(FLAT3, (Ball(O3, 1.0), Ball((1.5, 0, 0), 0.6)), truncation=4.0),
         OverlappingExclusions),
        (lambda: DomainSpec(FLAT3, (Ball(O3, 5.0),), truncation=4.0), InvalidDomain),
        (lambda: DomainSpec(FLAT3, (Ball(O3, 0.5), Slab()), truncation=4.0), InvalidDomain),
        (lambda: DomainSpec(Background('sphere', 3), (Slab(),)), InvalidDomain),
        (lambda: DomainSpec(Background('flat', 4), (Tube(1, 0.5),), truncation=4.0), InvalidTube),
        (lambda: DomainSpec(FLAT3, (Ball((1, 0, 0), 0.1), Ball((0, 1, 0), 0.1),
                                    Ball((0, 0, 1), 0.1)), truncation=4.0), InvalidDomain),
        (lambda: DomainSpec(FLAT3, (Ball((1, 0, 0), 0.1),), truncation=4.0, symmetry=RADIAL),
         InvalidDomain),
    ])
    def test_invalid_domains_raise(self, build, error):
        with pytest.raises(error):
            build()

    @pytest.mark.parametrize("exclusions,kwargs,symmetry,profile", [
        ((Ball(O3, 1.0),), {'truncation': 4.0}, RADIAL, 'ball'),
        ((Slab(),), {'truncation': 4.0}, RADIAL, 'slab'),
        ((), {'truncation': 2.0, 'singular_outer': True}, RADIAL, 'poincare'),
        ((Ball((0, 0, 1), 0.2),), {'truncation': 4.0}, AXISYMMETRIC, None),
        ((Ball((0, 0, -1), 0.2), Ball((0, 0, 1), 0.2)), {'truncation': 4.0}, AXISYMMETRIC, None),
    ])
    def test_symmetry_is_inferred(self, exclusions, kwargs, symmetry, profile):
        dom = DomainSpec(FLAT3, exclusions, **kwargs)
        assert dom.symmetry == symmetry
        assert dom.profile == profile

    def test_sphere_chart_default_truncation(self):
        dom = DomainSpec(Background('sphere', 3), (Ball(O3, 0.5),))
        assert dom.truncation == 16.0

    def test_descriptor_rebuilds_the_domain(self, two_ball_domain):
        assert DomainSpec.from_descriptor(two_ball_domain.descriptor()) == two_ball_domain

    def test_frame_follows_the_ball_centers(self, two_ball_domain):
        axis, origin, perp = two_ball_domain.frame()
        assert np.isclose(abs(axis[2]), 1.0)
        assert np.allclose(origin, 0.0)
        assert np.isclose(axis @ perp, 0.0)

    def test_reduce_and_embed(self, two_ball_domain):
        x = np.array([[0.3, 0.4, 0.5], [-1.0, 0.0, 2.0]])
        z, rho = two_ball_domain.reduce(x)
        assert np.allclose(rho, [0.5, 1.0])
        back = two_ball_domain.embed(z, rho)
        assert np.allclose(two_ball_domain.reduce(back), (z, rho))

    def test_signed_distance(self, two_ball_domain):
        x = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 0.0]])
        assert np.allclose(two_ball_domain.signed_distance(x), [-0.3, 0.7, 0.7])
        assert list(two_ball_domain.contains(x)) == [False, True, True]

    def test_with_radii(self, two_ball_domain):
        dom = two_ball_domain.with_radii([0.1, 0.05])
        assert dom.radii == (0.1, 0.05)
        with pytest.raises(InvalidDomain):
            two_ball_domain.with_radii([0.1])

    def test_scale_domain(self, two_ball_domain):
        dom = scale_domain(two_ball_domain, 2.0)
        assert dom.truncation == 6.0
        assert dom.balls[1].center == (0.0, 0.0, 2.0)
        assert dom.balls[1].radius == 0.6

    def test_inverted_ball_becomes_a_singular_outer_sphere(self):
        dom = DomainSpec(FLAT3, (Ball(O3, 0.5),), truncation=4.0)
        inverted = invert_domain(dom)
        assert inverted.singular_outer
        assert inverted.truncation == 2.0
        assert inverted.profile == 'poincare'

    def test_inverting_without_truncation_raises(self, two_ball_domain):
        with pytest.raises(InvalidDomain):
            invert_domain(two_ball_domain)


class TestNodes(object):

    @pytest.mark.parametrize("lo,hi,cluster", [
        (0.5, 4.0, 'lo'),
        (0.0, 4.0, 'lo'),
        (0.0, 2.0, 'hi'),
    ])
    def test_radial_nodes(self, lo, hi, cluster):
        s = radial_nodes(lo, hi, 128, cluster=cluster)
        assert s[0] == lo and s[-1] == hi
        assert np.all(np.diff(s) > 0)
        h = np.diff(s)
        if cluster == 'lo':
            assert h[0] < h[-1]
        else:
            assert h[0] > h[-1]

    def test_doubling_keeps_the_nodes(self):
        assert np.allclose(radial_nodes(0.5, 4.0, 256)[::2], radial_nodes(0.5, 4.0, 128))

    def test_equal_ratios_give_scaled_nodes(self):
        assert np.allclose(radial_nodes(0.25, 2.0, 64), 0.5 * radial_nodes(0.5, 4.0, 64))

    def test_each_ball_keeps_its_own_near_spacing(self):
        dom = DomainSpec(Background('flat', 4), (Ball((0.0, 0.0, 0.0, 0.0), 0.5),
                                                  Ball((0.0, 0.0, 0.0, 1.0), 1e-4)),
                         truncation=3.0)
        z, rho = axisymmetric_nodes(dom, 64)
        hz, hr = np.diff(z), np.diff(rho)
        assert np.all(hz > 0) and np.all(hr > 0)
        fine = 1e-4 * cfg.BALL_CELLS / 64
        assert hz[np.argmin(np.abs(z[:-1] - 1.0))] <= 1.01 * fine
        assert hz[np.argmin(np.abs(z[:-1]))] > 1e3 * fine
        assert hr[0] <= 1.01 * fine
        assert len(z) < 1000 and len(rho) < 500

    def test_lagrange_weights_are_exact_for_cubics(self):
        nodes = np.array([[0.0, 0.3, 0.7, 1.2]])
        x = np.array([0.5])
        w0, w1, w2 = lagrange_weights(nodes, x)
        f = nodes[0] ** 3 - 2 * nodes[0]
        assert np.isclose(w0[0] @ f, 0.125 - 1.0)
        assert np.isclose(w1[0] @ f, 0.75 - 2.0)
        assert np.isclose(w2[0] @ f, 3.0)


class TestSampledField(object):

    def test_interpolation_reproduces_the_closed_form(self, exterior_field):
        spec = ExteriorBall(4, (0.0,) * 4, 0.5)
        x = np.array([[0.6, 0.0, 0.0, 0.0], [1.0, 1.0, 0.5, -0.2], [0.0, 0.0, 0.0, 3.5]])
        assert np.allclose(exterior_field.interpolate(x), spec.v(x))
        exact = oracle_jet_v(spec, x)
        j = exterior_field.jet(x)
        assert np.allclose(j.gradient, exact.gradient)
        assert np.allclose(j.hessian, exact.hessian)

    @pytest.mark.parametrize("x", [
        [0.2, 0.0, 0.0, 0.0],
        [5.0, 0.0, 0.0, 0.0],
    ])
    def test_off_grid_raises(self, exterior_field, x):
        with pytest.raises(OutOfSupport):
            exterior_field.jet(np.array([x]))

    def test_strict_support_keeps_away_from_the_truncation(self, exterior_field):
        x = np.array([[3.999, 0.0, 0.0, 0.0]])
        exterior_field.jet(x)
        with pytest.raises(OutOfSupport):
            exterior_field.jet(x, strict=True)

    def test_covers(self, exterior_field):
        x = np.array([[0.2, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 6.0, 0.0, 0.0]])
        assert list(exterior_field.covers(x)) == [False, True, False]

    def test_orbit_distance_range(self, exterior_field):
        dmin, dmax = exterior_field.orbit_distance_range((0.0, 0.0, 0.0, 0.0))
        assert np.allclose(dmin, exterior_field.coords[0])
        assert np.allclose(dmax, exterior_field.coords[0])

    def test_fields_are_read_only(self, exterior_field):
        with pytest.raises(ValueError):
            exterior_field.values[3] = 1.0

    def test_shape_mismatch_raises(self, ball_domain):
        s = np.linspace(0.5, 4.0, 10)
        with pytest.raises(InvalidDomain):
            SampledField(ball_domain, (s,), np.ones(9), np.zeros(10), np.zeros(10))

    def test_halfspace_jet(self, halfspace_field):
        j = halfspace_field.jet(np.array([[2.0, -1.0, 0.3]]))
        assert np.isclose(j.value[0], 0.3)
        assert np.allclose(j.gradient[0], [0.0, 0.0, 1.0])
        assert np.allclose(j.hessian[0], 0.0)
