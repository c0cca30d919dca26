import numpy as np
import pytest

from YamabeLab.closed_forms import (BallMaximum, BallSum, Constant,
                                    ExteriorBall, GreenPole, HalfSpace,
                                    Multipole, PoincareBall, TubeComplement,
                                    TwoBallSuper, check_tube, invert_oracle,
                                    invert_points, make_oracle, oracle_jet_u,
                                    oracle_residual, oracle_u, oracle_v,
                                    scale_oracle)
from YamabeLab.exceptions import (InvalidDimension, InvalidDomain,
                                  InvalidTube, OutsideDomain)


O3 = (0.0, 0.0, 0.0)
O4 = (0.0, 0.0, 0.0, 0.0)


class TestOracleValues(object):

    @pytest.mark.parametrize("spec,x,expected", [
        (ExteriorBall(4, O4, 1.0), [2.0, 0.0, 0.0, 0.0], 2.0 / 3.0),
        (PoincareBall(3, 1.0), [0.0, 0.0, 0.0], np.sqrt(2.0)),
        (HalfSpace(4), [5.0, 1.0, -2.0, 0.25], 4.0),
        (GreenPole(3, O3, 2.0), [0.0, 4.0, 0.0], 0.5),
        (Constant(3, 1.5), [9.0, 9.0, 9.0], 1.5),
    ])
    def test_u_ok(self, spec, x, expected):
        assert np.isclose(oracle_u(spec, x), expected)

    def test_v_is_power_of_u(self):
        spec = PoincareBall(5, 2.0)
        x = np.array([[0.1, 0.2, 0.3, 0.4, 0.5], [1.0, 0.0, 0.0, 0.0, -1.0]])
        assert np.allclose(oracle_v(spec, x), oracle_u(spec, x) ** (-2.0 / 3.0))

    def test_tube_slope(self):
        spec = TubeComplement(4, 2)
        assert np.isclose(spec.slope, np.sqrt(2.0))
        assert np.isclose(oracle_v(spec, [7.0, -3.0, 3.0, 4.0]), 5.0 * np.sqrt(2.0))

    def test_ball_family_members(self):
        balls = (((0.0, 0.0, -2.0), 0.5), ((0.0, 0.0, 2.0), 1.0))
        x = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.3]])
        parts = [oracle_u(ExteriorBall(3, c, r), x) for c, r in balls]
        assert np.allclose(oracle_u(BallSum(3, balls), x), parts[0] + parts[1])
        assert np.allclose(oracle_u(BallMaximum(3, balls), x), np.maximum(*parts))
        two = TwoBallSuper(3, balls[0][0], balls[0][1], balls[1][0], balls[1][1])
        assert np.allclose(oracle_u(two, x), parts[0] + parts[1])

    def test_multipole_is_sum_of_poles(self):
        spec = Multipole(3, (O3, (0.0, 0.0, 3.0)), (1.0, 2.0))
        x = [1.0, 0.0, 0.0]
        expected = 1.0 + 2.0 / np.sqrt(10.0)
        assert np.isclose(oracle_u(spec, x), expected)


class TestOracleResiduals(object):

    @pytest.mark.parametrize("spec,points", [
        (ExteriorBall(4, (1.0, 0.0, 0.0, 0.0), 0.5), [[2.0, 1.0, 0.0, 0.0], [0.0, 0.0, 3.0, 0.5]]),
        (PoincareBall(3, 2.0, (0.0, 0.0, 1.0)), [[0.1, 0.2, 0.3], [1.0, -1.0, 1.5]]),
        (HalfSpace(3), [[0.0, 0.0, 0.2], [4.0, -1.0, 3.0]]),
        (TubeComplement(5, 2), [[1.0, 2.0, 0.3, 0.4, 0.5], [0.0, 0.0, 0.0, 0.0, 2.0]]),
        (GreenPole(4, O4), [[1.0, 1.0, 0.0, 0.0], [0.0, 0.2, 0.0, 0.0]]),
        (Multipole(3, (O3, (1.0, 0.0, 0.0)), (1.0, 0.5)), [[0.0, 2.0, 0.0], [0.5, 0.5, 0.5]]),
        (Constant(6, 3.0), [[0.0] * 6, [1.0] * 6]),
    ])
    def test_exact_solutions_have_zero_residual(self, spec, points):
        res = oracle_residual(spec, np.asarray(points))
        scale = np.maximum(1.0, oracle_u(spec, np.asarray(points)) ** ((spec.n + 2.0) / (spec.n - 2.0)))
        assert np.all(np.abs(res) / scale < 1e-9)

    def test_ball_sum_is_a_supersolution(self):
        spec = BallSum(3, (((0.0, 0.0, -1.0), 0.5), ((0.0, 0.0, 1.0), 0.5)))
        x = np.array([[0.0, 0.0, 0.0], [0.3, 0.2, 0.1], [0.0, 2.0, 0.0]])
        assert np.all(oracle_residual(spec, x) <= 0)

    def test_jet_gradient_matches_differences(self):
        spec = ExteriorBall(3, (0.5, 0.0, 0.0), 1.0)
        x = np.array([2.0, 1.0, -0.5])
        j = oracle_jet_u(spec, x)
        h = 1e-6
        fd = [(oracle_u(spec, x + h * e) - oracle_u(spec, x - h * e)) / (2 * h) for e in np.eye(3)]
        assert np.allclose(j.gradient, fd, atol=1e-7)


class TestOracleErrors(object):

    @pytest.mark.parametrize("spec,x", [
        (ExteriorBall(3, O3, 1.0), [0.0, 0.0, 0.5]),
        (PoincareBall(3, 1.0), [0.0, 2.0, 0.0]),
        (HalfSpace(3), [0.0, 0.0, -1.0]),
        (TubeComplement(4, 2), [1.0, 1.0, 0.0, 0.0]),
        (GreenPole(3, O3), [0.0, 0.0, 0.0]),
        (ExteriorBall(3, O3, 1.0), [5.0, 0.0, 0.0, 0.0]),
    ])
    def test_outside_domain_raises(self, spec, x):
        with pytest.raises(OutsideDomain):
            oracle_u(spec, x)

    def test_batch_with_one_bad_point_raises(self):
        with pytest.raises(OutsideDomain):
            oracle_v(HalfSpace(3), [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])

    @pytest.mark.parametrize("n,k", [(4, 1), (4, 3), (5, 1), (6, 2), (4, 1.5), (4, True)])
    def test_inadmissible_tube_raises(self, n, k):
        with pytest.raises(InvalidTube):
            check_tube(n, k)

    @pytest.mark.parametrize("n,k", [(4, 2), (5, 2), (5, 3), (7, 3)])
    def test_admissible_tube_ok(self, n, k):
        assert check_tube(n, k) == k

    def test_dimension_two_raises(self):
        with pytest.raises(InvalidDimension):
            HalfSpace(2)

    @pytest.mark.parametrize("build", [
        lambda: ExteriorBall(3, O3, 0.0),
        lambda: ExteriorBall(3, (0.0, 0.0), 1.0),
        lambda: Constant(3, -1.0),
        lambda: Multipole(3, (O3,), (1.0, 2.0)),
        lambda: Multipole(3, (O3,), (-1.0,)),
        lambda: BallSum(3, ()),
    ])
    def test_bad_parameters_raise(self, build):
        with pytest.raises(InvalidDomain):
            build()

    def test_make_oracle(self):
        spec = make_oracle('GreenPole', 3, pole=[0.0, 0.0, 1.0], coefficient=2.0)
        assert isinstance(spec, GreenPole)
        assert spec.pole == (0.0, 0.0, 1.0)
        with pytest.raises(KeyError):
            make_oracle('Horosphere', 3)


class TestIsometries(object):

    @pytest.mark.parametrize("spec", [
        ExteriorBall(4, (1.0, 0.0, 0.0, 0.0), 0.5),
        PoincareBall(4, 3.0),
        GreenPole(4, (0.0, 1.0, 0.0, 0.0), 2.0),
        BallSum(4, (((0.0, 0.0, 0.0, -1.0), 0.2), ((0.0, 0.0, 0.0, 1.0), 0.3))),
        Constant(4, 2.0),
    ])
    def test_scaling(self, spec):
        lam = 0.25
        x = np.array([[0.1, 0.2, 0.05, 0.0], [0.3, -0.1, 0.2, 0.1]])
        scaled = scale_oracle(spec, lam)
        expected = lam ** -1.0 * spec.u(x / lam)
        assert np.allclose(scaled.u(x), expected)

    @pytest.mark.parametrize("spec", [
        ExteriorBall(3, (3.0, 0.0, 0.0), 1.0),
        ExteriorBall(3, (0.0, 0.0, 0.0), 0.5),
        GreenPole(3, (0.0, 2.0, 0.0), 1.5),
        Multipole(3, ((0.0, 2.0, 0.0), (1.0, 1.0, 1.0)), (1.0, 3.0)),
    ])
    def test_kelvin_transform(self, spec):
        x = np.array([[0.2, 0.3, -0.1], [0.1, -0.1, 0.15]])
        inverted = invert_oracle(spec)
        r = np.linalg.norm(x, axis=-1)
        assert np.allclose(inverted.u(x), r ** -1.0 * spec.u(invert_points(x)))

    def test_pole_at_the_origin_inverts_to_a_constant(self):
        assert invert_oracle(GreenPole(3, O3, 2.0)) == Constant(3, 2.0)
