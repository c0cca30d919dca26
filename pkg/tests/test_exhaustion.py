from types import SimpleNamespace

import mock
import numpy as np
import pytest

from YamabeLab import exhaustion
from YamabeLab.blowup_probe import BLOWUP, BOUNDED, classify
from YamabeLab.closed_forms import Constant, GreenPole, Multipole, oracle_jet_v
from YamabeLab.conformal_core import Background, conformal_ricci
from YamabeLab.elliptic_solver import SolverParams, sample_field, solve
from YamabeLab.exceptions import (DegenerateBasis, NewtonDiverged,
                                  NonMonotoneSchedule)
from YamabeLab.exhaustion import (AlternatingLaw, Annulus, CoupledLaw,
                                  GeometricLaw, TableLaw, alternating_table,
                                  annulus_minimum, build_schedule,
                                  coupling_admissible, coupling_threshold,
                                  default_annulus, default_regions,
                                  normalization_exponent, pointwise_limit,
                                  rescale_and_fit, resolve_radii,
                                  run_exhaustion, self_similarity_defect)
from YamabeLab.grids import Ball, DomainSpec, Slab, Tube

from .fixtures import ORIGIN4, exterior_u


def two_ball_base():
    balls = (Ball((0.0, 0.0, 0.0, -1.0), 0.5), Ball((0.0, 0.0, 0.0, 1.0), 0.5))
    return DomainSpec(Background('flat', 4), balls, truncation=4.0)


class TestRadiusLaws(object):

    def test_geometric(self):
        assert np.allclose(GeometricLaw(1.0, 0.5).radii(4), [1.0, 0.5, 0.25, 0.125])

    @pytest.mark.parametrize("r0,q", [(0.0, 0.5), (1.0, 1.0), (1.0, 0.0), (-1.0, 0.5)])
    def test_bad_geometric_law_raises(self, r0, q):
        with pytest.raises(ValueError):
            GeometricLaw(r0, q)

    def test_short_table_raises(self):
        with pytest.raises(ValueError):
            TableLaw((0.5, 0.25)).radii(3)

    @pytest.mark.parametrize("role,powers", [
        ('primary', [1, 4, 4, 16]),
        ('secondary', [2, 2, 8, 8]),
    ])
    def test_alternating_table(self, role, powers):
        assert np.allclose(alternating_table(0.5, 2.0, 4, role), [0.5 ** p for p in powers])

    def test_alternating_pair_shrinks_one_at_a_time(self):
        laws = [AlternatingLaw(0.5, 2.0, 'primary'), AlternatingLaw(0.5, 2.0, 'secondary')]
        table = resolve_radii(laws, 6)
        shrinking = np.sum(np.diff(table, axis=0) < 0, axis=1)
        assert np.all(shrinking == 1)

    def test_coupled_law_follows_its_partner(self):
        table = resolve_radii([GeometricLaw(0.5, 0.5), CoupledLaw(0, 3.0)], 3)
        assert np.allclose(table[:, 1], table[:, 0] ** 3)

    def test_coupling_exponent_must_exceed_one(self):
        with pytest.raises(ValueError):
            CoupledLaw(0, 1.0)

    @pytest.mark.parametrize("n,k,expected", [
        (4, 9.0, True),
        (4, 8.0, False),
        (5, 7.0, True),
        (5, 6.0, False),
    ])
    def test_coupling_threshold(self, n, k, expected):
        assert coupling_admissible(n, k) == expected
        assert (k > coupling_threshold(n)) == expected


class TestSchedules(object):

    def test_geometric_schedule(self, radial_schedule):
        assert len(radial_schedule) == 4
        assert radial_schedule.primary_radii == (1.0, 0.5, 0.25, 0.125)
        assert radial_schedule.coupled_radii == (None,) * 4
        assert radial_schedule.domain(2).radii == (0.25,)
        assert radial_schedule.truncations == (4.0,) * 4

    def test_scaled_truncation(self, radial_schedule):
        schedule = build_schedule(radial_schedule.base, radial_schedule.laws, 2,
                                  truncation_law='scaled')
        assert schedule.truncations == (4.0, 2.0, 1.0)

    @pytest.mark.parametrize("values", [(0.5, 0.6, 0.3), (0.5, 0.5, 0.3)])
    def test_non_monotone_raises(self, values, radial_schedule):
        with pytest.raises(NonMonotoneSchedule):
            build_schedule(radial_schedule.base, [TableLaw(values)], 2)

    def test_one_law_per_exclusion(self, radial_schedule):
        with pytest.raises(ValueError):
            build_schedule(radial_schedule.base, [], 2)

    def test_slab_needs_no_law(self):
        base = DomainSpec(Background('flat', 3), (Slab(),), truncation=4.0)
        with pytest.raises(NonMonotoneSchedule):
            build_schedule(base, [None], 1)
        assert len(build_schedule(base, [None], 0)) == 1

    def test_coupled_schedule(self):
        schedule = build_schedule(two_ball_base(), [GeometricLaw(0.5, 0.5), CoupledLaw(0, 9.0)], 2)
        assert not schedule.below_threshold
        assert np.allclose(schedule.coupled_radii, [0.5 ** 9, 0.25 ** 9, 0.125 ** 9])

    def test_coupling_below_threshold_warns(self):
        with mock.patch.object(exhaustion.logger, 'warning') as warning:
            schedule = build_schedule(two_ball_base(),
                                      [GeometricLaw(0.5, 0.5), CoupledLaw(0, 2.0)], 2)
        assert schedule.below_threshold
        assert warning.called

    def test_defaults(self, radial_schedule):
        annulus = default_annulus(radial_schedule)
        assert annulus == Annulus(ORIGIN4, 0.5, 1.0)
        regions = default_regions(radial_schedule)
        assert regions['near'].radius == 2.0
        assert regions['far'].radius == 4.0
        assert regions['far'].complement


class TestRuns(object):

    def test_annulus_minimum(self, exterior_field):
        m = annulus_minimum(exterior_field, Annulus(ORIGIN4, 1.0, 2.0))
        assert np.isclose(m, 4.0 / 15.0)

    def test_run_statistics(self, radial_run):
        assert len(radial_run) == 4
        assert [rec.index for rec in radial_run.records] == [0, 1, 2, 3]
        expected = [exterior_u([2.0, 0.0, 0.0, 0.0], r) for r in (1.0, 0.5, 0.25, 0.125)]
        assert np.allclose(radial_run.m, expected)
        assert np.isclose(radial_run.m[1], 4.0 / 15.0)
        for rec in radial_run.records:
            assert np.isclose(rec.sup_ric_near, 3.0)
            assert np.isclose(rec.sup_ric_far, 3.0)
            assert np.isclose(rec.sup_ric_all, 3.0)
            assert rec.lower is None
            assert not rec.cached

    def test_solutions_decrease_along_the_run(self, radial_run):
        assert all(d <= 1e-9 for d in radial_run.monotonicity)

    def test_normalization_exponent(self, radial_run):
        assert 1.0 < normalization_exponent(radial_run) < 1.3

    def test_self_similarity(self, radial_run):
        assert self_similarity_defect(radial_run) < 1e-8

    def test_pointwise_limit(self, radial_run):
        values = pointwise_limit(radial_run, [3.0, 0.0, 0.0, 0.0])
        assert np.allclose(values, [exterior_u([3.0, 0.0, 0.0, 0.0], r)
                                    for r in (1.0, 0.5, 0.25, 0.125)])
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_single_index_run_is_a_direct_solve(self, radial_schedule):
        schedule = build_schedule(radial_schedule.base, radial_schedule.laws, 0)
        p = SolverParams(radial_grid=128)
        run = run_exhaustion(schedule, p, threads=1)
        assert len(run) == 1
        assert run.monotonicity == ()
        assert np.array_equal(run.records[0].upper.values, solve(schedule.domain(0), p).values,
                              equal_nan=True)

    def test_cache_writes_every_solved_index(self, radial_schedule):
        cache = mock.Mock()
        cache.load.return_value = None
        run_exhaustion(radial_schedule, SolverParams(radial_grid=128), cache=cache, threads=3)
        assert cache.load.call_count == 4
        assert [c[0][0] for c in cache.store.call_args_list] == [0, 1, 2, 3]

    def test_errors_carry_their_index(self, radial_schedule):
        def diverge(*args, **kwargs):
            raise NewtonDiverged('boom')

        with mock.patch('YamabeLab.exhaustion.solve_pair', side_effect=diverge):
            with pytest.raises(NewtonDiverged) as error:
                run_exhaustion(radial_schedule, SolverParams(radial_grid=128), threads=2)
        assert error.value.index == 0
        assert str(error.value).startswith('index 0:')


class TestRescaleAndFit(object):

    def fake_run(self, ball_domain):
        field = sample_field(ball_domain, SolverParams(radial_grid=256),
                             lambda x: 1.0 / (2.0 / np.sum(x * x, axis=-1) + 3.0))
        return SimpleNamespace(records=[SimpleNamespace(upper=field, m=1.0)])

    def test_recovers_the_coefficients(self, ball_domain):
        basis = [GreenPole(4, ORIGIN4), Constant(4)]
        fit = rescale_and_fit(self.fake_run(ball_domain), basis, shell=(0.8, 2.0))
        assert fit.names == ('GreenPole', 'Constant')
        assert np.allclose(fit.coefficients[0], (2.0, 3.0))
        assert fit.residuals[0] < 1e-10

    def test_collinear_basis_raises(self, ball_domain):
        with pytest.raises(DegenerateBasis):
            rescale_and_fit(self.fake_run(ball_domain), [Constant(4), Constant(4, 2.0)],
                            shell=(0.8, 2.0), poles=[np.zeros(4)])

    def test_empty_shell_raises(self, ball_domain):
        with pytest.raises(DegenerateBasis):
            rescale_and_fit(self.fake_run(ball_domain), [GreenPole(4, ORIGIN4)],
                            shell=(10.0, 20.0))

    def test_decreasing_residuals(self):
        assert exhaustion.FitResult(('Constant',), ((1.0,), (1.0,)), (0.5, 0.1)).decreasing
        assert not exhaustion.FitResult(('Constant',), ((1.0,), (1.0,)), (0.1, 0.5)).decreasing


@pytest.fixture(scope='module')
def coupled_run():
    p1, p2 = (0.0, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0, 1.0)
    base = DomainSpec(Background('flat', 4), (Ball(p1, 0.5), Ball(p2, 0.5 ** 9)), truncation=3.0)
    schedule = build_schedule(base, [GeometricLaw(0.5, 0.8), CoupledLaw(0, 9)], 2)
    return run_exhaustion(schedule, SolverParams(axisymmetric_grid=64), threads=2)


@pytest.fixture(scope='module')
def two_pole_run():
    base = DomainSpec(Background('flat', 3), (Ball((0.0, 0.0, -1.0), 0.1),
                                              Ball((0.0, 0.0, 1.0), 0.1)), truncation=3.0)
    schedule = build_schedule(base, [GeometricLaw(0.1, 0.5)] * 2, 2)
    return run_exhaustion(schedule, SolverParams(axisymmetric_grid=64), threads=2)


@pytest.fixture(scope='module')
def tube_run():
    base = DomainSpec(Background('flat', 4), (Tube(2, 0.5),), truncation=4.0)
    schedule = build_schedule(base, [GeometricLaw(0.5, 0.8)], 2, truncation_law='scaled')
    return run_exhaustion(schedule, SolverParams(radial_grid=256), threads=2)


@pytest.mark.slow
class TestCoupledBlowup(object):

    def test_blowup_at_the_fast_ball_only(self, coupled_run):
        threshold = 10 * coupled_run.records[0].sup_ric_near
        verdict = classify(coupled_run, (0.0, 0.0, 0.0, 1.0), 0.3, threshold=threshold)
        assert verdict.classification == BLOWUP
        assert classify(coupled_run, (0.0, 0.0, 0.0, 0.0), 0.6).classification == BOUNDED

    @pytest.mark.parametrize("point", [
        (0.0, 0.0, 0.0, -1.2),
        (0.0, 0.0, 1.2, 0.0),
        (0.0, 0.0, 0.0, 2.2),
    ])
    def test_generic_points_stay_bounded(self, coupled_run, point):
        assert classify(coupled_run, point, 0.3).classification == BOUNDED

    def test_near_sup_grows_and_far_sup_does_not(self, coupled_run):
        near = [rec.sup_ric_near for rec in coupled_run.records]
        far = [rec.sup_ric_far for rec in coupled_run.records]
        assert all(b >= 1.2 * a for a, b in zip(near[-3:-1], near[-2:]))
        assert all(f <= 3 * far[0] for f in far)


@pytest.mark.slow
class TestTwoPoleLimit(object):

    def test_normalization_exponent(self, two_pole_run):
        assert normalization_exponent(two_pole_run) == pytest.approx(0.5, rel=0.1)

    def test_limit_is_a_positive_two_pole_combination(self, two_pole_run):
        poles = ((0.0, 0.0, -1.0), (0.0, 0.0, 1.0))
        fit = rescale_and_fit(two_pole_run, [GreenPole(3, pole) for pole in poles])
        assert fit.decreasing
        assert all(c > 0 for c in fit.coefficients[-1])
        limit = Multipole(3, poles, fit.coefficients[-1])
        x = np.random.RandomState(7).uniform(-2.0, 2.0, size=(400, 3))
        far = np.min([np.linalg.norm(x - np.asarray(p), axis=1) for p in poles], axis=0)
        x = x[far > 0.2][:100]
        ric = conformal_ricci(Background('flat', 3), oracle_jet_v(limit, x), x)
        assert len(x) == 100
        assert np.all(ric.extremal_abs > 0)


@pytest.mark.slow
class TestTubeSelfSimilarity(object):

    def test_rescaled_solutions_agree(self, tube_run):
        assert self_similarity_defect(tube_run) <= 10 * tube_run.params.tol

    def test_on_axis_points_are_bounded(self, tube_run):
        for point in ((1.0, 0.0, 0.0, 0.0), (0.0, -2.0, 0.0, 0.0)):
            assert classify(tube_run, point, 1.0).classification == BOUNDED
