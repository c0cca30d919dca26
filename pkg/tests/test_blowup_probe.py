import mock
import numpy as np
import pytest

from YamabeLab import blowup_probe
from YamabeLab.blowup_probe import (BLOWUP, BOUNDED, INCONCLUSIVE, PinchCheck,
                                    ProbeResult, ProbeSpec, RegionSample,
                                    arc_probe, classify, classify_values,
                                    global_sup, pinch_condition, pinch_search,
                                    region_sup, run_probe, segment_probe,
                                    verdicts)
from YamabeLab.exceptions import OutOfSupport, PathOutsideDomain, RadiusTooSmall

from .fixtures import ORIGIN4


class TestNodalCurvature(object):

    def test_hyperbolic_field_has_flat_sup(self, exterior_field):
        assert np.isclose(global_sup(exterior_field), 3.0, atol=1e-6)
        assert np.isclose(region_sup(exterior_field, ORIGIN4, 1.0), 3.0, atol=1e-6)

    def test_empty_region_is_nan(self, exterior_field):
        assert np.isnan(region_sup(exterior_field, (10.0, 0.0, 0.0, 0.0), 1.0))

    def test_complement(self, exterior_field):
        assert np.isclose(region_sup(exterior_field, ORIGIN4, 2.0, complement=True), 3.0,
                          atol=1e-6)
        assert np.isnan(region_sup(exterior_field, ORIGIN4, 10.0, complement=True))


class TestSegmentProbe(object):

    def test_from_inside_the_hole(self, exterior_field):
        result = segment_probe(exterior_field, ORIGIN4, (2.0, 0.0, 0.0, 0.0), 1.5)
        assert isinstance(result, ProbeResult)
        assert result.end == (1.0, 0.0, 0.0, 0.0)
        assert np.isclose(result.t_star, 0.5, atol=1e-9)
        assert not result.pinch
        assert np.isclose(result.t_argmax, 1.5)
        assert np.isclose(result.slope, 3.0, atol=1e-5)
        assert np.isclose(result.r_nn, -3.0, atol=1e-6)
        assert result.mean_value_ok

    @pytest.mark.parametrize("x0,epsilon", [
        ((-2.0, 0.0, 0.0, 0.0), 4.0),
        ((1.0, 0.0, 0.0, 0.0), 10.0),
        ((0.0, 0.0, 0.0, 0.0), 0.3),
    ])
    def test_bad_segments_raise(self, x0, epsilon, exterior_field):
        with pytest.raises(PathOutsideDomain):
            segment_probe(exterior_field, x0, (1.0, 0.0, 0.0, 0.0), epsilon)

    def test_zero_direction_raises(self, exterior_field):
        with pytest.raises(ValueError):
            segment_probe(exterior_field, ORIGIN4, (0.0, 0.0, 0.0, 0.0), 1.0)


class TestPinch(object):

    @pytest.mark.parametrize("x,expected", [
        ((0.0, 0.0, 0.01), True),
        ((0.0, 0.0, 0.5), False),
    ])
    def test_condition(self, x, expected, halfspace_field):
        check = pinch_condition(halfspace_field, x, (0.0, 0.0, 1.0), 0.1)
        assert isinstance(check, PinchCheck)
        assert check.holds == expected
        assert np.isclose(check.gradient, 1.0, atol=1e-8)
        assert np.isclose(check.r_nn, -2.0, atol=1e-6)

    def test_condition_near_truncation_raises(self, halfspace_field):
        with pytest.raises(OutOfSupport):
            pinch_condition(halfspace_field, (0.0, 0.0, 3.999), (0.0, 0.0, 1.0), 0.1)

    def test_search(self, halfspace_field):
        found = pinch_search(halfspace_field, (0.0, 0.0, 0.05), 0.1)
        assert found.holds
        assert found.value <= 0.1
        assert pinch_search(halfspace_field, (0.0, 0.0, 2.0), 0.05) is None


class TestArcProbe(object):

    def test_linear_field(self, halfspace_field):
        result = arc_probe(halfspace_field, (0.0, 0.0, 0.5), (0.0, 0.0, 1.0), 10.0)
        assert result.kind == 'arc'
        assert np.isclose(result.epsilon, 0.25)
        assert np.isclose(result.tangential, 0.0, atol=1e-8)
        assert np.isclose(result.transverse, 0.0, atol=1e-8)
        assert np.isclose(result.r_nn, -2.0, atol=1e-6)

    def test_radius_too_small(self, halfspace_field):
        with pytest.raises(RadiusTooSmall):
            arc_probe(halfspace_field, (0.0, 0.0, 0.5), (0.0, 0.0, 1.5), 1.0)


class TestClassification(object):

    @pytest.mark.parametrize("values,threshold,expected", [
        ([1.0, 1.2, 1.1], 50.0, BOUNDED),
        ([1.0, 10.0, 100.0, 1000.0], 50.0, BLOWUP),
        ([1.0, 10.0, 100.0, 1000.0], 5000.0, INCONCLUSIVE),
        ([1.0, 4.0, 2.0], 50.0, INCONCLUSIVE),
        ([1.0, float('nan'), 1.5], 50.0, BOUNDED),
    ])
    def test_classify_values(self, values, threshold, expected):
        assert classify_values(values, threshold) == expected

    def test_bounded_run(self, radial_run):
        verdict = classify(radial_run, (0.0, 0.0, 0.0, 1.5), 0.5, probe_id='core')
        assert verdict.classification == BOUNDED
        assert verdict.probe_id == 'core'
        assert np.isclose(verdict.threshold, 30.0, atol=1e-4)
        assert len(verdict.values) == len(radial_run)

    def test_tiny_radius_is_inconclusive(self, radial_run):
        with mock.patch.object(blowup_probe.logger, 'warning') as warning:
            verdict = classify(radial_run, (0.0, 0.0, 0.0, 1.5), 1e-4)
        assert verdict.classification == INCONCLUSIVE
        assert warning.called

    def test_verdicts_only_cover_classify_probes(self, radial_run):
        specs = [ProbeSpec('core', 'classify', (0.0, 0.0, 0.0, 1.5), rho=0.5),
                 ProbeSpec('edge', 'segment', ORIGIN4, (1.0, 0.0, 0.0, 0.0), epsilon=1.5)]
        assert list(verdicts(radial_run, specs)) == ['core']


class TestRunProbe(object):

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ProbeSpec('x', 'spiral', ORIGIN4)

    def test_dispatch(self, exterior_field, halfspace_field):
        segment = ProbeSpec('s', 'segment', ORIGIN4, (1.0, 0.0, 0.0, 0.0), epsilon=1.5)
        assert isinstance(run_probe(segment, exterior_field), ProbeResult)
        region = ProbeSpec('c', 'classify', ORIGIN4, rho=1.0)
        sample = run_probe(region, exterior_field)
        assert isinstance(sample, RegionSample)
        assert sample.pinch is None
        assert np.isclose(sample.r_nn, 3.0, atol=1e-6)
        pinch = ProbeSpec('p', 'pinch', (0.0, 0.0, 0.05), epsilon=0.1)
        assert run_probe(pinch, halfspace_field).holds
