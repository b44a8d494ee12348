import numpy as np
import pytest

from telehaptic.policies import (
    PACING,
    CompressionEstimator,
    FeedbackCondition,
    ScriptedOperator,
    VisualChannel,
)
from telehaptic.scenario import default_scenario
from telehaptic.sim import RemoteScene

SPEC = default_scenario()
SCENE = RemoteScene(SPEC)


def make_estimator(condition, seed=0):
    streams = np.random.SeedSequence(seed).spawn(5)
    rngs = [np.random.default_rng(s) for s in streams]
    return CompressionEstimator(SCENE, SPEC, condition, rngs[2], rngs[3])


class TestConditionChannels:
    def test_channel_flags(self):
        assert not FeedbackCondition.V.has_force and not FeedbackCondition.V.has_electro
        assert FeedbackCondition.VF.has_force and not FeedbackCondition.VF.has_electro
        assert FeedbackCondition.VE.has_electro and not FeedbackCondition.VE.has_force
        assert FeedbackCondition.VFE.has_force and FeedbackCondition.VFE.has_electro

    def test_exactly_four_conditions(self):
        assert len(FeedbackCondition) == 4


class TestEstimatorInformativeness:
    def test_sigma_strictly_improves_with_channels(self):
        """More feedback channels always mean a tighter estimate."""
        v = make_estimator(FeedbackCondition.V)
        vf = make_estimator(FeedbackCondition.VF)
        ve = make_estimator(FeedbackCondition.VE)
        vfe = make_estimator(FeedbackCondition.VFE)
        for c in np.linspace(0.05, 0.95, 10):
            assert vfe.sigma(c) < ve.sigma(c) < v.sigma(c)
            assert vfe.sigma(c) < vf.sigma(c) < v.sigma(c)

    def test_visual_sigma_is_flat(self):
        est = make_estimator(FeedbackCondition.V)
        sigmas = {round(est.sigma(c), 12) for c in np.linspace(0.0, 1.0, 7)}
        assert sigmas == {round(SPEC.visual_opening_sigma, 12)}

    def test_force_curve_monotone(self):
        est = make_estimator(FeedbackCondition.VF)
        assert (np.diff(est._forces) >= 0).all()
        assert est._forces[0] == 0.0

    def test_estimate_tracks_truth_with_shared_draw(self):
        """The same perception draw costs more under poorer feedback."""
        results = {}
        for condition in FeedbackCondition:
            est = make_estimator(condition, seed=5)
            est.begin_action()
            results[condition] = abs(est.estimate(0.5, None) - 0.5)
        assert results[FeedbackCondition.VFE] <= results[FeedbackCondition.VE]
        assert results[FeedbackCondition.VFE] <= results[FeedbackCondition.VF]
        assert results[FeedbackCondition.VE] <= results[FeedbackCondition.V]

    def test_estimate_stays_in_unit_interval(self):
        est = make_estimator(FeedbackCondition.V, seed=9)
        for _ in range(200):
            est.begin_action()
            assert 0.0 <= est.estimate(0.02, None) <= 1.0
            assert 0.0 <= est.estimate(0.98, None) <= 1.0


class TestVisualChannel:
    def test_reads_sharpen_near_marker(self):
        rng_bias = np.random.default_rng(1)
        rng_white = np.random.default_rng(2)
        channel = VisualChannel(SPEC, rng_bias, rng_white)
        marker = SPEC.tube_markers_ml[0]
        near = [channel.read_tube_ml(0, marker - 0.02) - (marker - 0.02)
                for _ in range(400)]
        far = [channel.read_tube_ml(0, marker - 0.8) - (marker - 0.8)
               for _ in range(400)]
        assert np.std(near) < np.std(far)
        assert abs(np.mean(near)) < abs(np.mean(far)) + 0.05

    def test_reads_never_negative(self):
        channel = VisualChannel(SPEC, np.random.default_rng(3), np.random.default_rng(4))
        for _ in range(200):
            assert channel.read_tube_ml(0, 0.01) >= 0.0


class TestPacing:
    def test_visual_condition_is_most_cautious(self):
        v = PACING[FeedbackCondition.V]
        vfe = PACING[FeedbackCondition.VFE]
        assert v.squeeze_rate < vfe.squeeze_rate
        assert v.verify_reads > vfe.verify_reads
        assert v.settle_s > vfe.settle_s

    def test_operator_never_commands_past_drop_guard(self):
        operator = ScriptedOperator(SPEC, FeedbackCondition.V, 3, lambda: None)
        guard = operator._open_guard
        assert guard < SCENE.grasp_opening
        operator._grip_cmd = guard
        operator._ramp_grip(-1.0)  # try to open further
        assert operator._grip_cmd <= guard
