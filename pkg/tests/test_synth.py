import dataclasses

import numpy as np
import pytest

from sandgait.errors import GenerationError
from sandgait.schema import MarkerSchema
from sandgait.synth import (GaitProfile, Trig, standing_profile,
                            stride_profile, synthesize_gait)


class TestTrig:
    def test_derivatives_match_numeric(self):
        f = Trig(a0=0.3, rate=1.1, terms=((0.2, 1.5, 0.4), (0.05, 3.0, 1.0)))
        t = np.linspace(0.0, 2.0, 50)
        h = 1e-6
        d1_num = (f(t + h) - f(t - h)) / (2 * h)
        d2_num = (f(t + h) - 2 * f(t) + f(t - h)) / (h * h)
        np.testing.assert_allclose(f(t, order=1), d1_num, atol=1e-5)
        np.testing.assert_allclose(f(t, order=2), d2_num, atol=1e-3)

    def test_json_round_trip(self):
        f = Trig(a0=0.3, rate=1.1, terms=((0.2, 1.5, 0.4),))
        assert Trig.from_json(f.to_json()) == f


class TestProfile:
    def test_json_round_trip(self):
        p = stride_profile()
        assert GaitProfile.from_json(p.to_json()) == p

    def test_save_load(self, tmp_path):
        p = standing_profile()
        p.save(tmp_path / "p.json")
        assert GaitProfile.load(tmp_path / "p.json") == p


class TestStanding:
    def test_static_markers_and_weight(self):
        res = synthesize_gait(standing_profile())
        for label, pos in res.markers.pos.items():
            np.testing.assert_allclose(pos - pos[0], 0.0, atol=1e-9,
                                       err_msg=label)
        W = res.meta.participant.mass * 9.81
        np.testing.assert_allclose(res.grf.force[:, 2], W, rtol=1e-9)
        np.testing.assert_allclose(res.grf.force[:, 0], 0.0, atol=1e-9)

    def test_constant_truth_moments(self):
        res = synthesize_gait(standing_profile())
        for side in ("left", "right"):
            for joint in ("ankle", "knee", "hip"):
                m = res.truth_moments[side][joint]
                np.testing.assert_allclose(m - m[0], 0.0, atol=1e-6)


class TestStride:
    @pytest.fixture(scope="class")
    @staticmethod
    def result():
        return synthesize_gait(stride_profile())

    def test_full_marker_set(self, result):
        assert set(result.markers.pos) == set(MarkerSchema.default().labels)

    def test_events_alternate(self, result):
        for side in ("left", "right"):
            ev = result.truth_events.side(side)
            merged = sorted([(t, "hs") for t in ev.heel_strikes]
                            + [(t, "to") for t in ev.toe_offs])
            kinds = [k for _, k in merged]
            for a, b in zip(kinds, kinds[1:]):
                assert a != b

    def test_grf_zero_outside_stance_windows(self, result):
        t = result.grf.time
        outside = np.ones(len(t), dtype=bool)
        ramp = result.profile.ramp if hasattr(result, "profile") else 0.08
        for a, b in result.stance_windows:
            outside &= ~((t >= a - ramp) & (t <= b + ramp))
        np.testing.assert_allclose(result.grf.force[outside], 0.0, atol=1e-9)

    def test_grf_impulse_sanity(self, result):
        # mean vertical force over a full mid-trial stride approximates
        # body weight (single-support model; loose bound)
        W = result.meta.participant.mass * 9.81
        assert 0.5 * W < result.grf.force[:, 2].max() < 2.0 * W

    def test_cop_stays_within_foot(self, result):
        markers = result.markers
        heel_x = np.interp(result.grf.time, markers.time,
                           markers.pos["R-heel"][:, 0])
        toe_x = np.interp(result.grf.time, markers.time,
                          markers.pos["R-toe"][:, 0])
        loaded = result.grf.force[:, 2] > 1.0
        assert np.all(result.grf.cop[loaded, 0] >= heel_x[loaded] - 1e-3)
        assert np.all(result.grf.cop[loaded, 0] <= toe_x[loaded] + 1e-3)


def test_ground_penetration_rejected():
    profile = stride_profile()
    sunk = Trig(a0=profile.pelvis_z.a0 - 0.1, rate=profile.pelvis_z.rate,
                terms=profile.pelvis_z.terms)
    profile = dataclasses.replace(profile, pelvis_z=sunk)
    with pytest.raises(GenerationError, match="penetrates"):
        synthesize_gait(profile)
