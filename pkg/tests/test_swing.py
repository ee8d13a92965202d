import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitopt.swing import build_swing, evaluate


class TestBoundaryConditions:
    def test_endpoints_and_rest(self):
        s = build_swing([0.1, -0.2, 0.0], [0.25, -0.18, 0.15], 0.3, 0.07)
        p, v, a = s.evaluate(0.0)
        assert np.allclose(p, [0.1, -0.2, 0.0], atol=1e-12)
        assert np.linalg.norm(v) <= 1e-12 and np.linalg.norm(a) <= 1e-9
        p, v, a = s.evaluate(0.3)
        assert np.allclose(p, [0.25, -0.18, 0.15], atol=1e-12)
        assert np.linalg.norm(v) <= 1e-12 and np.linalg.norm(a) <= 1e-9

    def test_constant_when_degenerate(self):
        s = build_swing([0.1, 0.2, 0.3], [0.1, 0.2, 0.3], 0.4, 0.0)
        for t in np.linspace(0, 0.4, 17):
            p, v, a = s.evaluate(t)
            assert np.allclose(p, [0.1, 0.2, 0.3], atol=1e-12)
            assert np.allclose(v, 0.0, atol=1e-12)


class TestApex:
    def test_apex_height_and_time_by_dense_sampling(self):
        s = build_swing([0, 0, 0], [0.15, 0, 0], 0.3, 0.07)
        ts = np.linspace(0, 0.3, 20001)
        zs = np.array([s.evaluate(t)[0][2] for t in ts])
        k = np.argmax(zs)
        assert abs(zs[k] - 0.07) <= 1e-6
        assert abs(ts[k] - 0.15) <= 1e-3

    def test_apex_above_higher_endpoint(self):
        s = build_swing([0, 0, 0.0], [0.2, 0, 0.15], 0.3, 0.07)
        ts = np.linspace(0, 0.3, 5001)
        peak = max(s.evaluate(t)[0][2] for t in ts)
        assert abs(peak - 0.22) <= 1e-6

    def test_zero_z_velocity_at_apex(self):
        s = build_swing([0, 0, 0], [0.15, 0, 0.1], 0.3, 0.07)
        _, v, _ = s.evaluate(0.15)
        assert abs(v[2]) <= 1e-12


class TestSmoothness:
    def test_velocity_matches_finite_difference(self):
        s = build_swing([0, -0.1, 0], [0.18, 0.05, 0.12], 0.34, 0.09)
        h = 1e-6
        for t in np.linspace(h, 0.34 - h, 37):
            p0 = s.evaluate(t - h)[0]
            p1 = s.evaluate(t + h)[0]
            v = s.evaluate(t)[1]
            assert np.allclose((p1 - p0) / (2 * h), v, atol=1e-6)

    def test_acceleration_continuous_at_junction(self):
        s = build_swing([0, 0, 0], [0.15, 0.02, 0.1], 0.3, 0.07)
        half = 0.15
        a_left = s.evaluate(np.nextafter(half, 0.0))[2]
        a_right = s.evaluate(np.nextafter(half, 1.0))[2]
        assert np.allclose(a_left, a_right, atol=1e-9)

    def test_c2_by_finite_difference_of_velocity(self):
        s = build_swing([0, 0, 0], [0.15, 0.0, 0.0], 0.3, 0.07)
        h = 1e-7
        for t in (0.08, 0.15, 0.23):
            v0 = s.evaluate(t - h)[1]
            v1 = s.evaluate(t + h)[1]
            a = s.evaluate(t)[2]
            assert np.allclose((v1 - v0) / (2 * h), a, atol=1e-4)


class TestSwingProperties:
    @given(
        st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=3),
        st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=3),
        st.floats(0.1, 0.8),
        st.floats(0.0, 0.2),
    )
    @settings(max_examples=60, deadline=None)
    def test_invariants_hold_for_random_swings(self, p0, p1, duration, apex):
        s = build_swing(p0, p1, duration, apex)
        start, v0, a0 = s.evaluate(0.0)
        end, v1, a1 = s.evaluate(duration)
        assert np.allclose(start, p0, atol=1e-9)
        assert np.allclose(end, p1, atol=1e-9)
        assert np.linalg.norm(v0) <= 1e-9 and np.linalg.norm(v1) <= 1e-9
        zs = [s.evaluate(t)[0][2] for t in np.linspace(0, duration, 257)]
        expected_peak = max(p0[2], p1[2]) + apex
        assert max(zs) <= expected_peak + 1e-9
        assert abs(s.evaluate(duration / 2)[0][2] - expected_peak) <= 1e-9


class TestErrors:
    def test_out_of_range(self):
        s = build_swing([0, 0, 0], [0.1, 0, 0], 0.3, 0.05)
        with pytest.raises(ValueError):
            s.evaluate(-0.01)
        with pytest.raises(ValueError):
            evaluate(s, 0.31)

    def test_non_positive_duration(self):
        with pytest.raises(ValueError):
            build_swing([0, 0, 0], [0.1, 0, 0], 0.0, 0.05)

    def test_negative_apex(self):
        with pytest.raises(ValueError):
            build_swing([0, 0, 0], [0.1, 0, 0], 0.3, -0.01)
