"""Strapdown integrator: closed-form oracles, invariants, drift behavior."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odokit.errors import EmptyInputError, InvalidInputError
from odokit.rotations import orthogonality_defect, rot_x, rot_y, rot_z
from odokit.strapdown import (
    DEFAULT_GRAVITY,
    STANDARD_GRAVITY,
    ImuSample,
    ImuSequence,
    NavState,
    StateTrack,
    gravity_vector,
    integrate_track,
    propagate,
    tilt_drift,
)

G81 = 9.81


def level_state() -> NavState:
    return NavState(np.eye(3), np.zeros(3), np.zeros(3))


def constant_stream(acc, gyro, rate=100.0, dur=1.0) -> ImuSequence:
    n = int(round(rate * dur))
    t = np.arange(n) / rate
    return ImuSequence(t, np.tile(np.asarray(acc, float), (n, 1)),
                       np.tile(np.asarray(gyro, float), (n, 1)))


class TestPropagate:
    def test_stationary_level_state_unchanged(self):
        # perfect gravity cancellation: sensed +g0 up, gravity -g0, no rotation
        s = level_state()
        out = propagate(s, ImuSample(0.0, np.array([0.0, 0.0, STANDARD_GRAVITY]),
                                     np.zeros(3)), dt=0.01)
        assert np.array_equal(out.C, np.eye(3))
        assert np.array_equal(out.v, np.zeros(3))
        assert np.array_equal(out.pos, np.zeros(3))

    def test_stationary_tilted_state_nearly_unchanged(self):
        C = rot_z(0.3) @ rot_y(0.2) @ rot_x(0.1)
        a = C.T @ np.array([0.0, 0.0, STANDARD_GRAVITY])
        s = NavState(C, np.zeros(3), np.zeros(3))
        out = propagate(s, ImuSample(0.0, a, np.zeros(3)), dt=0.01)
        assert np.linalg.norm(out.v) <= 1e-14
        assert np.linalg.norm(out.pos) == 0.0

    def test_one_degree_tilt_horizontal_accel(self):
        # attitude believed level while the body is pitched 1 degree: gravity
        # leaks a horizontal specific-force residual of g0*sin(1 deg)
        tilt = np.deg2rad(1.0)
        a = rot_y(tilt).T @ np.array([0.0, 0.0, G81])
        dt = 0.01
        out = propagate(level_state(), ImuSample(0.0, a, np.zeros(3)), dt,
                        g=gravity_vector(G81))
        horiz = np.hypot(out.v[0], out.v[1]) / dt
        assert horiz == pytest.approx(0.1712, rel=0.005)

    def test_constant_accel_euler_sums(self):
        # a - C^T g == (1,0,0): after 1 s at 100 Hz the explicit-Euler sums
        # give v = N*a*dt = (1,0,0) and L = a*dt^2*N(N-1)/2 = (0.495,0,0)
        acc = np.array([1.0, 0.0, STANDARD_GRAVITY])
        track = integrate_track(constant_stream(acc, np.zeros(3)), level_state())
        assert np.allclose(track.v[-1], [1.0, 0.0, 0.0], atol=1e-12)
        assert np.allclose(track.pos[-1], [0.495, 0.0, 0.0], atol=1e-12)

    def test_nonfinite_sample_rejected(self):
        with pytest.raises(InvalidInputError):
            propagate(level_state(),
                      ImuSample(0.0, np.array([np.nan, 0.0, 0.0]), np.zeros(3)), 0.01)
        with pytest.raises(InvalidInputError):
            propagate(level_state(),
                      ImuSample(0.0, np.zeros(3), np.zeros(3)), 0.0)


class TestIntegrateTrack:
    def test_single_zero_motion_sample(self):
        seq = ImuSequence(np.array([0.0]),
                          np.array([[0.0, 0.0, STANDARD_GRAVITY]]),
                          np.zeros((1, 3)))
        track = integrate_track(seq, level_state(), dt=0.01)
        assert len(track) == 1
        assert np.array_equal(track.C[0], np.eye(3))
        assert np.array_equal(track.v[0], np.zeros(3))
        assert np.array_equal(track.pos[0], np.zeros(3))

    def test_empty_stream_raises(self):
        seq = ImuSequence(np.array([]), np.zeros((0, 3)), np.zeros((0, 3)))
        with pytest.raises(EmptyInputError):
            integrate_track(seq, level_state())

    def test_decreasing_timestamps_rejected(self):
        with pytest.raises(InvalidInputError):
            ImuSequence(np.array([0.0, 0.01, 0.005]), np.zeros((3, 3)),
                        np.zeros((3, 3)))

    def test_one_state_per_sample_and_time_offset(self):
        seq = constant_stream([0.0, 0.0, STANDARD_GRAVITY], np.zeros(3), dur=0.5)
        track = integrate_track(seq, level_state())
        assert len(track) == len(seq)
        assert np.allclose(track.t, seq.t + 0.01, atol=1e-12)

    def test_determinism_bit_identical(self):
        rng = np.random.default_rng(7)
        n = 500
        seq = ImuSequence(np.arange(n) / 100.0,
                          rng.normal(0, 1, (n, 3)),
                          rng.normal(0, 0.5, (n, 3)))
        a = integrate_track(seq, level_state())
        b = integrate_track(seq, level_state())
        assert np.array_equal(a.C, b.C)
        assert np.array_equal(a.v, b.v)
        assert np.array_equal(a.pos, b.pos)

    def test_attitude_stays_orthogonal_on_long_spin(self):
        # 60 s of fast tumbling; periodic correction must hold the defect down
        rng = np.random.default_rng(3)
        n = 6000
        seq = ImuSequence(np.arange(n) / 100.0,
                          np.tile([0.0, 0.0, STANDARD_GRAVITY], (n, 1)),
                          rng.normal(0, 2.0, (n, 3)))
        track = integrate_track(seq, level_state())
        assert orthogonality_defect(track.C[-1]) <= 1e-9

    def test_tilt_integration_matches_closed_form(self):
        # wrong-attitude integration of a 1-degree tilt for 10 s: Euler gives
        # exactly a*T(T-dt)/2 horizontally, within 0.2% of the analytic aT^2/2
        tilt = np.deg2rad(1.0)
        a_body = rot_y(tilt).T @ np.array([0.0, 0.0, G81])
        seq = constant_stream(a_body, np.zeros(3), dur=10.0)
        track = integrate_track(seq, level_state(), g=gravity_vector(G81))
        horiz = np.hypot(track.pos[-1, 0], track.pos[-1, 1])
        a = G81 * np.sin(tilt)
        assert horiz == pytest.approx(a * 10.0 * (10.0 - 0.01) / 2.0, abs=1e-9)
        assert horiz == pytest.approx(0.5 * a * 10.0 ** 2, rel=0.002)

    def test_constant_bias_drift_closed_form(self):
        # perfect data except a constant accel bias: position error is the
        # exact Euler double sum ||b|| * T(T-dt)/2
        b = np.array([0.03, -0.04, 0.0])
        acc = np.array([0.0, 0.0, STANDARD_GRAVITY]) + b
        seq = constant_stream(acc, np.zeros(3), dur=10.0)
        track = integrate_track(seq, level_state())
        err = np.linalg.norm(track.pos[-1])
        assert err == pytest.approx(0.05 * 10.0 * (10.0 - 0.01) / 2.0, abs=1e-9)

    def test_white_noise_growth_superlinear(self):
        # Monte-Carlo over 100 seeds, sigma = 0.1 m/s^2 white accel noise on a
        # stationary stream. Double integration of white noise grows as
        # t^1.5, so the 60 s / 20 s mean-error ratio sits near 3^1.5 = 5.2:
        # clearly above linear growth (3.0) and below bias-like t^2 (9.0).
        rate, dur = 100.0, 60.0
        n = int(rate * dur)
        i20 = int(20.0 * rate) - 1
        e20, e60 = [], []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            acc = np.tile([0.0, 0.0, STANDARD_GRAVITY], (n, 1))
            acc += rng.normal(0.0, 0.1, (n, 3))
            seq = ImuSequence(np.arange(n) / rate, acc, np.zeros((n, 3)))
            track = integrate_track(seq, level_state())
            e20.append(np.linalg.norm(track.pos[i20]))
            e60.append(np.linalg.norm(track.pos[-1]))
        ratio = np.mean(e60) / np.mean(e20)
        assert 4.0 < ratio < 9.0
        assert np.mean(e60) > 3.0 * np.mean(e20)


class TestTiltDrift:
    def test_paper_one_degree_values(self):
        a, v, p = tilt_drift(np.deg2rad(1.0), 10.0, g0=G81)
        assert a == pytest.approx(0.1712, rel=0.005)
        assert v == pytest.approx(1.712, rel=0.005)
        assert p == pytest.approx(8.56, rel=0.005)

    def test_zero_tilt(self):
        assert tilt_drift(0.0, 5.0) == (0.0, 0.0, 0.0)

    def test_two_degree_values(self):
        a, v, p = tilt_drift(np.deg2rad(2.0), 10.0, g0=G81)
        assert a == pytest.approx(0.3424, rel=0.005)
        assert v == pytest.approx(3.424, rel=0.005)
        assert p == pytest.approx(17.12, rel=0.005)

    def test_negative_duration_rejected(self):
        with pytest.raises(InvalidInputError):
            tilt_drift(0.1, -1.0)


class TestEquivariance:
    def test_navigation_frame_rotation(self):
        # rotating the initial attitude, velocity, position and gravity by R
        # must rotate the whole output state by R
        rng = np.random.default_rng(11)
        for _ in range(20):
            angles = rng.uniform(-np.pi, np.pi, 3)
            R = rot_z(angles[0]) @ rot_y(angles[1]) @ rot_x(angles[2])
            C0 = rot_z(rng.uniform(-1, 1)) @ rot_x(rng.uniform(-1, 1))
            v0 = rng.normal(0, 1, 3)
            p0 = rng.normal(0, 5, 3)
            sample = ImuSample(0.0, rng.normal(0, 3, 3), rng.normal(0, 1, 3))
            g = rng.normal(0, 4, 3)
            base = propagate(NavState(C0, v0, p0), sample, 0.01, g=g)
            rot = propagate(NavState(R @ C0, R @ v0, R @ p0), sample, 0.01,
                            g=R @ g)
            assert np.linalg.norm(rot.v - R @ base.v) <= 1e-12
            assert np.linalg.norm(rot.pos - R @ base.pos) <= 1e-12
            assert np.max(np.abs(rot.C - R @ base.C)) <= 1e-12


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
@settings(max_examples=50, deadline=None)
def test_zero_gyro_keeps_attitude(ax, ay, az):
    s = NavState(rot_z(0.4), np.zeros(3), np.zeros(3))
    out = propagate(s, ImuSample(0.0, np.array([ax, ay, az]), np.zeros(3)), 0.01)
    assert np.array_equal(out.C, s.C)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=25, deadline=None)
def test_gravity_vector_norm(seed):
    rng = np.random.default_rng(seed)
    g0 = rng.uniform(9.7, 9.9)
    g = gravity_vector(g0)
    assert np.linalg.norm(g) == pytest.approx(g0, abs=1e-12)
    assert g[2] < 0
