"""Window model: closed-form oracles, strapdown equivalence, chaining."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odokit.errors import (
    AlignmentError,
    DegenerateHeadingError,
    InsufficientDataError,
    InvalidInputError,
)
from odokit.rotations import rot_x, rot_y, rot_z, wrap_angle
from odokit.strapdown import (
    DEFAULT_GRAVITY,
    STANDARD_GRAVITY,
    ImuSequence,
    NavState,
    StateTrack,
    integrate_track,
)
from odokit.windows import (
    BodyInitState,
    PolarDelta,
    Pose2D,
    Window,
    attitude_product,
    body_init_from_truth,
    chain,
    compute_T,
    heading_change,
    horizontal_distance,
    label_windows,
    segment,
    window_displacement,
)

DT = 0.01
G0 = STANDARD_GRAVITY


def make_stream(n, seed=0, acc_scale=3.0, gyro_scale=1.0):
    rng = np.random.default_rng(seed)
    return ImuSequence(np.arange(n) * DT,
                       rng.normal(0, acc_scale, (n, 3)),
                       rng.normal(0, gyro_scale, (n, 3)))


def random_rotation(rng):
    a = rng.uniform(-np.pi, np.pi, 3)
    return rot_z(a[0]) @ rot_y(a[1]) @ rot_x(a[2])


def straight_truth(n_samples, speed=1.0, dt=DT):
    # level walker moving along +x; poses at every sample time plus the end
    t = np.arange(n_samples + 1) * dt
    pos = np.zeros((n_samples + 1, 3))
    pos[:, 0] = speed * t
    C = np.tile(np.eye(3), (n_samples + 1, 1, 1))
    v = np.tile([speed, 0.0, 0.0], (n_samples + 1, 1))
    return StateTrack(t=t, C=C, v=v, pos=pos)


def circle_truth(radius, speed, n_samples, dt=DT):
    # counter-clockwise circle, attitude yaw locked to the path tangent
    t = np.arange(n_samples + 1) * dt
    alpha = speed * t / radius
    pos = np.stack([radius * np.cos(alpha), radius * np.sin(alpha),
                    np.zeros_like(alpha)], axis=1)
    v = speed * np.stack([-np.sin(alpha), np.cos(alpha),
                          np.zeros_like(alpha)], axis=1)
    C = np.stack([rot_z(a + np.pi / 2.0) for a in alpha])
    return StateTrack(t=t, C=C, v=v, pos=pos)


class TestSegment:
    def test_exact_fit_single_window(self):
        ws = segment(make_stream(200), n=200, stride=10)
        assert len(ws) == 1 and ws[0].start == 0

    def test_three_windows(self):
        ws = segment(make_stream(220), n=200, stride=10)
        assert [w.start for w in ws] == [0, 10, 20]

    def test_count_formula(self):
        ws = segment(make_stream(10_000), n=200, stride=10)
        assert len(ws) == 981

    def test_too_short_raises(self):
        with pytest.raises(InsufficientDataError):
            segment(make_stream(199), n=200)

    def test_nonuniform_stream_rejected(self):
        t = np.arange(300) * DT
        t[150] += 1e-4
        seq = ImuSequence(t, np.zeros((300, 3)), np.zeros((300, 3)))
        with pytest.raises(InvalidInputError):
            segment(seq, n=200)

    def test_window_validation(self):
        with pytest.raises(InvalidInputError):
            Window(np.zeros((1, 3)), np.zeros((1, 3)), DT)
        with pytest.raises(InvalidInputError):
            Window(np.zeros((5, 3)), np.zeros((5, 3)), 0.0)


class TestComputeT:
    def test_zero_accel(self):
        w = Window(np.zeros((50, 3)), np.zeros((50, 3)), DT)
        assert np.array_equal(compute_T(w), np.zeros(3))

    def test_three_sample_coefficients(self):
        # no rotation: T = 2*a0 + 1*a1, a2 unused
        acc = np.array([[1.0, 0, 0], [0, 1.0, 0], [9.0, 9.0, 9.0]])
        w = Window(acc, np.zeros((3, 3)), DT)
        assert np.allclose(compute_T(w), [2.0, 1.0, 0.0], atol=1e-15)


class TestWindowDisplacement:
    def test_free_fall_closed_form(self):
        w = Window(np.zeros((200, 3)), np.zeros((200, 3)), DT)
        dL = window_displacement(w, np.zeros(3), np.eye(3))
        expect = (200 * 199 / 2.0) * DEFAULT_GRAVITY * DT * DT
        assert np.allclose(dL, expect, atol=1e-9)
        assert dL[2] == pytest.approx(-19.515, abs=5e-4)

    def test_hover_cancels_exactly(self):
        # tumbling body whose accelerometer always cancels gravity in its own
        # frame: net displacement is identically zero
        rng = np.random.default_rng(5)
        n = 200
        gyro = rng.normal(0, 1.0, (n, 3))
        C0 = random_rotation(rng)
        C = C0.copy()
        acc = np.empty((n, 3))
        from odokit.rotations import rodrigues_increment
        for k in range(n):
            acc[k] = C.T @ np.array([0.0, 0.0, G0])
            C = C @ rodrigues_increment(gyro[k], DT)
        w = Window(acc, gyro, DT)
        dL = window_displacement(w, np.zeros(3), C0)
        assert np.linalg.norm(dL) <= 1e-11
        init = BodyInitState(np.zeros(3), C0.T @ DEFAULT_GRAVITY)
        assert horizontal_distance(w, init) <= 1e-11

    def test_matches_strapdown_oracle(self):
        # the central identity: closed form == stepwise Euler integration
        rng = np.random.default_rng(42)
        for _ in range(100):
            n = int(rng.integers(2, 240))
            seq = ImuSequence(np.arange(n) * DT,
                              rng.normal(0, 3.0, (n, 3)),
                              rng.normal(0, 1.0, (n, 3)))
            C0 = random_rotation(rng)
            v0 = rng.normal(0, 2.0, 3)
            w = Window(seq.acc, seq.gyro, DT)
            dL = window_displacement(w, v0, C0)
            track = integrate_track(seq, NavState(C0, v0, np.zeros(3)), dt=DT)
            assert np.linalg.norm(dL - track.pos[-1]) <= 1e-9


class TestHorizontalDistance:
    def test_rotation_invariance(self):
        # dl never moves while the displacement vector rotates with C0
        rng = np.random.default_rng(9)
        seq = make_stream(200, seed=10)
        w = Window(seq.acc, seq.gyro, DT)
        v0_body = np.array([1.0, 0.2, -0.1])
        g0_body = np.array([0.3, 0.0, -G0])
        init = BodyInitState(v0_body, g0_body)
        dl = horizontal_distance(w, init)
        for _ in range(100):
            C0 = random_rotation(rng)
            dL = window_displacement(w, C0 @ v0_body, C0, g=C0 @ g0_body)
            assert abs(np.linalg.norm(dL) - dl) <= 1e-9

    def test_straight_level_window(self):
        # constant 1 m/s with gravity-cancelling accel: 2 s -> 2 m exactly
        n = 200
        acc = np.tile([0.0, 0.0, G0], (n, 1))
        w = Window(acc, np.zeros((n, 3)), DT)
        init = BodyInitState(np.array([1.0, 0.0, 0.0]),
                             np.array([0.0, 0.0, -G0]))
        assert horizontal_distance(w, init) == pytest.approx(2.0, abs=1e-9)

    def test_body_init_from_truth_checks_gravity(self):
        truth = straight_truth(200)
        init = body_init_from_truth(truth, 0)
        assert np.allclose(init.v0_body, [1.0, 0.0, 0.0])
        assert np.allclose(init.g0_body, [0.0, 0.0, -G0])
        bad = StateTrack(t=truth.t, C=truth.C, v=truth.v, pos=truth.pos)
        with pytest.raises(InvalidInputError):
            body_init_from_truth(bad, 0, g=np.array([0.0, 0.0, -7.0]))


class TestHeadingChange:
    def test_zero_gyro(self):
        w = Window(np.zeros((200, 3)), np.zeros((200, 3)), DT)
        assert heading_change(w) == 0.0

    def test_constant_z_rate(self):
        # n-1 increments: 199 * 0.5 rad/s * 0.01 s = 0.995 rad
        gyro = np.tile([0.0, 0.0, 0.5], (200, 1))
        w = Window(np.zeros((200, 3)), gyro, DT)
        assert heading_change(w) == pytest.approx(0.995, abs=1e-12)

    def test_reference_attitude_used(self):
        gyro = np.tile([0.0, 0.0, 0.5], (200, 1))
        w = Window(np.zeros((200, 3)), gyro, DT)
        C_ref = rot_z(2.9)  # wrap boundary crossed: 2.9 + 0.995 > pi
        dpsi = heading_change(w, C_ref)
        assert dpsi == pytest.approx(0.995, abs=1e-12)

    def test_degenerate_reference_raises(self):
        gyro = np.tile([0.0, 0.0, 0.5], (10, 1))
        w = Window(np.zeros((10, 3)), gyro, DT)
        with pytest.raises(DegenerateHeadingError):
            heading_change(w, rot_y(np.pi / 2.0))

    def test_additivity_across_shared_boundary(self):
        # spans compose when the halves share their boundary sample: the
        # second half starts at the first half's last sample and uses the
        # first half's end attitude as its reference
        rng = np.random.default_rng(21)
        n = 100
        gyro = rng.normal(0, 0.8, (2 * n - 1, 3))
        acc = np.zeros((2 * n - 1, 3))
        full = Window(acc, gyro, DT)
        first = Window(acc[:n], gyro[:n], DT)
        second = Window(acc[n - 1:], gyro[n - 1:], DT)
        C_mid = attitude_product(first)
        total = wrap_angle(heading_change(first) + heading_change(second, C_mid))
        assert abs(total - heading_change(full)) <= 1e-9


class TestChain:
    def test_zero_length_advances_heading_only(self):
        poses = chain(Pose2D(1.0, 2.0, 0.0), [PolarDelta(0.0, 0.7)])
        assert poses[0].x == 1.0 and poses[0].y == 2.0
        assert poses[0].psi == pytest.approx(0.7, abs=1e-15)

    def test_single_quarter_turn(self):
        poses = chain(Pose2D(0.0, 0.0, 0.0), [PolarDelta(1.0, np.pi / 2.0)])
        x, y, psi = poses[0]
        assert abs(x) <= 1e-15 and y == pytest.approx(1.0, abs=1e-15)
        assert psi == pytest.approx(np.pi / 2.0, abs=1e-15)

    def test_square_closes(self):
        deltas = [PolarDelta(1.0, np.pi / 2.0)] * 4
        poses = chain(Pose2D(0.0, 0.0, 0.0), deltas)
        assert np.hypot(poses[-1].x, poses[-1].y) <= 1e-12

    def test_nonfinite_delta_rejected(self):
        with pytest.raises(InvalidInputError):
            chain(Pose2D(0, 0, 0), [PolarDelta(np.nan, 0.0)])


class TestLabels:
    def test_stationary_truth(self):
        n = 450
        t = np.arange(n + 1) * DT
        truth = StateTrack(t=t, C=np.tile(np.eye(3), (n + 1, 1, 1)),
                           v=np.zeros((n + 1, 3)), pos=np.zeros((n + 1, 3)))
        ws = segment(make_stream(n), n=200, stride=200)
        labels = label_windows(truth, ws)
        assert all(lab == PolarDelta(0.0, 0.0) for lab in labels)

    def test_straight_walk_labels(self):
        n = 600
        truth = straight_truth(n)
        ws = segment(make_stream(n), n=200, stride=200)
        labels = label_windows(truth, ws)
        assert len(labels) == 3
        for dl, dpsi in labels:
            assert dl == pytest.approx(2.0, abs=1e-12)
            assert dpsi == 0.0

    def test_circle_chord_label(self):
        # chord of a 0.4 rad arc on a 5 m circle: 2 R sin(0.2)
        truth = circle_truth(radius=5.0, speed=1.0, n_samples=400)
        ws = segment(make_stream(400), n=200, stride=200)
        labels = label_windows(truth, ws)
        chord = 2.0 * 5.0 * np.sin(0.2)
        for dl, dpsi in labels:
            assert dl == pytest.approx(chord, abs=1e-9)
            assert dpsi == pytest.approx(0.4, abs=1e-9)

    def test_circle_laps_chain_to_truth_endpoints(self):
        # 16 windows per lap (radius chosen so the lap length is exactly
        # 16 chords): heading-offset artifacts rotate a closed polygon about
        # its start, so every lap endpoint still lands on the start pose
        laps = 2
        per_lap = 16
        radius = per_lap * 2.0 / (2.0 * np.pi)
        n = laps * per_lap * 200
        truth = circle_truth(radius=radius, speed=1.0, n_samples=n)
        ws = segment(make_stream(n, seed=3), n=200, stride=200)
        labels = label_windows(truth, ws)
        start = Pose2D(truth.pos[0, 0], truth.pos[0, 1], np.pi / 2.0)
        poses = chain(start, labels)
        for lap in range(1, laps + 1):
            p = poses[lap * per_lap - 1]
            err = np.hypot(p.x - truth.pos[0, 0], p.y - truth.pos[0, 1])
            assert err <= 1e-9

    def test_straight_and_pivot_track_chains_exactly(self):
        # piecewise track: 4 m east, turn in place, 4 m north; every segment
        # is a whole number of windows so labels chain to the true corner
        # and endpoint
        n_seg = 400
        n_turn = 200
        dt = DT
        t = np.arange(2 * n_seg + n_turn + 1) * dt
        pos = np.zeros((t.size, 3))
        C = np.empty((t.size, 3, 3))
        v = np.zeros((t.size, 3))
        yaw0, yaw1 = 0.0, np.pi / 2.0
        for i in range(t.size):
            if i <= n_seg:
                pos[i] = [i * dt, 0.0, 0.0]
                C[i] = rot_z(yaw0)
                v[i] = [1.0, 0.0, 0.0]
            elif i <= n_seg + n_turn:
                frac = (i - n_seg) / n_turn
                pos[i] = [4.0, 0.0, 0.0]
                C[i] = rot_z(yaw0 + frac * (yaw1 - yaw0))
                v[i] = 0.0
            else:
                pos[i] = [4.0, (i - n_seg - n_turn) * dt, 0.0]
                C[i] = rot_z(yaw1)
                v[i] = [0.0, 1.0, 0.0]
        truth = StateTrack(t=t, C=C, v=v, pos=pos)
        ws = segment(make_stream(t.size - 1, seed=4), n=200, stride=200)
        labels = label_windows(truth, ws)
        poses = chain(Pose2D(0.0, 0.0, 0.0), labels)
        assert np.hypot(poses[-1].x - 4.0, poses[-1].y - 4.0) <= 1e-9

    def test_misaligned_truth_raises(self):
        truth = straight_truth(300)
        ws = segment(make_stream(400), n=200, stride=200)
        with pytest.raises(AlignmentError):
            label_windows(truth, ws)

    def test_wrong_truth_spacing_raises(self):
        truth = straight_truth(400, dt=0.02)
        ws = segment(make_stream(400), n=200, stride=200)
        with pytest.raises(AlignmentError):
            label_windows(truth, ws)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_segment_starts_arithmetic(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(200, 2000))
    stride = int(rng.integers(1, 300))
    ws = segment(make_stream(m, seed=seed), n=200, stride=stride)
    assert len(ws) == (m - 200) // stride + 1
    assert all(w.start == i * stride for i, w in enumerate(ws))


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_displacement_norm_equals_body_frame_distance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 60))
    w = Window(rng.normal(0, 2, (n, 3)), rng.normal(0, 1, (n, 3)), DT)
    C0 = random_rotation(rng)
    v0_body = rng.normal(0, 1, 3)
    g0_body = rng.normal(0, 4, 3)
    dl = horizontal_distance(w, BodyInitState(v0_body, g0_body))
    dL = window_displacement(w, C0 @ v0_body, C0, g=C0 @ g0_body)
    assert abs(np.linalg.norm(dL) - dl) <= 1e-9
