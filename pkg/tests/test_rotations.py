import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odokit.errors import (
    AliasingError,
    DegenerateHeadingError,
    DegenerateInputError,
    InvalidInputError,
)
from odokit.rotations import (
    is_rotation,
    log_rotation,
    orthogonality_defect,
    reorthonormalize,
    rodrigues_increment,
    rot_x,
    rot_z,
    update_attitude,
    wrap_angle,
    yaw_of,
)

from oracles import rotation_from_rotvec


def test_zero_rate_gives_identity():
    omega = rodrigues_increment(np.zeros(3), 0.01)
    np.testing.assert_allclose(omega, np.eye(3), atol=1e-15)


def test_quarter_turn_about_z():
    omega = rodrigues_increment(np.array([0.0, 0.0, math.pi / 2]), 1.0)
    np.testing.assert_allclose(omega @ np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-12)


def test_matches_quaternion_oracle_single():
    w = np.array([0.3, -0.2, 0.1])
    got = rodrigues_increment(w, 0.01)
    want = rotation_from_rotvec(w * 0.01)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_matches_quaternion_oracle_bulk():
    rng = np.random.default_rng(1234)
    for _ in range(10_000):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        theta = rng.uniform(0.0, 3.0)
        sigma = axis * theta
        got = rodrigues_increment(sigma, 1.0)
        want = rotation_from_rotvec(sigma)
        assert np.abs(got - want).max() <= 1e-12


def test_inverse_increment_cancels():
    rng = np.random.default_rng(7)
    for _ in range(200):
        w = rng.normal(size=3)
        dt = rng.uniform(1e-4, 1.0)
        if np.linalg.norm(w * dt) >= math.pi:
            continue
        prod = rodrigues_increment(w, dt) @ rodrigues_increment(-w, dt)
        assert np.abs(prod - np.eye(3)).max() <= 1e-12


def test_small_angle_continuity():
    sigma = np.array([0.6, -0.8, 0.0]) * 1e-10
    got = rodrigues_increment(sigma, 1.0)
    first_order = np.eye(3) + np.array(
        [[0, -sigma[2], sigma[1]], [sigma[2], 0, -sigma[0]], [-sigma[1], sigma[0], 0]]
    )
    assert np.abs(got - first_order).max() <= 1e-18


def test_non_finite_input_rejected():
    with pytest.raises(InvalidInputError):
        rodrigues_increment(np.array([np.nan, 0.0, 0.0]), 0.01)
    with pytest.raises(InvalidInputError):
        rodrigues_increment(np.zeros(3), 0.0)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-50.0, 50.0), min_size=3, max_size=3),
    st.floats(1e-6, 1.0),
)
def test_increment_is_always_proper_rotation(w, dt):
    omega = rodrigues_increment(np.array(w), dt)
    assert is_rotation(omega, tol=1e-9)


def test_identity_composition():
    np.testing.assert_allclose(update_attitude(np.eye(3), np.eye(3)), np.eye(3))


def test_planar_rotations_add():
    got = update_attitude(rot_z(math.radians(30)), rot_z(math.radians(60)))
    np.testing.assert_allclose(got, rot_z(math.radians(90)), atol=1e-12)


def test_composition_stays_orthogonal():
    rng = np.random.default_rng(42)
    for _ in range(100):
        C = rotation_from_rotvec(rng.normal(size=3))
        omega = rotation_from_rotvec(rng.normal(size=3))
        out = update_attitude(C, omega)
        assert orthogonality_defect(out) <= 1e-12


def test_reorthonormalize_idempotent_on_exact_rotation():
    C = rotation_from_rotvec(np.array([0.4, 1.1, -0.3]))
    np.testing.assert_allclose(reorthonormalize(C), C, atol=1e-14)


def test_reorthonormalize_projects_perturbation():
    rng = np.random.default_rng(3)
    C = rotation_from_rotvec(np.array([0.2, -0.5, 0.9]))
    noisy = C + 1e-6 * rng.standard_normal((3, 3))
    fixed = reorthonormalize(noisy)
    assert orthogonality_defect(fixed) <= 1e-14


def test_reorthonormalize_rejects_garbage():
    with pytest.raises(DegenerateInputError):
        reorthonormalize(np.eye(3) * 1.5)
    with pytest.raises(DegenerateInputError):
        reorthonormalize(np.diag([1.0, 1.0, -1.0]) @ rot_z(0.3))


def test_long_integration_stays_orthogonal():
    # 1e5 noisy increments, periodic polar correction every 256 products
    rng = np.random.default_rng(2024)
    C = np.eye(3)
    for k in range(100_000):
        C = C @ rodrigues_increment(rng.normal(scale=0.5, size=3), 0.01)
        if (k + 1) % 256 == 0:
            C = reorthonormalize(C)
    assert orthogonality_defect(C) <= 1e-9


def test_yaw_identity_and_quarter_turn():
    assert yaw_of(np.eye(3)) == 0.0
    assert yaw_of(rot_z(math.pi / 2)) == pytest.approx(math.pi / 2, abs=1e-12)


def test_yaw_ignores_roll():
    rng = np.random.default_rng(11)
    for theta in rng.uniform(-math.pi, math.pi, size=50):
        C = rot_z(theta) @ rot_x(math.radians(5))
        direct = math.atan2(C[1, 0], C[0, 0])
        assert yaw_of(C) == pytest.approx(direct, abs=1e-15)
        assert abs(wrap_angle(yaw_of(C) - theta)) <= 1e-9


def test_yaw_degenerate_when_x_axis_vertical():
    # body x pointing straight up: 90 deg pitch
    C = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
    with pytest.raises(DegenerateHeadingError):
        yaw_of(C)


def test_yaw_advances_by_z_increment_at_level_attitude():
    rng = np.random.default_rng(5)
    for _ in range(50):
        psi = rng.uniform(-math.pi, math.pi)
        delta = rng.uniform(-math.pi, math.pi)
        C = rot_z(psi)
        moved = update_attitude(C, rot_z(delta))
        got = wrap_angle(yaw_of(moved) - yaw_of(C))
        assert abs(wrap_angle(got - delta)) <= 1e-9


def test_log_inverts_rodrigues():
    rng = np.random.default_rng(9)
    for _ in range(500):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        theta = rng.uniform(0.0, 3.0)
        sigma = axis * theta
        back = log_rotation(rodrigues_increment(sigma, 1.0))
        assert np.abs(back - sigma).max() <= 1e-10


def test_log_small_angle():
    sigma = np.array([1e-11, -2e-11, 5e-12])
    back = log_rotation(rodrigues_increment(sigma, 1.0))
    assert np.abs(back - sigma).max() <= 1e-22


def test_log_rejects_half_turn():
    with pytest.raises(AliasingError):
        log_rotation(rot_z(math.pi))


@settings(max_examples=100, deadline=None)
@given(st.floats(-10.0, 10.0))
def test_wrap_angle_range_and_equivalence(angle):
    w = float(wrap_angle(angle))
    assert -math.pi < w <= math.pi
    assert math.isclose(math.sin(w), math.sin(angle), abs_tol=1e-12)
    assert math.isclose(math.cos(w), math.cos(angle), abs_tol=1e-12)
