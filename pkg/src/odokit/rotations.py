"""Rotation algebra for body-to-navigation attitude bookkeeping.

Conventions (normative for the whole package):
    - navigation frame: x east, y north, z up, right-handed
    - attitude C maps body-frame vectors into the navigation frame
    - gyro increments post-multiply: C(t) = C(t-1) @ Omega(t), i.e. the
      increment is expressed in the body frame
    - yaw is the azimuth of the body x-axis in the horizontal plane,
      psi = atan2(C[1,0], C[0,0]), wrapped to (-pi, pi]

All functions are pure and operate on float64 numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    AliasingError,
    DegenerateHeadingError,
    DegenerateInputError,
    InvalidInputError,
)

# Below this rotation angle the closed-form Rodrigues coefficients are
# replaced by their series expansions (error O(theta^4)).
SMALL_ANGLE = 1e-8

# Orthogonality drift above which update_attitude re-projects its result.
ORTHO_DRIFT_TOL = 1e-9

# Body x-axis closer than this to vertical makes yaw undefined.
YAW_DEGENERACY_TOL = 1e-6

_IDENTITY = np.eye(3)


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix [v]x such that skew(v) @ u == cross(v, u)."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def rot_x(angle: float) -> np.ndarray:
    """Rotation by `angle` radians about the x axis."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    """Rotation by `angle` radians about the y axis."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    """Rotation by `angle` radians about the z axis."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def wrap_angle(angle):
    """Wrap an angle (scalar or array) to (-pi, pi]."""
    wrapped = np.mod(-np.asarray(angle) + np.pi, 2.0 * np.pi)
    return np.pi - wrapped  # maps exact pi to +pi, not -pi


def orthogonality_defect(C: np.ndarray) -> float:
    """max-norm of C^T C - I; zero for a perfectly orthogonal matrix."""
    return float(np.abs(C.T @ C - _IDENTITY).max())


def is_rotation(C: np.ndarray, tol: float = 1e-9) -> bool:
    """True if C is orthogonal within `tol` and has det(C) = +1 within `tol`."""
    C = np.asarray(C)
    if C.shape != (3, 3) or not np.all(np.isfinite(C)):
        return False
    return orthogonality_defect(C) <= tol and abs(np.linalg.det(C) - 1.0) <= tol


def axis_angle_matrix(sigma: np.ndarray) -> np.ndarray:
    """Rotation matrix for the rotation vector `sigma` (axis * angle, rad).

    Closed-form Rodrigues with sin(t)/t and (1-cos t)/t^2 coefficients;
    switches to their series (1 - t^2/6, 1/2 - t^2/24) below SMALL_ANGLE so
    the map is continuous at zero.
    """
    theta2 = float(sigma @ sigma)
    theta = math.sqrt(theta2)
    if theta < SMALL_ANGLE:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta2
    K = skew(sigma)
    return _IDENTITY + a * K + b * (K @ K)


def rodrigues_increment(w: np.ndarray, dt: float) -> np.ndarray:
    """Attitude increment Omega for body angular rate `w` (rad/s) held for `dt` s.

    Returns the proper rotation for the rotation vector w*dt. Raises
    InvalidInputError for non-finite input or dt <= 0.
    """
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)) or not math.isfinite(dt):
        raise InvalidInputError("angular rate and dt must be finite")
    if dt <= 0.0:
        raise InvalidInputError(f"dt must be > 0, got {dt}")
    return axis_angle_matrix(w * dt)


def update_attitude(C: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Compose an attitude with a body-frame increment: C' = C @ omega.

    Re-orthonormalizes the product if its orthogonality defect exceeds
    ORTHO_DRIFT_TOL.
    """
    C = np.asarray(C, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(omega))):
        raise InvalidInputError("attitude inputs must be finite")
    out = C @ omega
    if orthogonality_defect(out) > ORTHO_DRIFT_TOL:
        out = reorthonormalize(out)
    return out


def reorthonormalize(C: np.ndarray, max_defect: float = 1e-3) -> np.ndarray:
    """Project a near-rotation onto the nearest proper rotation.

    Uses the iterative polar correction R <- 1.5 R - 0.5 R R^T R, which
    converges quadratically to the orthogonal polar factor for inputs close
    to orthogonal. Raises DegenerateInputError if the defect exceeds
    `max_defect` or the matrix is reflection-like (det <= 0).
    """
    R = np.asarray(C, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise InvalidInputError("expected a finite 3x3 matrix")
    defect = orthogonality_defect(R)
    if defect > max_defect:
        raise DegenerateInputError(
            f"matrix is too far from orthogonal (defect {defect:.3e} > {max_defect:.0e})"
        )
    if np.linalg.det(R) <= 0.0:
        raise DegenerateInputError("matrix has non-positive determinant")
    for _ in range(20):
        R = 1.5 * R - 0.5 * R @ (R.T @ R)
        if orthogonality_defect(R) <= 1e-15:
            break
    return R


def yaw_of(C: np.ndarray) -> float:
    """Heading psi in (-pi, pi]: azimuth of the body x-axis in the horizontal plane.

    Raises DegenerateHeadingError when the body x-axis is within
    YAW_DEGENERACY_TOL of vertical (heading undefined).
    """
    C = np.asarray(C, dtype=float)
    horizontal = math.hypot(C[0, 0], C[1, 0])
    if horizontal < YAW_DEGENERACY_TOL:
        raise DegenerateHeadingError("body x-axis is vertical; yaw undefined")
    return float(wrap_angle(math.atan2(C[1, 0], C[0, 0])))


def log_rotation(R: np.ndarray) -> np.ndarray:
    """Rotation vector sigma with axis_angle_matrix(sigma) == R, |sigma| < pi.

    Small-angle-safe inverse of the Rodrigues map. Raises AliasingError when
    the rotation angle is within 1e-6 of pi (sign of the axis is ambiguous
    there and a sampled stream cannot distinguish +/- the increment).
    """
    R = np.asarray(R, dtype=float)
    vee = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = float(np.linalg.norm(vee))  # sin(theta)
    c = 0.5 * (float(np.trace(R)) - 1.0)  # cos(theta)
    theta = math.atan2(s, c)
    if theta > math.pi - 1e-6:
        raise AliasingError("rotation angle within 1e-6 of pi; increment ambiguous")
    if theta < SMALL_ANGLE:
        # vee = sin(theta)*axis ~ sigma to O(theta^3); first-order correction
        return vee * (1.0 + theta * theta / 6.0)
    return vee * (theta / s)
