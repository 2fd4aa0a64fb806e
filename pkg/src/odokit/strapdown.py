"""Open-loop strapdown integration (attitude / velocity / position).

Discrete update per sample, explicit Euler with pre-update state:

    C(t) = C(t-1) @ Omega(w(t) dt)
    v(t) = v(t-1) + (C(t-1) @ a(t) + g) dt
    L(t) = L(t-1) + v(t-1) dt

where `a` is the specific force sensed in the body frame (a stationary level
sensor reads (0, 0, +g0)) and `g` is the gravity acceleration vector in the
navigation frame, (0, 0, -g0) by default. Earth rotation and Coriolis terms
are ignored. The same index structure is used by the window reformulation
and by the simulator inverse, so those agree with this integrator to
floating-point precision rather than to O(dt).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import EmptyInputError, InvalidInputError
from .rotations import is_rotation, reorthonormalize, rodrigues_increment

STANDARD_GRAVITY = 9.80665  # m/s^2

# Attitude product drift is corrected with one polar-iteration pass this often.
REORTHO_EVERY = 256


def gravity_vector(g0: float = STANDARD_GRAVITY) -> np.ndarray:
    """Navigation-frame gravity acceleration (0, 0, -g0), z up."""
    return np.array([0.0, 0.0, -float(g0)])


DEFAULT_GRAVITY = gravity_vector()


class ImuSample(NamedTuple):
    """One timestamped 6-DoF inertial reading (body frame)."""

    t: float
    acc: np.ndarray  # specific force, m/s^2
    gyro: np.ndarray  # angular rate, rad/s


@dataclass(frozen=True)
class ImuSequence:
    """A uniform-rate inertial stream as struct-of-arrays.

    Sample i spans [t[i], t[i] + dt): it advances the state at t[i] to the
    state at t[i] + dt.
    """

    t: np.ndarray  # (N,)
    acc: np.ndarray  # (N, 3)
    gyro: np.ndarray  # (N, 3)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        acc = np.asarray(self.acc, dtype=float)
        gyro = np.asarray(self.gyro, dtype=float)
        if acc.shape != (t.size, 3) or gyro.shape != (t.size, 3):
            raise InvalidInputError("acc and gyro must be (N, 3) matching t")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(acc)) and np.all(np.isfinite(gyro))):
            raise InvalidInputError("IMU stream contains non-finite values")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise InvalidInputError("timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "acc", acc)
        object.__setattr__(self, "gyro", gyro)

    def __len__(self) -> int:
        return self.t.size

    def sample(self, i: int) -> ImuSample:
        return ImuSample(float(self.t[i]), self.acc[i], self.gyro[i])

    def slice(self, start: int, stop: int) -> "ImuSequence":
        return ImuSequence(self.t[start:stop], self.acc[start:stop], self.gyro[start:stop])

    @property
    def dt(self) -> float:
        """Nominal sample period; stream must be uniform for windowed use."""
        if len(self) < 2:
            raise InvalidInputError("need at least 2 samples to infer dt")
        return float(self.t[1] - self.t[0])


@dataclass(frozen=True)
class NavState:
    """Strapdown latent state: attitude (body->nav), velocity, location."""

    C: np.ndarray
    v: np.ndarray
    pos: np.ndarray

    def __post_init__(self):
        if not is_rotation(self.C, tol=1e-9):
            raise InvalidInputError("NavState attitude must be a proper rotation (tol 1e-9)")
        if not (np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.pos))):
            raise InvalidInputError("NavState velocity/position must be finite")


@dataclass(frozen=True)
class StateTrack:
    """One NavState per sample, stacked."""

    t: np.ndarray  # (K,)
    C: np.ndarray  # (K, 3, 3)
    v: np.ndarray  # (K, 3)
    pos: np.ndarray  # (K, 3)

    def __len__(self) -> int:
        return self.t.size

    def state(self, i: int) -> NavState:
        return NavState(self.C[i], self.v[i], self.pos[i])


def propagate(
    state: NavState,
    sample: ImuSample,
    dt: float,
    g: np.ndarray = DEFAULT_GRAVITY,
) -> NavState:
    """One explicit-Euler strapdown step.

    Velocity and position use the PRE-update attitude and velocity; see the
    module docstring for the exact update equations.
    """
    acc = np.asarray(sample.acc, dtype=float)
    gyro = np.asarray(sample.gyro, dtype=float)
    if not (np.all(np.isfinite(acc)) and np.all(np.isfinite(gyro))):
        raise InvalidInputError("IMU sample must be finite")
    if dt <= 0.0 or not math.isfinite(dt):
        raise InvalidInputError(f"dt must be > 0, got {dt}")
    pos = state.pos + state.v * dt
    v = state.v + (state.C @ acc + g) * dt
    C = state.C @ rodrigues_increment(gyro, dt)
    return NavState(C=C, v=v, pos=pos)


def integrate_track(
    samples: ImuSequence,
    initial: NavState,
    g: np.ndarray = DEFAULT_GRAVITY,
    dt: float | None = None,
) -> StateTrack:
    """Fold `propagate` over a stream; one output state per input sample.

    Output i is the state at time t[i] + dt (the result of applying sample i);
    output 0 is one step from `initial`. dt defaults to the stream spacing
    (or must be given for single-sample streams). The attitude product gets a
    polar correction every REORTHO_EVERY steps.
    """
    n = len(samples)
    if n == 0:
        raise EmptyInputError("cannot integrate an empty stream")
    if dt is None:
        dt = samples.dt if n > 1 else None
    if dt is None:
        raise InvalidInputError("dt is required for a single-sample stream")

    acc = samples.acc
    gyro = samples.gyro
    if not (np.all(np.isfinite(acc)) and np.all(np.isfinite(gyro))):
        raise InvalidInputError("IMU stream contains non-finite values")

    out_t = samples.t + dt
    out_C = np.empty((n, 3, 3))
    out_v = np.empty((n, 3))
    out_pos = np.empty((n, 3))

    C = np.array(initial.C, dtype=float)
    v = np.array(initial.v, dtype=float)
    pos = np.array(initial.pos, dtype=float)
    for i in range(n):
        pos = pos + v * dt
        v = v + (C @ acc[i] + g) * dt
        C = C @ rodrigues_increment(gyro[i], dt)
        if (i + 1) % REORTHO_EVERY == 0:
            C = reorthonormalize(C)
        out_C[i] = C
        out_v[i] = v
        out_pos[i] = pos
    return StateTrack(t=out_t, C=out_C, v=out_v, pos=out_pos)


def tilt_drift(tilt: float, duration: float, g0: float = STANDARD_GRAVITY):
    """Analytic drift caused by a constant attitude error of `tilt` radians.

    Misprojecting gravity leaks a horizontal acceleration a = g0 sin(tilt),
    which grows into v = a T and p = a T^2 / 2 over `duration` seconds.
    Returns (accel_err m/s^2, vel_err m/s, pos_err m).
    """
    if duration < 0.0:
        raise InvalidInputError("duration must be >= 0")
    a = g0 * math.sin(tilt)
    return a, a * duration, 0.5 * a * duration * duration
