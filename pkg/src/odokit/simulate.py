"""Motion synthesis and exact IMU inversion.

Truth tracks are built velocity-first: the generator lays down per-sample
velocity and attitude series and integrates position with the same explicit
Euler sum the strapdown module uses. inverse_imu then recovers body rates by
rotation-log and specific force by finite differences, so integrating the
synthetic IMU stream from the true initial state reproduces the truth to
floating point. Gravity reaction, centripetal and gait accelerations never
need to be modeled by hand; they fall out of the inversion.

A truth track with N+1 poses yields N IMU samples; sample i spans pose i to
pose i+1, matching the window-labeling convention.

The sensor-error model applies misalignment, per-axis scale, constant bias,
bias random walk and white noise, all reproducible from one seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, UnsupportedRateError
from .rotations import axis_angle_matrix, log_rotation, rot_y, rot_z
from .strapdown import DEFAULT_GRAVITY, ImuSequence, StateTrack

PROFILE_KINDS = ("walk", "trolley", "scripted")

# gait shape constants: speed pulsation fraction, bob velocity m/s,
# pitch amplitude rad, gate softness m/s
GAIT_PULSE = 0.12
GAIT_BOB_VEL = 0.18
GAIT_PITCH = 0.05
GAIT_GATE = 0.25

# trolley ground-roughness accel scale per unit speed, m/s^2
ROUGHNESS_ACCEL = 0.08


@dataclass(frozen=True)
class MotionProfile:
    """Declarative description of one synthetic trajectory.

    turn_schedule and speed_schedule are (start_time, value) breakpoints,
    each holding from its start time until the next breakpoint. An empty
    turn schedule means straight; an empty speed schedule lets walk/trolley
    wander inside speed_range (seeded), while scripted requires one.
    """

    kind: str
    duration: float
    rate: float = 100.0
    speed_range: tuple[float, float] = (1.0, 1.0)
    step_freq: float = 2.0
    turn_schedule: tuple[tuple[float, float], ...] = ()
    speed_schedule: tuple[tuple[float, float], ...] = ()
    start_heading: float = 0.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise InvalidInputError(f"unknown profile kind {self.kind!r}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise InvalidInputError("duration must be > 0")
        if self.rate < 50.0:
            raise UnsupportedRateError(f"rate {self.rate} Hz is below 50 Hz")
        lo, hi = self.speed_range
        if not (0.0 <= lo <= hi and math.isfinite(hi)):
            raise InvalidInputError("speed_range must satisfy 0 <= lo <= hi")
        if self.kind == "walk" and self.step_freq <= 0:
            raise InvalidInputError("walk needs step_freq > 0")
        if self.kind == "scripted" and not self.speed_schedule:
            raise InvalidInputError("scripted profile needs a speed_schedule")


def _vec3(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} must be a finite 3-vector")
    return v


@dataclass(frozen=True)
class NoiseModel:
    """Sensor corruption: x <- M S x + b0 + walk(t) + white.

    White-noise entries are densities per sqrt(Hz); the per-sample sigma is
    density * sqrt(rate). Walk entries are random-walk rates per sqrt(s).
    Scale entries are per-axis fractions (|s| <= 5%), misalign is a
    small-angle rotation vector shared by both sensors (norm <= 2 degrees).
    """

    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_walk: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_white: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_scale: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_walk: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_white: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_scale: np.ndarray = field(default_factory=lambda: np.zeros(3))
    misalign: np.ndarray = field(default_factory=lambda: np.zeros(3))
    seed: int = 0

    def __post_init__(self):
        for name in ("accel_bias", "accel_walk", "accel_white", "accel_scale",
                     "gyro_bias", "gyro_walk", "gyro_white", "gyro_scale",
                     "misalign"):
            object.__setattr__(self, name, _vec3(getattr(self, name), name))
        if np.any(np.abs(self.accel_scale) > 0.05) or np.any(np.abs(self.gyro_scale) > 0.05):
            raise InvalidInputError("scale-factor errors must stay within 5%")
        if np.linalg.norm(self.misalign) > np.deg2rad(2.0):
            raise InvalidInputError("misalignment must stay within 2 degrees")

    def is_zero(self) -> bool:
        return all(not np.any(getattr(self, n)) for n in
                   ("accel_bias", "accel_walk", "accel_white", "accel_scale",
                    "gyro_bias", "gyro_walk", "gyro_white", "gyro_scale",
                    "misalign"))


def default_consumer_noise(seed: int = 0) -> NoiseModel:
    """Synthetic consumer-MEMS figures, not calibrated to any device.

    Chosen so that open-loop strapdown visibly diverges within a minute
    (hundreds of meters and up) while remaining physically plausible.
    """
    return NoiseModel(
        accel_bias=np.array([0.05, -0.03, 0.02]),
        accel_walk=np.array([1e-3, 1e-3, 1e-3]),
        accel_white=np.array([8e-3, 8e-3, 8e-3]),
        accel_scale=np.array([5e-3, -4e-3, 3e-3]),
        gyro_bias=np.array([2e-3, -1e-3, 1.5e-3]),
        gyro_walk=np.array([5e-5, 5e-5, 5e-5]),
        gyro_white=np.array([4e-4, 4e-4, 4e-4]),
        gyro_scale=np.array([4e-3, 3e-3, -5e-3]),
        misalign=np.array([5e-3, 4e-3, -3e-3]),
        seed=seed,
    )


def _schedule_series(schedule: Sequence[tuple[float, float]], t: np.ndarray,
                     default: float) -> np.ndarray:
    """Piecewise-constant series from (start_time, value) breakpoints."""
    out = np.full(t.shape, default)
    for start, value in sorted(schedule):
        out[t >= start - 1e-12] = value
    return out


def _highpass(x: np.ndarray, window: int) -> np.ndarray:
    """Remove a running mean; crude high-pass adequate for roughness."""
    kernel = np.ones(window) / window
    smooth = np.apply_along_axis(
        lambda c: np.convolve(c, kernel, mode="same"), 0, x)
    return x - smooth


def _assemble(t: np.ndarray, psi: np.ndarray, pitch: np.ndarray,
              v: np.ndarray, start_pos: np.ndarray) -> StateTrack:
    dt = float(t[1] - t[0])
    pos = np.empty((t.size, 3))
    pos[0] = start_pos
    pos[1:] = start_pos + np.cumsum(v[:-1] * dt, axis=0)
    C = np.einsum("nij,njk->nik",
                  np.stack([rot_z(p) for p in psi]),
                  np.stack([rot_y(q) for q in pitch]))
    return StateTrack(t=t, C=C, v=v, pos=pos)


def _heading(profile: MotionProfile, t: np.ndarray) -> np.ndarray:
    rate = _schedule_series(profile.turn_schedule, t, 0.0)
    dt = float(t[1] - t[0])
    psi = np.empty_like(t)
    psi[0] = profile.start_heading
    psi[1:] = profile.start_heading + np.cumsum(rate[:-1] * dt)
    return psi


def _commanded_speed(profile: MotionProfile, t: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
    if profile.speed_schedule:
        return _schedule_series(profile.speed_schedule, t,
                                profile.speed_schedule[0][1])
    lo, hi = profile.speed_range
    if hi == lo:
        return np.full(t.shape, lo)
    knots = np.arange(0.0, profile.duration + 4.0, 4.0)
    vals = rng.uniform(lo, hi, knots.size)
    return np.interp(t, knots, vals)


def synth_walk(profile: MotionProfile, seed: int = 0) -> StateTrack:
    """Pedestrian gait: bob, speed pulsation and pitch at the step frequency.

    Oscillation amplitudes vanish with commanded speed, so zero-speed spans
    are true standstill. Stride length (distance per step at fixed cadence)
    grows monotonically with speed.
    """
    if profile.kind != "walk":
        raise InvalidInputError("synth_walk needs kind='walk'")
    rng = np.random.default_rng(seed)
    n = int(round(profile.duration * profile.rate))
    dt = 1.0 / profile.rate
    t = np.arange(n + 1) * dt
    phase0 = rng.uniform(0.0, 2.0 * np.pi)
    s_cmd = _commanded_speed(profile, t, rng)
    phase = 2.0 * np.pi * profile.step_freq * t + phase0
    gate = s_cmd / (s_cmd + GAIT_GATE)
    speed = s_cmd * (1.0 + GAIT_PULSE * np.sin(phase))
    psi = _heading(profile, t)
    pitch = GAIT_PITCH * gate * np.sin(phase)
    v = np.stack([speed * np.cos(psi), speed * np.sin(psi),
                  GAIT_BOB_VEL * gate * np.cos(phase)], axis=1)
    return _assemble(t, psi, pitch, v, np.zeros(3))


def synth_trolley(profile: MotionProfile, seed: int = 0) -> StateTrack:
    """Wheeled push: smooth speed, no periodic component.

    A broadband speed-proportional roughness rides on the velocity (ground
    texture through the castors); it is the only motion cue above 1 Hz and
    carries no spectral peak. A degenerate speed_range disables roughness,
    giving the exact constant-speed fixture.
    """
    if profile.kind != "trolley":
        raise InvalidInputError("synth_trolley needs kind='trolley'")
    rng = np.random.default_rng(seed)
    n = int(round(profile.duration * profile.rate))
    dt = 1.0 / profile.rate
    t = np.arange(n + 1) * dt
    s_cmd = _commanded_speed(profile, t, rng)
    psi = _heading(profile, t)
    v = np.stack([s_cmd * np.cos(psi), s_cmd * np.sin(psi),
                  np.zeros_like(t)], axis=1)
    lo, hi = profile.speed_range
    if hi > lo and not profile.speed_schedule:
        # velocity wiggle sized so the induced accel is ROUGHNESS_ACCEL per
        # unit speed; sub-mm position impact
        wiggle = _highpass(rng.normal(0.0, 1.0, (t.size, 3)),
                           int(profile.rate // 3))
        v = v + (ROUGHNESS_ACCEL * dt / np.sqrt(2.0)) * s_cmd[:, None] * wiggle
    return _assemble(t, psi, np.zeros_like(t), v, np.zeros(3))


def synth_scripted(profile: MotionProfile, seed: int = 0) -> StateTrack:
    """Kinematic cart following explicit speed and turn schedules exactly."""
    if profile.kind != "scripted":
        raise InvalidInputError("synth_scripted needs kind='scripted'")
    n = int(round(profile.duration * profile.rate))
    dt = 1.0 / profile.rate
    t = np.arange(n + 1) * dt
    s = _schedule_series(profile.speed_schedule, t, profile.speed_schedule[0][1])
    psi = _heading(profile, t)
    v = np.stack([s * np.cos(psi), s * np.sin(psi), np.zeros_like(t)], axis=1)
    return _assemble(t, psi, np.zeros_like(t), v, np.zeros(3))


def synthesize(profile: MotionProfile, seed: int = 0) -> StateTrack:
    """Dispatch on profile kind."""
    if profile.kind == "walk":
        return synth_walk(profile, seed)
    if profile.kind == "trolley":
        return synth_trolley(profile, seed)
    return synth_scripted(profile, seed)


def inverse_imu(truth: StateTrack, g: np.ndarray = DEFAULT_GRAVITY) -> ImuSequence:
    """Exact algebraic inverse of the strapdown update.

    Per step: w = log(C_i^T C_{i+1}) / dt and a = C_i^T ((v_{i+1}-v_i)/dt - g).
    Integrating the result from truth state 0 reproduces the truth track to
    floating point. Consecutive attitudes must differ by less than a
    half-turn (aliasing error otherwise).
    """
    m = len(truth)
    if m < 2:
        raise InvalidInputError("need at least 2 truth poses")
    dts = np.diff(truth.t)
    dt = float(dts[0])
    if np.any(np.abs(dts - dt) > 1e-9):
        raise InvalidInputError("truth track is not uniformly sampled")
    g = np.asarray(g, dtype=float)
    n = m - 1
    acc = np.empty((n, 3))
    gyro = np.empty((n, 3))
    dv = (truth.v[1:] - truth.v[:-1]) / dt - g
    for i in range(n):
        Ci = truth.C[i]
        gyro[i] = log_rotation(Ci.T @ truth.C[i + 1]) / dt
        acc[i] = Ci.T @ dv[i]
    return ImuSequence(truth.t[:-1].copy(), acc, gyro)


def corrupt(samples: ImuSequence, model: NoiseModel) -> ImuSequence:
    """Apply the sensor-error model; pure function of (samples, model).

    Draw order is fixed (accel white, gyro white, accel walk, gyro walk) so
    a seed pins the entire corruption. An all-zero model returns the input
    arrays bit-exactly.
    """
    if model.is_zero():
        return ImuSequence(samples.t.copy(), samples.acc.copy(),
                           samples.gyro.copy())
    n = len(samples)
    dt = samples.dt if n > 1 else 0.01
    rate = 1.0 / dt
    rng = np.random.default_rng(model.seed)
    white_a = rng.normal(0.0, 1.0, (n, 3)) * (model.accel_white * np.sqrt(rate))
    white_g = rng.normal(0.0, 1.0, (n, 3)) * (model.gyro_white * np.sqrt(rate))
    walk_a = np.cumsum(rng.normal(0.0, 1.0, (n, 3)) * (model.accel_walk * np.sqrt(dt)), axis=0)
    walk_g = np.cumsum(rng.normal(0.0, 1.0, (n, 3)) * (model.gyro_walk * np.sqrt(dt)), axis=0)
    M = axis_angle_matrix(model.misalign)
    MSa = M @ np.diag(1.0 + model.accel_scale)
    MSg = M @ np.diag(1.0 + model.gyro_scale)
    acc = samples.acc @ MSa.T + model.accel_bias + walk_a + white_a
    gyro = samples.gyro @ MSg.T + model.gyro_bias + walk_g + white_g
    return ImuSequence(samples.t.copy(), acc, gyro)


def make_dataset(profile: MotionProfile, noise: NoiseModel | None,
                 seed: int = 0) -> tuple[StateTrack, ImuSequence]:
    """Truth plus (optionally corrupted) IMU stream for one trajectory."""
    truth = synthesize(profile, seed)
    seq = inverse_imu(truth)
    if noise is not None and not noise.is_zero():
        seq = corrupt(seq, noise)
    return truth, seq


def with_seed(model: NoiseModel, seed: int) -> NoiseModel:
    return replace(model, seed=seed)
