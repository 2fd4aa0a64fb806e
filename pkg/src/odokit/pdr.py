"""Step-based pedestrian dead reckoning.

Counts steps as local maxima of the smoothed acceleration magnitude,
assigns each a length from the fourth root of its peak-to-valley
amplitude, takes heading from integrated gyro yaw, and advances one pose
per step. It inherits walking's key property: position error accumulates
per step instead of compounding through double integration, but it
produces nothing when there are no steps to detect (a cart or trolley
ride defeats it entirely).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    InsufficientDataError,
    InvalidInputError,
    UnsupportedRateError,
)
from .rotations import rodrigues_increment, wrap_angle, yaw_of
from .strapdown import ImuSequence
from .windows import Pose2D

MIN_RATE = 50.0
# defaults calibrated on the in-repo gait generator: walking peaks clear
# gravity magnitude by >1.1 m/s^2 at all supported speeds, while
# stationary-with-noise and trolley streams stay within 0.13 m/s^2
DEFAULT_THRESHOLD = 10.3
DEFAULT_STEP_COEFFICIENT = 0.56
AMPLITUDE_EXPONENT = 0.25


@dataclass(frozen=True)
class StepEvent:
    """One detected step: where it peaked and the swing that led to it."""

    index: int
    peak_accel: float
    valley_accel: float

    def __post_init__(self):
        if not (math.isfinite(self.peak_accel)
                and math.isfinite(self.valley_accel)):
            raise InvalidInputError("step accelerations must be finite")
        if self.peak_accel < self.valley_accel:
            raise InvalidInputError("step peak below its valley")

    @property
    def amplitude(self) -> float:
        return self.peak_accel - self.valley_accel


@dataclass(frozen=True)
class PdrConfig:
    """Detector and stride settings.

    smoothing_window is in samples (25 = 0.25 s at 100 Hz). peak_threshold
    is absolute smoothed |acc| in m/s^2. step_coefficient is the Weinberg
    K in m per (m/s^2)^(1/4). Heading always comes from gyro-integrated
    yaw; the field exists to make that choice explicit in saved configs.
    """

    smoothing_window: int = 25
    peak_threshold: float = DEFAULT_THRESHOLD
    min_step_interval: float = 0.3
    step_coefficient: float = DEFAULT_STEP_COEFFICIENT
    heading_source: str = "gyro_yaw"

    def __post_init__(self):
        if self.smoothing_window < 1:
            raise InvalidInputError("smoothing_window must be >= 1 sample")
        if self.min_step_interval <= 0:
            raise InvalidInputError("min_step_interval must be > 0")
        if self.step_coefficient <= 0:
            raise InvalidInputError("step_coefficient must be > 0")
        if self.heading_source != "gyro_yaw":
            raise InvalidInputError(
                f"unsupported heading source {self.heading_source!r}")


def _check_stream(stream: ImuSequence) -> float:
    dt = stream.dt
    if np.max(np.abs(np.diff(stream.t) - dt)) > 1e-9:
        raise InvalidInputError("step detection needs uniform sampling")
    if 1.0 / dt < MIN_RATE:
        raise UnsupportedRateError(
            f"sampling rate {1.0 / dt:.1f} Hz is below {MIN_RATE:.0f} Hz")
    return dt


def smoothed_magnitude(stream: ImuSequence, width: int) -> np.ndarray:
    """Symmetric moving average of |acc|, edge windows renormalized."""
    mag = np.linalg.norm(stream.acc, axis=1)
    if width == 1:
        return mag
    kern = np.ones(width)
    norm = np.convolve(np.ones_like(mag), kern, mode="same")
    return np.convolve(mag, kern, mode="same") / norm


def detect_steps(stream: ImuSequence, cfg: PdrConfig) -> list[StepEvent]:
    """Local maxima of smoothed |acc| above threshold, spaced by at least
    min_step_interval. Each event carries the minimum since the previous
    step as its valley."""
    dt = _check_stream(stream)
    sm = smoothed_magnitude(stream, cfg.smoothing_window)
    if len(sm) < 3:
        return []
    rising = sm[1:-1] > sm[:-2]
    falling = sm[1:-1] >= sm[2:]
    high = sm[1:-1] > cfg.peak_threshold
    candidates = np.flatnonzero(rising & falling & high) + 1
    gap = cfg.min_step_interval / dt - 1e-9
    events: list[StepEvent] = []
    last = None
    prev_peak = 0
    for i in candidates:
        if last is not None and i - last < gap:
            continue
        valley = float(np.min(sm[prev_peak:i + 1]))
        events.append(StepEvent(index=int(i), peak_accel=float(sm[i]),
                                valley_accel=valley))
        last = i
        prev_peak = int(i)
    return events


def step_length(event: StepEvent, cfg: PdrConfig) -> float:
    """Weinberg stride estimate K * (peak - valley)^(1/4)."""
    return cfg.step_coefficient * event.amplitude ** AMPLITUDE_EXPONENT


def integrated_yaw(stream: ImuSequence, indices) -> np.ndarray:
    """Gyro-integrated yaw (relative to the first sample) at each index.

    indices must be ascending sample positions; index i means the attitude
    accumulated over samples [0, i), i.e. the heading when sample i begins.
    """
    dt = _check_stream(stream)
    indices = list(indices)
    if any(i < 0 or i >= len(stream) for i in indices):
        raise InvalidInputError("yaw index beyond end of stream")
    if any(b < a for a, b in zip(indices, indices[1:])):
        raise InvalidInputError("yaw indices must be ascending")
    out = np.empty(len(indices))
    attitude = np.eye(3)
    pos = 0
    for k, target in enumerate(indices):
        while pos < target:
            attitude = attitude @ rodrigues_increment(stream.gyro[pos], dt)
            pos += 1
        out[k] = yaw_of(attitude)
    return out


def pdr_track(stream: ImuSequence, start: Pose2D, cfg: PdrConfig) -> list[Pose2D]:
    """One pose per detected step, plus the start pose first.

    Each step advances the position by its stride along the gyro heading
    at the step instant. No steps detected means the output never leaves
    the start pose.
    """
    events = detect_steps(stream, cfg)
    poses = [start]
    if not events:
        return poses
    yaws = integrated_yaw(stream, [e.index for e in events])
    x, y = start.x, start.y
    for event, yaw in zip(events, yaws):
        psi = wrap_angle(start.psi + yaw)
        stride = step_length(event, cfg)
        x += stride * math.cos(psi)
        y += stride * math.sin(psi)
        poses.append(Pose2D(x, y, psi))
    return poses


def calibrate_step_coefficient(stream: ImuSequence, distance: float,
                               cfg: PdrConfig) -> PdrConfig:
    """Fit K so the detected steps cover a known travelled distance."""
    if distance <= 0:
        raise InvalidInputError("calibration distance must be > 0")
    events = detect_steps(stream, cfg)
    total = sum(e.amplitude ** AMPLITUDE_EXPONENT for e in events)
    if total <= 0:
        raise InsufficientDataError("no usable steps to calibrate on")
    return replace(cfg, step_coefficient=distance / total)
