"""Trajectory error metrics.

Estimates are compared against ground truth from a shared start pose with
no further alignment: dead reckoning is judged on drift, and trajectory
fitting would hide exactly the heading error we want to see. All errors
are horizontal, and every metric is derived from one ErrorSeries so the
CDF, percentiles, and distance-marked errors always agree with each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AlignmentError,
    EmptyInputError,
    InvalidInputError,
    OutOfRangeError,
)
from .strapdown import StateTrack
from .windows import Pose2D


@dataclass(frozen=True)
class ErrorSeries:
    """Horizontal position error per matched timestamp, alongside the
    cumulative ground-truth distance walked up to that timestamp."""

    errors: np.ndarray
    distance: np.ndarray

    def __post_init__(self):
        errors = np.asarray(self.errors, dtype=float)
        distance = np.asarray(self.distance, dtype=float)
        object.__setattr__(self, "errors", errors)
        object.__setattr__(self, "distance", distance)
        if errors.ndim != 1 or errors.shape != distance.shape:
            raise InvalidInputError(
                "errors and distance must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(errors)) and np.all(np.isfinite(distance))):
            raise InvalidInputError("error series contains non-finite values")
        if np.any(errors < 0):
            raise InvalidInputError("errors must be non-negative")
        if np.any(np.diff(distance) < 0):
            raise InvalidInputError("cumulative distance must be non-decreasing")

    def __len__(self) -> int:
        return self.errors.shape[0]


def truth_distance(truth: StateTrack) -> np.ndarray:
    """Cumulative horizontal path length at each truth timestamp."""
    steps = np.linalg.norm(np.diff(truth.pos[:, :2], axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def position_errors(times: np.ndarray, poses: Sequence[Pose2D],
                    truth: StateTrack) -> ErrorSeries:
    """Match each estimate to the nearest truth sample (within half a
    period) and record its planar error. Unmatchable estimates are
    dropped; no overlap at all is an alignment failure."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) != len(poses):
        raise InvalidInputError("times and poses must align one to one")
    if len(truth.t) < 2:
        raise InvalidInputError("truth track too short to evaluate against")
    dt = float(truth.t[1] - truth.t[0])
    if np.max(np.abs(np.diff(truth.t) - dt)) > 1e-9:
        raise InvalidInputError("truth track must be uniformly sampled")
    cumdist = truth_distance(truth)
    idx = np.rint((times - truth.t[0]) / dt).astype(int)
    ok = (idx >= 0) & (idx < len(truth.t))
    ok[ok] &= np.abs(truth.t[idx[ok]] - times[ok]) <= dt / 2 + 1e-9
    if not np.any(ok):
        raise AlignmentError("estimate and truth timestamps do not overlap")
    matched = idx[ok]
    est_xy = np.array([(p.x, p.y) for p, keep in zip(poses, ok) if keep])
    errors = np.linalg.norm(est_xy - truth.pos[matched, :2], axis=1)
    return ErrorSeries(errors=errors, distance=cumdist[matched])


def resample_hold(times: np.ndarray, poses: Sequence[Pose2D],
                  grid: np.ndarray) -> list[Pose2D]:
    """Zero-order hold: the pose at each grid time is the last pose at or
    before it. Lets trackers with different output rates (per-sample,
    per-step, per-window) be compared at common timestamps; a tracker that
    stops emitting poses keeps paying for the distance truth walks on."""
    times = np.asarray(times, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if times.ndim != 1 or len(times) != len(poses) or len(times) == 0:
        raise InvalidInputError("need one timestamp per pose")
    if np.any(np.diff(times) < 0):
        raise InvalidInputError("pose timestamps must be ascending")
    if np.any(grid < times[0] - 1e-9):
        raise OutOfRangeError("grid extends before the first pose")
    idx = np.searchsorted(times, grid + 1e-9, side="right") - 1
    return [poses[k] for k in np.clip(idx, 0, len(poses) - 1)]


def percentile_error(series: ErrorSeries, fraction: float = 0.9) -> float:
    """Smallest error bound that covers at least the given fraction of
    timestamps (empirical quantile, lower interpolation)."""
    if not 0.0 < fraction <= 1.0:
        raise OutOfRangeError(f"fraction must be in (0, 1], got {fraction}")
    if len(series) == 0:
        raise EmptyInputError("cannot take a percentile of an empty series")
    count = math.ceil(fraction * len(series) - 1e-9)
    count = min(max(count, 1), len(series))
    return float(np.sort(series.errors)[count - 1])


def error_cdf(series: ErrorSeries,
              resolution: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF sampled every `resolution` meters, reaching 1.0."""
    if resolution <= 0:
        raise InvalidInputError("resolution must be > 0")
    if len(series) == 0:
        raise EmptyInputError("cannot build a CDF from an empty series")
    top = math.ceil(float(np.max(series.errors)) / resolution - 1e-9)
    levels = np.arange(top + 1) * resolution
    fractions = np.mean(series.errors[None, :] <= levels[:, None] + 1e-12,
                        axis=1)
    return levels, fractions


def error_at_distance(series: ErrorSeries, marks: Sequence[float]) -> list[float]:
    """Error at the first timestamp past each distance mark, with the
    endpoint error appended as the final entry."""
    if len(series) == 0:
        raise EmptyInputError("cannot mark distances on an empty series")
    total = float(series.distance[-1])
    out = []
    for mark in marks:
        if mark < 0 or mark > total + 1e-9:
            raise OutOfRangeError(
                f"distance mark {mark} m beyond travelled {total:.3f} m")
        k = int(np.searchsorted(series.distance, mark - 1e-9))
        out.append(float(series.errors[k]))
    out.append(float(series.errors[-1]))
    return out
