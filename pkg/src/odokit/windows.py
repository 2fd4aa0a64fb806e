"""Windowed reformulation of strapdown integration.

Over a window of n samples, the displacement telescopes into

    dL = n v0 dt + C0 T dt^2 + n(n-1)/2 g dt^2
    T  = sum_{k=0}^{n-2} (n-1-k) [prod_{i<k} Omega(w_i dt)] a_k

which is algebraically identical to stepwise explicit-Euler integration, not
an approximation of it (the oracle tests hold to 1e-9 m). Because C0 enters
only through an orthogonal product, the travelled distance

    dl = || n v0_body dt + T dt^2 + n(n-1)/2 g0_body dt^2 ||

needs no navigation-frame attitude at all: it depends on the raw window plus
the initial velocity and gravity expressed in the body frame. Together with
the heading change dpsi this gives the polar delta (dl, dpsi) per window,
and poses are reconstructed by chaining

    psi <- wrap(psi + dpsi);  x <- x + dl cos(psi);  y <- y + dl sin(psi)

with the heading update applied before projecting, so global heading
persists across windows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    InsufficientDataError,
    InvalidInputError,
)
from .rotations import rodrigues_increment, wrap_angle, yaw_of
from .strapdown import DEFAULT_GRAVITY, STANDARD_GRAVITY, ImuSequence, StateTrack

WINDOW_LEN = 200
WINDOW_STRIDE = 10


class PolarDelta(NamedTuple):
    """Per-window motion in polar form: distance travelled, heading change.

    dl is non-negative for labels; dpsi is wrapped to (-pi, pi].
    """

    dl: float
    dpsi: float


class Pose2D(NamedTuple):
    """Planar pose; psi wrapped to (-pi, pi]."""

    x: float
    y: float
    psi: float


@dataclass(frozen=True)
class Window:
    """n consecutive IMU samples at fixed spacing dt."""

    acc: np.ndarray  # (n, 3)
    gyro: np.ndarray  # (n, 3)
    dt: float
    start: int = 0

    def __post_init__(self):
        acc = np.asarray(self.acc, dtype=float)
        gyro = np.asarray(self.gyro, dtype=float)
        if acc.ndim != 2 or acc.shape[1] != 3 or acc.shape != gyro.shape:
            raise InvalidInputError("window acc/gyro must be matching (n, 3)")
        if acc.shape[0] < 2:
            raise InvalidInputError("window needs n >= 2 samples")
        if not (np.all(np.isfinite(acc)) and np.all(np.isfinite(gyro))):
            raise InvalidInputError("window contains non-finite samples")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise InvalidInputError(f"dt must be > 0, got {self.dt}")
        object.__setattr__(self, "acc", acc)
        object.__setattr__(self, "gyro", gyro)

    @property
    def n(self) -> int:
        return self.acc.shape[0]


@dataclass(frozen=True)
class BodyInitState:
    """Window-start velocity and gravity, both in the body frame."""

    v0_body: np.ndarray
    g0_body: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v0_body, dtype=float)
        g = np.asarray(self.g0_body, dtype=float)
        if v.shape != (3,) or g.shape != (3,):
            raise InvalidInputError("BodyInitState fields must be 3-vectors")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(g))):
            raise InvalidInputError("BodyInitState fields must be finite")
        object.__setattr__(self, "v0_body", v)
        object.__setattr__(self, "g0_body", g)


def body_init_from_truth(truth: StateTrack, index: int,
                         g: np.ndarray = DEFAULT_GRAVITY) -> BodyInitState:
    """Express the truth state at `index` in its own body frame.

    Sanity-checks that the rotated gravity keeps its magnitude (within 2% of
    standard gravity), which catches a non-orthonormal or mis-scaled truth
    attitude early.
    """
    C = truth.C[index]
    init = BodyInitState(C.T @ truth.v[index], C.T @ np.asarray(g, float))
    norm = float(np.linalg.norm(init.g0_body))
    if abs(norm - STANDARD_GRAVITY) > 0.02 * STANDARD_GRAVITY:
        raise InvalidInputError(
            f"body-frame gravity norm {norm:.4f} m/s^2 is off by more than 2%")
    return init


def segment(stream: ImuSequence, n: int = WINDOW_LEN,
            stride: int = WINDOW_STRIDE) -> list[Window]:
    """Cut a uniform stream into overlapping windows.

    Windows start at 0, stride, 2*stride, ...; a tail shorter than n is
    dropped. The stream must be uniformly sampled (spacing constant to 1e-9).
    """
    if n < 2 or stride < 1:
        raise InvalidInputError("need n >= 2 and stride >= 1")
    m = len(stream)
    if m < n:
        raise InsufficientDataError(f"stream has {m} samples, window needs {n}")
    dt = stream.dt
    gaps = np.diff(stream.t)
    if np.any(np.abs(gaps - dt) > 1e-9):
        raise InvalidInputError("stream is not uniformly sampled")
    starts = range(0, m - n + 1, stride)
    return [Window(stream.acc[s:s + n], stream.gyro[s:s + n], dt, start=s)
            for s in starts]


def attitude_product(window: Window) -> np.ndarray:
    """Product of the window's n-1 attitude increments.

    Rotates the body frame at the first sample onto the body frame at the
    last sample; the final sample's gyro reading is not consumed (it would
    advance attitude past the window).
    """
    P = np.eye(3)
    for k in range(window.n - 1):
        P = P @ rodrigues_increment(window.gyro[k], window.dt)
    return P


def compute_T(window: Window) -> np.ndarray:
    """The window's accumulated specific-force term, body frame at start.

    T = sum_{k=0}^{n-2} (n-1-k) [prod_{i<k} Omega_i] a_k; sample n-1 gets
    coefficient 0 and is skipped.
    """
    n = window.n
    dt = window.dt
    T = np.zeros(3)
    P = np.eye(3)
    for k in range(n - 1):
        T += (n - 1 - k) * (P @ window.acc[k])
        P = P @ rodrigues_increment(window.gyro[k], dt)
    return T


def window_displacement(window: Window, v0: np.ndarray, C0: np.ndarray,
                        g: np.ndarray = DEFAULT_GRAVITY) -> np.ndarray:
    """Navigation-frame displacement over the window, closed form.

    Equals integrate_track's final-minus-initial position for the same
    initial state to floating-point precision.
    """
    n = window.n
    dt = window.dt
    v0 = np.asarray(v0, dtype=float)
    g = np.asarray(g, dtype=float)
    T = compute_T(window)
    return n * v0 * dt + (C0 @ T) * dt * dt + (n * (n - 1) / 2.0) * g * dt * dt


def horizontal_distance(window: Window, init: BodyInitState) -> float:
    """Distance travelled over the window, from body-frame quantities only.

    The attitude C0 would enter the displacement only through an orthogonal
    factor, so the norm survives dropping it entirely. Under the planar
    assumption (near-zero mean z motion per window) this is the horizontal
    travel.
    """
    n = window.n
    dt = window.dt
    T = compute_T(window)
    s = (n * init.v0_body * dt + T * dt * dt
         + (n * (n - 1) / 2.0) * init.g0_body * dt * dt)
    return float(np.linalg.norm(s))


def heading_change(window: Window, C_ref: np.ndarray | None = None) -> float:
    """Yaw swept between the window's first and last sample, wrapped.

    C_ref is the attitude at the window start: ground truth during labeling,
    a level default during diagnostics. Raises a degenerate-heading error
    when yaw is undefined at either end (pitch at +-90 degrees).
    """
    if C_ref is None:
        C_ref = np.eye(3)
    P = attitude_product(window)
    return wrap_angle(yaw_of(C_ref @ P) - yaw_of(C_ref))


def chain(start: Pose2D, deltas: Sequence[PolarDelta]) -> list[Pose2D]:
    """Accumulate polar deltas into planar poses, one pose per delta.

    The heading update precedes the projection: each window's travel is laid
    down along the post-update heading.
    """
    x, y, psi = float(start.x), float(start.y), float(start.psi)
    out: list[Pose2D] = []
    for d in deltas:
        dl, dpsi = float(d[0]), float(d[1])
        if not (np.isfinite(dl) and np.isfinite(dpsi)):
            raise InvalidInputError("polar deltas must be finite")
        psi = wrap_angle(psi + dpsi)
        x += dl * np.cos(psi)
        y += dl * np.sin(psi)
        out.append(Pose2D(x, y, psi))
    return out


def label_windows(truth: StateTrack, windows: Sequence[Window]) -> list[PolarDelta]:
    """Ground-truth polar deltas for the given windows.

    truth[i] must be the pose at the timestamp of stream sample i, plus one
    final pose after the last sample (N+1 poses for an N-sample stream), so
    a window covering samples [s, s+n) spans truth[s] to truth[s+n] and
    non-overlapping labels chain to the exact endpoints. dl is the
    horizontal (x, y) travel; dpsi is the wrapped attitude-yaw difference.
    """
    out: list[PolarDelta] = []
    for w in windows:
        lo, hi = w.start, w.start + w.n
        if lo < 0 or hi >= len(truth):
            raise AlignmentError(
                f"window [{lo},{hi}) needs truth pose {hi}, "
                f"but truth has {len(truth)} poses")
        if len(truth) > 1:
            truth_dt = float(truth.t[1] - truth.t[0])
            if abs(truth_dt - w.dt) > 1e-9:
                raise AlignmentError(
                    f"truth spacing {truth_dt} != window dt {w.dt}")
        d = truth.pos[hi] - truth.pos[lo]
        dl = float(np.hypot(d[0], d[1]))
        dpsi = wrap_angle(yaw_of(truth.C[hi]) - yaw_of(truth.C[lo]))
        out.append(PolarDelta(dl, dpsi))
    return out
