"""File formats: IMU/truth CSV streams and JSON profile/noise configs.

CSV columns are fixed:

    imu:        t,ax,ay,az,wx,wy,wz
    truth:      t,x,y,z,vx,vy,vz,c11,c12,c13,c21,c22,c23,c31,c32,c33
    trajectory: t,x,y,psi

with the attitude matrix row-major. Floats are written with %.17g, which
round-trips float64 exactly. Config files are JSON objects whose keys mirror
the dataclass fields; unknown keys are rejected rather than ignored so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import CorruptFileError
from .simulate import MotionProfile, NoiseModel
from .strapdown import ImuSequence, StateTrack
from .windows import Pose2D

IMU_HEADER = "t,ax,ay,az,wx,wy,wz"
TRUTH_HEADER = "t,x,y,z,vx,vy,vz,c11,c12,c13,c21,c22,c23,c31,c32,c33"
TRAJECTORY_HEADER = "t,x,y,psi"


def _load_rows(path, header: str, ncols: int) -> np.ndarray:
    path = Path(path)
    try:
        with open(path) as f:
            first = f.readline().strip()
            if first != header:
                raise CorruptFileError(
                    f"{path}: expected header {header!r}, got {first!r}")
            try:
                data = np.loadtxt(f, delimiter=",", ndmin=2)
            except ValueError as e:
                raise CorruptFileError(f"{path}: {e}") from e
    except OSError as e:
        raise CorruptFileError(f"cannot read {path}: {e}") from e
    if data.size == 0:
        data = data.reshape(0, ncols)
    if data.shape[1] != ncols:
        raise CorruptFileError(
            f"{path}: expected {ncols} columns, got {data.shape[1]}")
    if not np.all(np.isfinite(data)):
        raise CorruptFileError(f"{path}: non-finite values")
    return data


def write_imu_csv(path, samples: ImuSequence) -> None:
    body = np.column_stack([samples.t, samples.acc, samples.gyro])
    np.savetxt(path, body, fmt="%.17g", delimiter=",",
               header=IMU_HEADER, comments="")


def read_imu_csv(path) -> ImuSequence:
    data = _load_rows(path, IMU_HEADER, 7)
    return ImuSequence(data[:, 0], data[:, 1:4], data[:, 4:7])


def write_truth_csv(path, truth: StateTrack) -> None:
    body = np.column_stack([truth.t, truth.pos, truth.v,
                            truth.C.reshape(len(truth), 9)])
    np.savetxt(path, body, fmt="%.17g", delimiter=",",
               header=TRUTH_HEADER, comments="")


def read_truth_csv(path) -> StateTrack:
    data = _load_rows(path, TRUTH_HEADER, 16)
    return StateTrack(t=data[:, 0], pos=data[:, 1:4], v=data[:, 4:7],
                      C=data[:, 7:16].reshape(-1, 3, 3))


def write_trajectory_csv(path, times, poses) -> None:
    body = np.array([(t, p.x, p.y, p.psi) for t, p in zip(times, poses)])
    if body.size == 0:
        body = body.reshape(0, 4)
    np.savetxt(path, body, fmt="%.17g", delimiter=",",
               header=TRAJECTORY_HEADER, comments="")


def read_trajectory_csv(path) -> tuple[np.ndarray, list[Pose2D]]:
    data = _load_rows(path, TRAJECTORY_HEADER, 4)
    poses = [Pose2D(x, y, psi) for x, y, psi in data[:, 1:]]
    return data[:, 0], poses


def export_dataset(truth: StateTrack, samples: ImuSequence, out_dir) -> tuple[Path, Path]:
    """Write truth.csv and imu.csv under out_dir; returns the two paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    truth_path = out_dir / "truth.csv"
    imu_path = out_dir / "imu.csv"
    write_truth_csv(truth_path, truth)
    write_imu_csv(imu_path, samples)
    return truth_path, imu_path


def _load_json_object(path) -> dict:
    path = Path(path)
    try:
        with open(path) as f:
            obj = json.load(f)
    except OSError as e:
        raise CorruptFileError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise CorruptFileError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise CorruptFileError(f"{path}: expected a JSON object")
    return obj


def _check_keys(obj: dict, allowed: set[str], required: set[str], path) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise CorruptFileError(f"{path}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise CorruptFileError(f"{path}: missing keys {sorted(missing)}")


def _pairs(value, path, key) -> tuple[tuple[float, float], ...]:
    try:
        return tuple((float(a), float(b)) for a, b in value)
    except (TypeError, ValueError) as e:
        raise CorruptFileError(f"{path}: {key} must be [time, value] pairs") from e


def load_profile(path) -> MotionProfile:
    obj = _load_json_object(path)
    allowed = {"kind", "duration", "rate", "speed_range", "step_freq",
               "turn_schedule", "speed_schedule", "start_heading"}
    _check_keys(obj, allowed, {"kind", "duration"}, path)
    kwargs: dict = {"kind": obj["kind"], "duration": float(obj["duration"])}
    if "rate" in obj:
        kwargs["rate"] = float(obj["rate"])
    if "speed_range" in obj:
        lo, hi = obj["speed_range"]
        kwargs["speed_range"] = (float(lo), float(hi))
    if "step_freq" in obj:
        kwargs["step_freq"] = float(obj["step_freq"])
    if "turn_schedule" in obj:
        kwargs["turn_schedule"] = _pairs(obj["turn_schedule"], path, "turn_schedule")
    if "speed_schedule" in obj:
        kwargs["speed_schedule"] = _pairs(obj["speed_schedule"], path, "speed_schedule")
    if "start_heading" in obj:
        kwargs["start_heading"] = float(obj["start_heading"])
    return MotionProfile(**kwargs)


def load_noise(path) -> NoiseModel:
    obj = _load_json_object(path)
    vec_keys = {"accel_bias", "accel_walk", "accel_white", "accel_scale",
                "gyro_bias", "gyro_walk", "gyro_white", "gyro_scale",
                "misalign"}
    _check_keys(obj, vec_keys | {"seed"}, set(), path)
    kwargs: dict = {}
    for key in vec_keys & set(obj):
        val = obj[key]
        if not (isinstance(val, (list, tuple)) and len(val) == 3):
            raise CorruptFileError(f"{path}: {key} must be a 3-vector")
        kwargs[key] = np.asarray(val, dtype=float)
    if "seed" in obj:
        kwargs["seed"] = int(obj["seed"])
    return NoiseModel(**kwargs)


def save_profile(path, profile: MotionProfile) -> None:
    obj = {
        "kind": profile.kind,
        "duration": profile.duration,
        "rate": profile.rate,
        "speed_range": list(profile.speed_range),
        "step_freq": profile.step_freq,
        "turn_schedule": [list(p) for p in profile.turn_schedule],
        "speed_schedule": [list(p) for p in profile.speed_schedule],
        "start_heading": profile.start_heading,
    }
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def save_noise(path, model: NoiseModel) -> None:
    obj = {name: list(getattr(model, name)) for name in
           ("accel_bias", "accel_walk", "accel_white", "accel_scale",
            "gyro_bias", "gyro_walk", "gyro_white", "gyro_scale", "misalign")}
    obj["seed"] = model.seed
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
