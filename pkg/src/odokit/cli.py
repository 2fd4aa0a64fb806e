"""Batch command line: simulate | train | track | eval.

Each subcommand reads an optional JSON config (--config) whose keys mirror
the flag names; flags override the file. Output locations resolve from
--out, then the config, then the ODOKIT_OUT_DIR environment variable.
Every run writes a manifest capturing input hashes and seeds, so results
are attributable and reruns are verifiable.

Exit codes: 0 success, 2 configuration (bad values, unknown keys, model or
format contract mismatches), 3 data (missing or corrupt files, alignment
or rate failures), 4 numeric overflow, 5 training divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from .dataio import (
    export_dataset,
    load_noise,
    load_profile,
    read_imu_csv,
    read_trajectory_csv,
    read_truth_csv,
    write_trajectory_csv,
)
from .errors import (
    AliasingError,
    AlignmentError,
    CorruptFileError,
    DegenerateHeadingError,
    DegenerateInputError,
    EmptyInputError,
    InsufficientDataError,
    InvalidInputError,
    ModelContractError,
    NumericOverflowError,
    OutOfRangeError,
    TrainingDivergedError,
    UnsupportedRateError,
    VersionMismatchError,
)
from .metrics import (
    error_at_distance,
    error_cdf,
    percentile_error,
    position_errors,
    resample_hold,
)
from .network import load_params, save_params
from .pdr import PdrConfig, detect_steps, pdr_track
from .simulate import make_dataset, with_seed
from .strapdown import DEFAULT_GRAVITY, integrate_track
from .training import (
    TrainingConfig,
    concat_datasets,
    make_labeled_dataset,
    predict_track,
    prediction_times,
    train,
)
from .windows import WINDOW_STRIDE, Pose2D
from .rotations import yaw_of

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_TRAINING = 5

OUT_DIR_ENV = "ODOKIT_OUT_DIR"

TRACKERS = ("sins", "pdr", "ionet")
MODES = ("dense", "non-overlapping")
# a pedestrian takes roughly two steps per second; far fewer detected
# steps than walking time means the detector had nothing to work with
LOW_STEP_RATE = 0.2

CONFIG_ERRORS = (InvalidInputError, OutOfRangeError, ModelContractError,
                 VersionMismatchError)
DATA_ERRORS = (CorruptFileError, AlignmentError, InsufficientDataError,
               EmptyInputError, UnsupportedRateError, AliasingError,
               DegenerateInputError, DegenerateHeadingError, OSError)

_KEYS = {
    "simulate": {"profile", "noise", "seed", "out_dir"},
    "train": {"data", "resume", "epochs", "batch_size", "learning_rate",
              "dropout_rate", "kappa", "seed", "stride", "window_len",
              "hidden", "val_fraction", "out_dir"},
    "track": {"data", "tracker", "weights", "mode", "stride",
              "step_coefficient", "out_dir"},
    "eval": {"truth", "est", "marks", "resolution", "grid_hz", "seed",
             "out_dir"},
}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise CliError(f"cannot read config {path}: {e}", EXIT_DATA) from e
    except json.JSONDecodeError as e:
        raise CliError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise CliError(f"config {path} must hold a JSON object")
    return doc


def _effective_config(command: str, args: argparse.Namespace) -> dict:
    cfg = _load_config_file(args.config)
    unknown = set(cfg) - _KEYS[command]
    if unknown:
        raise CliError(
            f"config has unknown keys for {command}: {sorted(unknown)}")
    for key in _KEYS[command]:
        value = getattr(args, key, None)
        if value is not None:
            if key == "est":
                merged = dict(cfg.get("est") or {})
                merged.update(_parse_est(value))
                cfg["est"] = merged
            else:
                cfg[key] = value
    return cfg


def _parse_est(entries) -> dict:
    out = {}
    for entry in entries:
        name, sep, path = entry.partition("=")
        if not sep or not name or not path:
            raise CliError(f"--est expects name=path, got {entry!r}")
        out[name] = path
    return out


def _out_dir(cfg: dict) -> Path:
    out = cfg.get("out_dir") or os.environ.get(OUT_DIR_ENV)
    if not out:
        raise CliError(
            f"no output directory: pass --out, set out_dir in the config, "
            f"or set {OUT_DIR_ENV}")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require(cfg: dict, key: str, flag: str):
    value = cfg.get(key)
    if value is None:
        raise CliError(f"missing required setting {key!r} (flag {flag})")
    return value


def _write_manifest(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _track_poses(truth) -> tuple[np.ndarray, list[Pose2D]]:
    yaw = np.arctan2(truth.C[:, 1, 0], truth.C[:, 0, 0])
    poses = [Pose2D(x, y, psi)
             for (x, y), psi in zip(truth.pos[:, :2], yaw)]
    return truth.t, poses


def cmd_simulate(cfg: dict) -> int:
    profile_path = _require(cfg, "profile", "--profile")
    seed = int(cfg.get("seed", 0))
    out = _out_dir(cfg)
    profile = load_profile(profile_path)
    noise = None
    if cfg.get("noise"):
        noise = with_seed(load_noise(cfg["noise"]), seed)
    truth, samples = make_dataset(profile, noise, seed)
    truth_path, imu_path = export_dataset(truth, samples, out)
    manifest = {
        "command": "simulate",
        "seed": seed,
        "config_sha256": _config_hash(cfg),
        "inputs": {
            "profile": _sha256(profile_path),
            "noise": _sha256(cfg["noise"]) if cfg.get("noise") else None,
        },
        "outputs": {
            "imu.csv": _sha256(imu_path),
            "truth.csv": _sha256(truth_path),
        },
        "rows": {"imu": len(samples), "truth": len(truth)},
    }
    _write_manifest(out / "manifest.json", manifest)
    print(f"simulate: wrote {len(samples)} samples to {out}")
    return EXIT_OK


def _dataset_pairs(root: Path) -> list[tuple[Path, Path]]:
    if not root.exists():
        raise CliError(f"dataset directory {root} does not exist", EXIT_DATA)
    pairs = []
    for imu_path in sorted(root.glob("**/imu.csv")):
        truth_path = imu_path.with_name("truth.csv")
        if not truth_path.exists():
            raise CliError(f"{imu_path} has no matching {truth_path.name}",
                           EXIT_DATA)
        pairs.append((truth_path, imu_path))
    if not pairs:
        raise CliError(f"no imu.csv/truth.csv pairs under {root}", EXIT_DATA)
    return pairs


def _read_history(path: Path) -> list[tuple[int, float, float]]:
    rows = []
    with open(path) as f:
        if f.readline().strip() != "epoch,train_loss,val_loss":
            raise CorruptFileError(f"{path}: not a loss history file")
        for line in f:
            epoch, tl, vl = line.strip().split(",")
            rows.append((int(epoch), float(tl), float(vl)))
    return rows


def _write_history(path: Path, rows) -> None:
    with open(path, "w") as f:
        f.write("epoch,train_loss,val_loss\n")
        for epoch, tl, vl in rows:
            f.write(f"{epoch},{tl:.17g},{vl:.17g}\n")


def cmd_train(cfg: dict) -> int:
    data_dir = Path(_require(cfg, "data", "--data"))
    out = _out_dir(cfg)
    stride = int(cfg.get("stride", WINDOW_STRIDE))
    window_len = int(cfg.get("window_len", 200))
    pairs = _dataset_pairs(data_dir)
    parts = []
    for truth_path, imu_path in pairs:
        truth = read_truth_csv(truth_path)
        stream = read_imu_csv(imu_path)
        parts.append(make_labeled_dataset(truth, stream, n=window_len,
                                          stride=stride))
    dataset = concat_datasets(parts)

    fields = {}
    for key in ("learning_rate", "dropout_rate", "kappa", "val_fraction"):
        if cfg.get(key) is not None:
            fields[key] = float(cfg[key])
    for key, dest in (("epochs", "epochs"), ("batch_size", "batch_size"),
                      ("seed", "rng_seed"), ("hidden", "hidden")):
        if cfg.get(key) is not None:
            fields[dest] = int(cfg[key])
    config = TrainingConfig(**fields)

    init = None
    if cfg.get("resume"):
        init = load_params(cfg["resume"])
    params, history = train(dataset, config, init=init)

    history_path = out / "loss_history.csv"
    rows = history
    if init is not None and history_path.exists():
        # renumber so the curve continues the previous run's epoch count
        old = _read_history(history_path)
        offset = old[-1][0]
        rows = old + [(epoch + offset, tl, vl)
                      for epoch, tl, vl in history if epoch >= 1]
    _write_history(history_path, rows)
    weights_path = out / "weights.json"
    save_params(weights_path, params)

    manifest = {
        "command": "train",
        "seed": config.rng_seed,
        "config_sha256": _config_hash(cfg),
        "windows": len(dataset),
        "window_len": window_len,
        "stride": stride,
        "training": {
            "learning_rate": config.learning_rate,
            "dropout_rate": config.dropout_rate,
            "kappa": config.kappa,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "val_fraction": config.val_fraction,
            "hidden": config.hidden,
        },
        "inputs": {str(p): _sha256(p) for pair in pairs for p in pair},
        "resume": _sha256(cfg["resume"]) if cfg.get("resume") else None,
        "outputs": {
            "weights.json": _sha256(weights_path),
            "loss_history.csv": _sha256(history_path),
        },
    }
    _write_manifest(out / "manifest_train.json", manifest)
    best_val = min(row[2] for row in history)
    print(f"train: {len(dataset)} windows, {config.epochs} epochs, "
          f"best validation loss {best_val:.6g}; weights at {weights_path}")
    return EXIT_OK


def cmd_track(cfg: dict) -> int:
    data_dir = Path(_require(cfg, "data", "--data"))
    tracker = _require(cfg, "tracker", "--tracker")
    if tracker not in TRACKERS:
        raise CliError(f"unknown tracker {tracker!r}; choose from {TRACKERS}")
    out = _out_dir(cfg)
    stream = read_imu_csv(data_dir / "imu.csv")
    truth = read_truth_csv(data_dir / "truth.csv")
    start = Pose2D(truth.pos[0, 0], truth.pos[0, 1], yaw_of(truth.C[0]))
    weights_hash = None

    if tracker == "sins":
        track = integrate_track(stream, truth.state(0), DEFAULT_GRAVITY)
        times, poses = _track_poses(track)
        times = np.concatenate([[truth.t[0]], times])
        poses = [start] + poses
    elif tracker == "pdr":
        pdr_cfg = PdrConfig(**(
            {"step_coefficient": float(cfg["step_coefficient"])}
            if cfg.get("step_coefficient") is not None else {}))
        events = detect_steps(stream, pdr_cfg)
        duration = float(stream.t[-1] - stream.t[0])
        if len(events) < LOW_STEP_RATE * duration:
            print(f"warning: only {len(events)} steps detected over "
                  f"{duration:.0f} s; step tracking is unreliable on this "
                  f"stream", file=sys.stderr)
        poses = pdr_track(stream, start, pdr_cfg)
        times = np.concatenate([[stream.t[0]],
                                stream.t[[e.index for e in events]]])
    else:
        weights = cfg.get("weights")
        if not weights:
            raise CliError("tracker ionet needs --weights")
        params = load_params(weights)
        weights_hash = _sha256(weights)
        mode = cfg.get("mode", "dense")
        if mode not in MODES:
            raise CliError(f"unknown mode {mode!r}; choose from {MODES}")
        stride = int(cfg.get("stride", WINDOW_STRIDE))
        poses = [start] + predict_track(params, stream, start, mode=mode,
                                        stride=stride)
        times = np.concatenate([[stream.t[0]],
                                prediction_times(stream, params.window_len,
                                                 mode=mode, stride=stride)])

    track_path = out / f"{tracker}_track.csv"
    write_trajectory_csv(track_path, times, poses)
    manifest = {
        "command": "track",
        "tracker": tracker,
        "config_sha256": _config_hash(cfg),
        "inputs": {
            "imu.csv": _sha256(data_dir / "imu.csv"),
            "truth.csv": _sha256(data_dir / "truth.csv"),
            "weights": weights_hash,
        },
        "outputs": {track_path.name: _sha256(track_path)},
        "poses": len(poses),
    }
    _write_manifest(out / f"manifest_track_{tracker}.json", manifest)
    print(f"track: {tracker} wrote {len(poses)} poses to {track_path}")
    return EXIT_OK


def cmd_eval(cfg: dict) -> int:
    truth_path = _require(cfg, "truth", "--truth")
    est = cfg.get("est") or {}
    if not est:
        raise CliError("nothing to evaluate: pass --est name=path")
    out = _out_dir(cfg)
    marks = [float(m) for m in cfg.get("marks", (50.0, 100.0))]
    resolution = float(cfg.get("resolution", 0.1))
    grid_hz = cfg.get("grid_hz")
    truth = read_truth_csv(truth_path)

    report = {
        "provenance": {
            "config_sha256": _config_hash(cfg),
            "seed": cfg.get("seed"),
            "truth": _sha256(truth_path),
            "estimates": {name: _sha256(path) for name, path in
                          sorted(est.items())},
            "marks": marks,
            "resolution": resolution,
            "grid_hz": grid_hz,
        },
        "trackers": {},
    }
    for name in sorted(est):
        times, poses = read_trajectory_csv(est[name])
        if grid_hz:
            step = 1.0 / float(grid_hz)
            count = int(np.floor((truth.t[-1] - times[0]) / step)) + 1
            grid = times[0] + np.arange(count) * step
            poses = resample_hold(times, poses, grid)
            times = grid
        series = position_errors(times, poses, truth)
        total = float(series.distance[-1])
        used = [m for m in marks if m <= total + 1e-9]
        skipped = [m for m in marks if m > total + 1e-9]
        at_marks = error_at_distance(series, used)
        levels, fractions = error_cdf(series, resolution)
        report["trackers"][name] = {
            "matched": len(series),
            "travelled": total,
            "p50": percentile_error(series, 0.5),
            "p90": percentile_error(series, 0.9),
            "marks": used,
            "skipped_marks": skipped,
            "errors_at_marks": at_marks[:-1],
            "endpoint_error": at_marks[-1],
            "cdf": [[float(l), float(f)] for l, f in zip(levels, fractions)],
        }
        print(f"eval: {name} p90={report['trackers'][name]['p90']:.4g} m "
              f"endpoint={at_marks[-1]:.4g} m over {total:.1f} m")

    report_path = out / "report.json"
    report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    print(f"eval: report at {report_path}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odokit",
        description="inertial odometry pipeline: simulate, train, track, eval")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="synthesize a dataset")
    sim.add_argument("--config")
    sim.add_argument("--profile", help="motion profile JSON")
    sim.add_argument("--noise", help="noise model JSON")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", dest="out_dir")

    tr = sub.add_parser("train", help="train the window regressor")
    tr.add_argument("--config")
    tr.add_argument("--data", help="directory with imu.csv/truth.csv pairs")
    tr.add_argument("--resume", help="weights file to continue from")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--batch-size", dest="batch_size", type=int)
    tr.add_argument("--lr", dest="learning_rate", type=float)
    tr.add_argument("--dropout", dest="dropout_rate", type=float)
    tr.add_argument("--kappa", type=float)
    tr.add_argument("--val-fraction", dest="val_fraction", type=float)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--stride", type=int)
    tr.add_argument("--window-len", dest="window_len", type=int)
    tr.add_argument("--hidden", type=int)
    tr.add_argument("--out", dest="out_dir")

    tk = sub.add_parser("track", help="run a tracker over a dataset")
    tk.add_argument("--config")
    tk.add_argument("--data", help="directory with imu.csv and truth.csv")
    tk.add_argument("--tracker", choices=TRACKERS)
    tk.add_argument("--weights")
    tk.add_argument("--mode", choices=MODES)
    tk.add_argument("--stride", type=int)
    tk.add_argument("--step-coefficient", dest="step_coefficient", type=float)
    tk.add_argument("--out", dest="out_dir")

    ev = sub.add_parser("eval", help="score trajectories against truth")
    ev.add_argument("--config")
    ev.add_argument("--truth")
    ev.add_argument("--est", action="append",
                    help="name=path, repeatable")
    ev.add_argument("--marks", help="comma-separated distance marks in m")
    ev.add_argument("--resolution", type=float)
    ev.add_argument("--grid-hz", dest="grid_hz", type=float)
    ev.add_argument("--seed", type=int)
    ev.add_argument("--out", dest="out_dir")
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "track": cmd_track,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = _effective_config(args.command, args)
        if args.command == "eval" and isinstance(cfg.get("marks"), str):
            cfg["marks"] = [float(m) for m in cfg["marks"].split(",") if m]
        return _COMMANDS[args.command](cfg)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except TrainingDivergedError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_TRAINING
    except NumericOverflowError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except CONFIG_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DATA_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
