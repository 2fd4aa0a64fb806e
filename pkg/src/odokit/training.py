"""Training loop, labeled datasets, and trajectory prediction.

Everything is deterministic given TrainingConfig.rng_seed: initialization,
the train/validation split (contiguous, validation taken from the tail),
epoch shuffles and dropout masks all derive from it. Normalization
statistics come from the training split only and travel with the returned
parameters, so a saved model is self-contained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    InsufficientDataError,
    InvalidInputError,
    ModelContractError,
    TrainingDivergedError,
)
from .network import (
    ModelParams,
    adam_init,
    adam_update,
    backward_batch,
    forward_batch,
    init_params,
    loss_batch,
    windows_to_batch,
)
from .rotations import wrap_angle
from .strapdown import ImuSequence, StateTrack
from .windows import (
    WINDOW_STRIDE,
    PolarDelta,
    Pose2D,
    Window,
    chain,
    label_windows,
    segment,
)

PREDICT_CHUNK = 256


@dataclass(frozen=True)
class TrainingConfig:
    """Optimizer and loop settings; defaults follow the reference recipe."""

    learning_rate: float = 0.0015
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    kappa: float = 1.0
    dropout_rate: float = 0.25
    epochs: int = 100
    batch_size: int = 32
    rng_seed: int = 0
    val_fraction: float = 0.1
    hidden: int = 96

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be > 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidInputError("dropout_rate must be in [0, 1)")
        if self.kappa < 0:
            raise InvalidInputError("kappa must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidInputError("epochs and batch_size must be >= 1")
        if not 0.0 < self.val_fraction < 0.5:
            raise InvalidInputError("val_fraction must be in (0, 0.5)")


@dataclass(frozen=True)
class LabeledDataset:
    """Stacked (window, label) pairs plus optional normalization stats.

    x is (N, n, 6) with channels [acc | gyro]; y is (N, 2) = (dl, dpsi).
    Slicing returns a new dataset carrying the same statistics.
    """

    x: np.ndarray
    y: np.ndarray
    dt: float
    input_mean: np.ndarray | None = None
    input_scale: np.ndarray | None = None

    def __post_init__(self):
        if self.x.ndim != 3 or self.x.shape[2] != 6:
            raise InvalidInputError("dataset x must be (N, n, 6)")
        if self.y.shape != (self.x.shape[0], 2):
            raise InvalidInputError("dataset y must be (N, 2)")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise InvalidInputError("dataset contains non-finite values")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def window_len(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        return replace(self, x=self.x[idx], y=self.y[idx])


def make_labeled_dataset(truth: StateTrack, stream: ImuSequence,
                         n: int = 200, stride: int = WINDOW_STRIDE) -> LabeledDataset:
    """Window a stream and label it against its (N+1)-pose truth track."""
    windows = segment(stream, n=n, stride=stride)
    labels = label_windows(truth, windows)
    return LabeledDataset(x=windows_to_batch(windows),
                          y=np.array(labels, dtype=float), dt=windows[0].dt)


def concat_datasets(parts: Sequence[LabeledDataset]) -> LabeledDataset:
    if not parts:
        raise EmptyInputError("no datasets to concatenate")
    n = parts[0].window_len
    if any(p.window_len != n for p in parts):
        raise InvalidInputError("datasets have differing window lengths")
    if any(abs(p.dt - parts[0].dt) > 1e-9 for p in parts):
        raise InvalidInputError("datasets have differing sample spacing")
    return LabeledDataset(x=np.concatenate([p.x for p in parts]),
                          y=np.concatenate([p.y for p in parts]),
                          dt=parts[0].dt)


def normalization_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and scale over all samples of all windows."""
    flat = x.reshape(-1, x.shape[2])
    mean = flat.mean(axis=0)
    scale = np.maximum(flat.std(axis=0), 1e-8)
    return mean, scale


def gradients(params: ModelParams, batch: LabeledDataset,
              config: TrainingConfig, mask_seed: int | None = None) -> dict:
    """Exact gradient of the mean batch loss for every tensor.

    Dropout masks are pinned by mask_seed; omit it (with dropout_rate 0)
    for gradient checking.
    """
    if len(batch) == 0:
        raise EmptyInputError("gradient batch is empty")
    pred, cache = forward_batch(params, batch.x,
                                dropout_rate=config.dropout_rate,
                                mask_seed=mask_seed, want_cache=True)
    _, dpred = loss_batch(pred, batch.y, config.kappa)
    return backward_batch(params, cache, dpred)


def batch_loss(params: ModelParams, batch: LabeledDataset,
               config: TrainingConfig) -> float:
    pred = forward_batch(params, batch.x)
    value, _ = loss_batch(pred, batch.y, config.kappa)
    return value


def _eval_loss(params: ModelParams, ds: LabeledDataset,
               config: TrainingConfig) -> float:
    total = 0.0
    for lo in range(0, len(ds), PREDICT_CHUNK):
        part = ds.subset(slice(lo, lo + PREDICT_CHUNK))
        pred = forward_batch(params, part.x)
        dl_err = pred[:, 0] - part.y[:, 0]
        psi_err = wrap_angle(pred[:, 1] - part.y[:, 1])
        total += float(np.sum(dl_err ** 2 + config.kappa * psi_err ** 2))
    return total / len(ds)


def split_dataset(dataset: LabeledDataset,
                  val_fraction: float) -> tuple[LabeledDataset, LabeledDataset]:
    """Contiguous split: validation comes from the tail, so overlapping
    training windows never leak into it."""
    n = len(dataset)
    n_val = max(1, int(round(val_fraction * n)))
    if n - n_val < 1:
        raise InsufficientDataError(
            f"{n} samples cannot support a {val_fraction:.0%} validation split")
    return dataset.subset(slice(0, n - n_val)), dataset.subset(slice(n - n_val, n))


def train(dataset: LabeledDataset, config: TrainingConfig,
          init: ModelParams | None = None):
    """Adam training with per-epoch shuffles and best-on-validation return.

    The loss history has one (epoch, train_loss, validation_loss) row per
    epoch, with row 0 evaluated before any update. Passing init resumes
    from existing parameters and keeps their normalization statistics.
    """
    train_ds, val_ds = split_dataset(dataset, config.val_fraction)
    if init is None:
        params = init_params(config.rng_seed, window_len=dataset.window_len,
                             hidden=config.hidden)
        mean, scale = normalization_stats(train_ds.x)
        params = replace(params, input_mean=mean, input_scale=scale)
    else:
        if init.window_len != dataset.window_len:
            raise InvalidInputError(
                f"resume params expect n={init.window_len}, "
                f"dataset has n={dataset.window_len}")
        params = init
    moments = adam_init(params)
    rng = np.random.default_rng(config.rng_seed)
    step = 0
    history = [(0, _eval_loss(params, train_ds, config),
                _eval_loss(params, val_ds, config))]
    best_params = params
    best_val = history[0][2]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_ds))
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            mask_seed = int(rng.integers(0, 2 ** 63)) \
                if config.dropout_rate > 0 else None
            grads = gradients(params, train_ds.subset(idx), config,
                              mask_seed=mask_seed)
            step += 1
            params, moments = adam_update(
                params, grads, moments, config.learning_rate, config.beta1,
                config.beta2, config.eps, step)
        train_loss = _eval_loss(params, train_ds, config)
        val_loss = _eval_loss(params, val_ds, config)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingDivergedError(epoch)
        history.append((epoch, train_loss, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_params = params
    return best_params, history


def predict_deltas(params: ModelParams, windows: Sequence[Window]) -> list[PolarDelta]:
    """Batched inference over a window list; dl raw, dpsi wrapped."""
    if not windows:
        return []
    x = windows_to_batch(windows)
    if x.shape[1] != params.window_len:
        raise ModelContractError(
            f"windows have {x.shape[1]} samples, model expects "
            f"{params.window_len}")
    out: list[PolarDelta] = []
    for lo in range(0, x.shape[0], PREDICT_CHUNK):
        pred = forward_batch(params, x[lo:lo + PREDICT_CHUNK])
        for dl, dpsi in pred:
            out.append(PolarDelta(float(dl), wrap_angle(float(dpsi))))
    return out


def predict_track(params: ModelParams, stream: ImuSequence, start: Pose2D,
                  mode: str = "dense", stride: int = WINDOW_STRIDE) -> list[Pose2D]:
    """Window the stream, regress a delta per window, chain into poses.

    non-overlapping mode steps whole windows (the evaluation reference);
    dense mode slides by `stride` and scales each prediction by stride/n so
    the pose rate rises to rate/stride without double-counting travel.
    """
    if mode == "non-overlapping":
        step = params.window_len
        scale = 1.0
    elif mode == "dense":
        step = stride
        scale = stride / params.window_len
    else:
        raise InvalidInputError(f"unknown mode {mode!r}")
    windows = segment(stream, n=params.window_len, stride=step)
    deltas = predict_deltas(params, windows)
    if scale != 1.0:
        deltas = [PolarDelta(d.dl * scale, wrap_angle(d.dpsi * scale))
                  for d in deltas]
    return chain(start, deltas)


def prediction_times(stream: ImuSequence, window_len: int, mode: str = "dense",
                     stride: int = WINDOW_STRIDE) -> np.ndarray:
    """Timestamp of each pose from predict_track: the end of its window."""
    step = window_len if mode == "non-overlapping" else stride
    n_windows = (len(stream) - window_len) // step + 1
    dt = stream.dt
    starts = np.arange(n_windows) * step
    return stream.t[0] + (starts + window_len) * dt
