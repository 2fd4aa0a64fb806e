"""Two-layer bidirectional LSTM regressor, written on bare numpy.

Maps a normalized n x 6 inertial window to a polar displacement (dl, dpsi).
Both the forward pass and backpropagation through time live here, along
with Adam and the weight-file format; no autodiff framework is involved.
Gradients are exact analytic derivatives of the mean batch loss and are
held to a 1e-4 relative match against central finite differences by the
test suite.

Layout per layer and direction: a fused input projection wx (D_in, 4H),
recurrent projection wh (H, 4H) and bias b (4H,), gate order
input | forget | cell | output. Layer 1 consumes the 6 input channels,
layer 2 the 2H-wide concatenation of layer 1's directions. The head is a
linear map from the concatenated final hidden states of layer 2 (2H) to 2
outputs. Inverted dropout acts on layer 1's output sequence and on the
head input; never on recurrent connections, never at inference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    CorruptFileError,
    InvalidInputError,
    ModelContractError,
    NumericOverflowError,
    VersionMismatchError,
)
from .rotations import wrap_angle
from .windows import PolarDelta, Window

INPUT_DIM = 6
HIDDEN = 96
GATE_NAMES = ("input", "forget", "cell", "output")
WEIGHT_FORMAT = "odokit-weights"
WEIGHT_VERSION = 1


@dataclass(frozen=True)
class ModelParams:
    """Weights plus the preprocessing constants needed to use them.

    tensors maps "lstm{1,2}.{fw,bw}.{wx,wh,b}" and "head.{w,b}" to arrays.
    input_mean/input_scale are the per-channel statistics of the training
    split; model_forward applies them, so raw windows are always valid
    input.
    """

    window_len: int
    hidden: int
    input_mean: np.ndarray
    input_scale: np.ndarray
    tensors: dict


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


def init_params(seed: int, window_len: int = 200, hidden: int = HIDDEN) -> ModelParams:
    """Seeded uniform init, +1 forget bias, unit normalization stats."""
    rng = np.random.default_rng(seed)
    h = hidden
    tensors = {}
    for layer, d_in in (("lstm1", INPUT_DIM), ("lstm2", 2 * hidden)):
        for direction in ("fw", "bw"):
            key = f"{layer}.{direction}"
            tensors[f"{key}.wx"] = _uniform(rng, (d_in, 4 * h), d_in)
            tensors[f"{key}.wh"] = _uniform(rng, (h, 4 * h), h)
            b = np.zeros(4 * h)
            b[h:2 * h] = 1.0  # forget gate opens the cell path early on
            tensors[f"{key}.b"] = b
    tensors["head.w"] = _uniform(rng, (2 * hidden, 2), 2 * hidden)
    tensors["head.b"] = np.zeros(2)
    return ModelParams(window_len=window_len, hidden=hidden,
                       input_mean=np.zeros(INPUT_DIM),
                       input_scale=np.ones(INPUT_DIM), tensors=tensors)


def param_names(params: ModelParams) -> list[str]:
    return sorted(params.tensors)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _lstm_pass(seq: np.ndarray, wx: np.ndarray, wh: np.ndarray, b: np.ndarray):
    """One direction over (B, n, D) in processing order; returns outputs
    and the cache needed for the backward pass."""
    B, n, _ = seq.shape
    h_size = wh.shape[0]
    zx = (seq.reshape(B * n, -1) @ wx).reshape(B, n, 4 * h_size) + b
    h = np.zeros((B, h_size))
    c = np.zeros((B, h_size))
    gates = np.empty((B, n, 4 * h_size))
    cells = np.empty((B, n, h_size))
    hidden = np.empty((B, n, h_size))
    for t in range(n):
        z = zx[:, t] + h @ wh
        i = _sigmoid(z[:, :h_size])
        f = _sigmoid(z[:, h_size:2 * h_size])
        g = np.tanh(z[:, 2 * h_size:3 * h_size])
        o = _sigmoid(z[:, 3 * h_size:])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[:, t, :h_size] = i
        gates[:, t, h_size:2 * h_size] = f
        gates[:, t, 2 * h_size:3 * h_size] = g
        gates[:, t, 3 * h_size:] = o
        cells[:, t] = c
        hidden[:, t] = h
    return hidden, (seq, gates, cells, hidden)


def _lstm_pass_backward(dh_seq: np.ndarray, cache, wx: np.ndarray,
                        wh: np.ndarray):
    """BPTT for one direction. dh_seq is the gradient w.r.t. the per-step
    outputs in processing order. Returns (dwx, dwh, db, dseq)."""
    seq, gates, cells, hidden = cache
    B, n, _ = seq.shape
    h_size = wh.shape[0]
    i = gates[..., :h_size]
    f = gates[..., h_size:2 * h_size]
    g = gates[..., 2 * h_size:3 * h_size]
    o = gates[..., 3 * h_size:]
    dz_seq = np.empty((B, n, 4 * h_size))
    dh = np.zeros((B, h_size))
    dc = np.zeros((B, h_size))
    for t in range(n - 1, -1, -1):
        dh = dh + dh_seq[:, t]
        tc = np.tanh(cells[:, t])
        do = dh * tc
        dc = dc + dh * o[:, t] * (1.0 - tc * tc)
        c_prev = cells[:, t - 1] if t > 0 else 0.0
        di = dc * g[:, t]
        dg = dc * i[:, t]
        df = dc * c_prev
        dz = dz_seq[:, t]
        dz[:, :h_size] = di * i[:, t] * (1.0 - i[:, t])
        dz[:, h_size:2 * h_size] = df * f[:, t] * (1.0 - f[:, t])
        dz[:, 2 * h_size:3 * h_size] = dg * (1.0 - g[:, t] * g[:, t])
        dz[:, 3 * h_size:] = do * o[:, t] * (1.0 - o[:, t])
        dh = dz @ wh.T
        dc = dc * f[:, t]
    h_prev = np.concatenate([np.zeros((B, 1, h_size)), hidden[:, :-1]], axis=1)
    dwx = seq.reshape(B * n, -1).T @ dz_seq.reshape(B * n, -1)
    dwh = np.einsum("bth,btk->hk", h_prev, dz_seq)
    db = dz_seq.sum(axis=(0, 1))
    dseq = (dz_seq.reshape(B * n, -1) @ wx.T).reshape(seq.shape)
    return dwx, dwh, db, dseq


def _bilstm_forward(x: np.ndarray, params: ModelParams, layer: str):
    t = params.tensors
    hs_f, cache_f = _lstm_pass(x, t[f"{layer}.fw.wx"], t[f"{layer}.fw.wh"],
                               t[f"{layer}.fw.b"])
    hs_b, cache_b = _lstm_pass(x[:, ::-1], t[f"{layer}.bw.wx"],
                               t[f"{layer}.bw.wh"], t[f"{layer}.bw.b"])
    y = np.concatenate([hs_f, hs_b[:, ::-1]], axis=2)
    finals = (hs_f[:, -1], hs_b[:, -1])
    return y, finals, (cache_f, cache_b)


def _bilstm_backward(dy: np.ndarray, dfinals, caches, params: ModelParams,
                     layer: str):
    t = params.tensors
    h_size = params.hidden
    cache_f, cache_b = caches
    grads = {}
    dh_f = dy[..., :h_size].copy()
    dh_f[:, -1] += dfinals[0]
    dwx, dwh, db, dseq_f = _lstm_pass_backward(dh_f, cache_f,
                                               t[f"{layer}.fw.wx"],
                                               t[f"{layer}.fw.wh"])
    grads[f"{layer}.fw.wx"] = dwx
    grads[f"{layer}.fw.wh"] = dwh
    grads[f"{layer}.fw.b"] = db
    dh_b = dy[..., h_size:][:, ::-1].copy()
    dh_b[:, -1] += dfinals[1]
    dwx, dwh, db, dseq_b = _lstm_pass_backward(dh_b, cache_b,
                                               t[f"{layer}.bw.wx"],
                                               t[f"{layer}.bw.wh"])
    grads[f"{layer}.bw.wx"] = dwx
    grads[f"{layer}.bw.wh"] = dwh
    grads[f"{layer}.bw.b"] = db
    dx = dseq_f + dseq_b[:, ::-1]
    return grads, dx


def _dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    # inverted dropout: scaling lives in the mask, inference is a no-op
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _check_batch_shape(params: ModelParams, x: np.ndarray) -> None:
    if x.ndim != 3 or x.shape[1] != params.window_len or x.shape[2] != INPUT_DIM:
        raise ModelContractError(
            f"expected (B, {params.window_len}, {INPUT_DIM}) input, "
            f"got {x.shape}")


def forward_batch(params: ModelParams, x: np.ndarray,
                  dropout_rate: float = 0.0, mask_seed: int | None = None,
                  want_cache: bool = False):
    """Batched forward pass on raw (B, n, 6) windows.

    Returns (B, 2) raw predictions, or (pred, cache) when want_cache is set.
    Dropout requires a mask_seed so every mask is reproducible.
    """
    _check_batch_shape(params, x)
    xn = (x - params.input_mean) / params.input_scale
    use_dropout = dropout_rate > 0.0
    if use_dropout and mask_seed is None:
        raise InvalidInputError("dropout needs a mask_seed")
    rng = np.random.default_rng(mask_seed) if use_dropout else None
    y1, _, cache1 = _bilstm_forward(xn, params, "lstm1")
    if not np.all(np.isfinite(y1[:, -1])):
        raise NumericOverflowError("non-finite activations in lstm1")
    mask1 = (_dropout_mask(rng, y1.shape, dropout_rate) if use_dropout
             else None)
    y1d = y1 * mask1 if use_dropout else y1
    y2, finals2, cache2 = _bilstm_forward(y1d, params, "lstm2")
    if not np.all(np.isfinite(y2[:, -1])):
        raise NumericOverflowError("non-finite activations in lstm2")
    head_in = np.concatenate(finals2, axis=1)
    mask_h = (_dropout_mask(rng, head_in.shape, dropout_rate) if use_dropout
              else None)
    head_ind = head_in * mask_h if use_dropout else head_in
    pred = head_ind @ params.tensors["head.w"] + params.tensors["head.b"]
    if not np.all(np.isfinite(pred)):
        raise NumericOverflowError("non-finite values in head output")
    if not want_cache:
        return pred
    return pred, (cache1, cache2, mask1, head_ind, mask_h, y1.shape)


def backward_batch(params: ModelParams, cache, dpred: np.ndarray) -> dict:
    """Gradients of a scalar loss w.r.t. every tensor, given dloss/dpred."""
    cache1, cache2, mask1, head_ind, mask_h, y1_shape = cache
    grads = {
        "head.w": head_ind.T @ dpred,
        "head.b": dpred.sum(axis=0),
    }
    dhead_in = dpred @ params.tensors["head.w"].T
    if mask_h is not None:
        dhead_in = dhead_in * mask_h
    h_size = params.hidden
    dfinals2 = (dhead_in[:, :h_size], dhead_in[:, h_size:])
    dy2 = np.zeros((y1_shape[0], y1_shape[1], 2 * h_size))
    g2, dy1d = _bilstm_backward(dy2, dfinals2, cache2, params, "lstm2")
    grads.update(g2)
    dy1 = dy1d * mask1 if mask1 is not None else dy1d
    zero_finals = (np.zeros((y1_shape[0], h_size)),) * 2
    g1, _ = _bilstm_backward(dy1, zero_finals, cache1, params, "lstm1")
    grads.update(g1)
    for name in grads:
        if not np.all(np.isfinite(grads[name])):
            raise NumericOverflowError(f"non-finite gradient for {name}")
    return grads


def model_forward(params: ModelParams, window: Window) -> PolarDelta:
    """Inference on one window: raw dl, wrapped dpsi. Dropout is off."""
    if window.n != params.window_len:
        raise ModelContractError(
            f"window has {window.n} samples, model expects {params.window_len}")
    x = np.concatenate([window.acc, window.gyro], axis=1)[None, :, :]
    pred = forward_batch(params, x)
    return PolarDelta(float(pred[0, 0]), wrap_angle(float(pred[0, 1])))


def windows_to_batch(windows) -> np.ndarray:
    """Stack windows into the (B, n, 6) array the network consumes."""
    return np.stack([np.concatenate([w.acc, w.gyro], axis=1) for w in windows])


def loss(pred: PolarDelta, target: PolarDelta, kappa: float = 1.0) -> float:
    """Squared distance error plus kappa-weighted squared wrapped heading
    error."""
    if kappa < 0:
        raise InvalidInputError("kappa must be >= 0")
    dl_err = pred[0] - target[0]
    psi_err = wrap_angle(pred[1] - target[1])
    return float(dl_err * dl_err + kappa * psi_err * psi_err)


def loss_batch(pred: np.ndarray, targets: np.ndarray, kappa: float):
    """Mean loss over a (B, 2) batch and its gradient w.r.t. pred."""
    B = pred.shape[0]
    dl_err = pred[:, 0] - targets[:, 0]
    psi_err = wrap_angle(pred[:, 1] - targets[:, 1])
    value = float(np.mean(dl_err ** 2 + kappa * psi_err ** 2))
    dpred = np.stack([2.0 * dl_err, 2.0 * kappa * psi_err], axis=1) / B
    return value, dpred


def adam_init(params: ModelParams) -> dict:
    return {name: (np.zeros_like(arr), np.zeros_like(arr))
            for name, arr in params.tensors.items()}


def adam_update(params: ModelParams, grads: dict, moments: dict,
                learning_rate: float, beta1: float, beta2: float,
                eps: float, step: int):
    """One bias-corrected Adam step; functional, returns new values."""
    if step < 1:
        raise InvalidInputError("Adam step count starts at 1")
    new_tensors = {}
    new_moments = {}
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    for name in sorted(params.tensors):
        g = grads[name]
        m, v = moments[name]
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        new_tensors[name] = params.tensors[name] - learning_rate * (
            (m / c1) / (np.sqrt(v / c2) + eps))
        new_moments[name] = (m, v)
    return replace(params, tensors=new_tensors), new_moments


def swap_directions(params: ModelParams) -> ModelParams:
    """Mirror-image parameters: forward and backward roles exchanged.

    Besides swapping each layer's direction blocks, layer 2's input rows and
    the head's rows must swap too, because both consume [fw | bw]
    concatenations. Running the result on a time-reversed window reproduces
    the original output exactly.
    """
    h = params.hidden
    t = params.tensors
    swapped = {}
    for layer in ("lstm1", "lstm2"):
        for name in ("wx", "wh", "b"):
            swapped[f"{layer}.fw.{name}"] = t[f"{layer}.bw.{name}"].copy()
            swapped[f"{layer}.bw.{name}"] = t[f"{layer}.fw.{name}"].copy()
    for direction in ("fw", "bw"):
        wx = swapped[f"lstm2.{direction}.wx"]
        swapped[f"lstm2.{direction}.wx"] = np.concatenate(
            [wx[h:], wx[:h]], axis=0)
    w = t["head.w"]
    swapped["head.w"] = np.concatenate([w[h:], w[:h]], axis=0)
    swapped["head.b"] = t["head.b"].copy()
    return replace(params, tensors=swapped)


def _gate_slices(hidden: int) -> dict:
    return {name: slice(k * hidden, (k + 1) * hidden)
            for k, name in enumerate(GATE_NAMES)}


def save_params(path, params: ModelParams) -> None:
    """Self-describing weight file: JSON with per-gate named tensors.

    Deterministic layout (sorted keys, fixed separators, repr-precision
    floats), so identical params produce byte-identical files.
    """
    slices = _gate_slices(params.hidden)
    tensors = {}
    for layer in ("lstm1", "lstm2"):
        for direction in ("fw", "bw"):
            key = f"{layer}.{direction}"
            for gate, sl in slices.items():
                tensors[f"{key}.{gate}.wx"] = params.tensors[f"{key}.wx"][:, sl]
                tensors[f"{key}.{gate}.wh"] = params.tensors[f"{key}.wh"][:, sl]
                tensors[f"{key}.{gate}.b"] = params.tensors[f"{key}.b"][sl]
    tensors["head.w"] = params.tensors["head.w"]
    tensors["head.b"] = params.tensors["head.b"]
    doc = {
        "format": WEIGHT_FORMAT,
        "format_version": WEIGHT_VERSION,
        "window_len": params.window_len,
        "hidden": params.hidden,
        "input_dim": INPUT_DIM,
        "input_mean": params.input_mean.tolist(),
        "input_scale": params.input_scale.tolist(),
        "tensors": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in tensors.items()
        },
    }
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_params(path) -> ModelParams:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as e:
        raise CorruptFileError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise CorruptFileError(f"{path}: invalid weight file: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != WEIGHT_FORMAT:
        raise CorruptFileError(f"{path}: not a weight file")
    if doc.get("format_version") != WEIGHT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {doc.get('format_version')}, "
            f"supported {WEIGHT_VERSION}")
    try:
        hidden = int(doc["hidden"])
        window_len = int(doc["window_len"])
        mean = np.asarray(doc["input_mean"], dtype=float)
        scale = np.asarray(doc["input_scale"], dtype=float)
        raw = doc["tensors"]
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptFileError(f"{path}: missing or invalid field: {e}") from e

    def tensor(name: str, shape: tuple) -> np.ndarray:
        entry = raw.get(name)
        if entry is None:
            raise CorruptFileError(f"{path}: missing tensor {name}")
        arr = np.asarray(entry["data"], dtype=float)
        if tuple(entry["shape"]) != shape or arr.size != int(np.prod(shape)):
            raise CorruptFileError(
                f"{path}: tensor {name} has shape {entry['shape']}, "
                f"expected {list(shape)}")
        return arr.reshape(shape)

    tensors = {}
    for layer, d_in in (("lstm1", INPUT_DIM), ("lstm2", 2 * hidden)):
        for direction in ("fw", "bw"):
            key = f"{layer}.{direction}"
            wx = [tensor(f"{key}.{g}.wx", (d_in, hidden)) for g in GATE_NAMES]
            wh = [tensor(f"{key}.{g}.wh", (hidden, hidden)) for g in GATE_NAMES]
            b = [tensor(f"{key}.{g}.b", (hidden,)) for g in GATE_NAMES]
            tensors[f"{key}.wx"] = np.concatenate(wx, axis=1)
            tensors[f"{key}.wh"] = np.concatenate(wh, axis=1)
            tensors[f"{key}.b"] = np.concatenate(b)
    tensors["head.w"] = tensor("head.w", (2 * hidden, 2))
    tensors["head.b"] = tensor("head.b", (2,))
    for name, arr in tensors.items():
        if not np.all(np.isfinite(arr)):
            raise CorruptFileError(f"{path}: non-finite values in {name}")
    if mean.shape != (INPUT_DIM,) or scale.shape != (INPUT_DIM,):
        raise CorruptFileError(f"{path}: bad normalization statistics")
    return ModelParams(window_len=window_len, hidden=hidden, input_mean=mean,
                       input_scale=scale, tensors=tensors)
