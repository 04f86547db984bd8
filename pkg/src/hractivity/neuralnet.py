"""Small 1-D conv nets over heart-rate windows, with optional fusion of
handcrafted features.

Four architectures share one conv stack (16 filters, kernel 5, ReLU,
dropout, max pool 2/2, flatten):

  Baseline   windows only: flatten -> FC 64 -> ReLU -> FC 5
  Model1     handcrafted vector joins after the first FC layer
  Model2     handcrafted vector is appended to the raw window before conv
  Model3     handcrafted vector passes through its own FC 32 first

Everything is plain numpy with a hand-written backward pass; gradient_check
verifies it against central differences.  All randomness (init, shuffling,
dropout) comes from separate seeded streams so training is reproducible to
the bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import EmptyDataset, InvalidConfig, InternalError, ShapeMismatch, UnknownLabel

CONV_CHANNELS = 16
CONV_KERNEL = 5
POOL_SIZE = 2
POOL_STRIDE = 2


class ArchitectureId(Enum):
    BASELINE = "baseline"
    MODEL1 = "model1"
    MODEL2 = "model2"
    MODEL3 = "model3"


@dataclass(frozen=True)
class NetConfig:
    window_size: int
    hc_dim: int = 0
    dropout_p: float = 0.3
    fc1_out: int = 64
    hc_fc_out: int = 32
    n_classes: int = 5
    seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    epochs: int = 50
    batch_size: int = 32

    def __post_init__(self):
        if self.window_size < CONV_KERNEL:
            raise InvalidConfig("window_size must be >= conv kernel size")
        if self.hc_dim < 0:
            raise InvalidConfig("hc_dim must be >= 0")
        for name in ("fc1_out", "hc_fc_out", "n_classes", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidConfig("dropout_p must be in [0, 1)")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be positive")


def conv_input_length(arch: ArchitectureId, cfg: NetConfig) -> int:
    if arch is ArchitectureId.MODEL2:
        return cfg.window_size + cfg.hc_dim
    return cfg.window_size


def flatten_dim(arch: ArchitectureId, cfg: NetConfig) -> int:
    conv_len = conv_input_length(arch, cfg) - (CONV_KERNEL - 1)
    return CONV_CHANNELS * (conv_len // POOL_STRIDE)


@dataclass
class NetModel:
    arch: ArchitectureId
    config: NetConfig
    params: dict  # name -> float64 array
    training_log: list = field(default_factory=list)  # per-epoch mean loss
    dropout_calls: int = 0  # counts train-mode forwards; names the mask stream


def _layer_sizes(arch: ArchitectureId, cfg: NetConfig) -> list[tuple[str, int, int]]:
    """(name, out_dim, in_dim) for the dense layers, in initialization order."""
    flat = flatten_dim(arch, cfg)
    layers = [("fc1", cfg.fc1_out, flat)]
    if arch is ArchitectureId.MODEL1:
        layers.append(("mid", cfg.fc1_out, cfg.fc1_out + cfg.hc_dim))
        layers.append(("out", cfg.n_classes, cfg.fc1_out))
    elif arch is ArchitectureId.MODEL3:
        layers.append(("hc", cfg.hc_fc_out, cfg.hc_dim))
        layers.append(("mid", cfg.fc1_out, cfg.fc1_out + cfg.hc_fc_out))
        layers.append(("out", cfg.n_classes, cfg.fc1_out))
    else:
        layers.append(("out", cfg.n_classes, cfg.fc1_out))
    return layers


def parameter_count(arch: ArchitectureId, cfg: NetConfig) -> int:
    total = CONV_CHANNELS * CONV_KERNEL + CONV_CHANNELS
    for _, out_dim, in_dim in _layer_sizes(arch, cfg):
        total += out_dim * in_dim + out_dim
    return total


def build(arch: ArchitectureId, cfg: NetConfig) -> NetModel:
    """Allocate and initialize weights: uniform +-1/sqrt(fan_in), one stream."""
    # Model2 with hc_dim 0 degenerates to Baseline, which is a documented
    # equivalence; the branching models need a non-empty vector to fuse.
    if arch in (ArchitectureId.MODEL1, ArchitectureId.MODEL3) and cfg.hc_dim == 0:
        raise InvalidConfig(f"{arch.value} needs hc_dim > 0")
    if flatten_dim(arch, cfg) <= 0:
        raise InvalidConfig("conv output too short to pool and flatten")

    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(cfg.seed), 0)))
    params: dict[str, np.ndarray] = {}

    bound = 1.0 / np.sqrt(CONV_KERNEL)  # one input channel
    params["conv_w"] = rng.uniform(-bound, bound, size=(CONV_CHANNELS, CONV_KERNEL))
    params["conv_b"] = rng.uniform(-bound, bound, size=CONV_CHANNELS)
    for name, out_dim, in_dim in _layer_sizes(arch, cfg):
        bound = 1.0 / np.sqrt(in_dim)
        params[f"{name}_w"] = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        params[f"{name}_b"] = rng.uniform(-bound, bound, size=out_dim)

    total = sum(p.size for p in params.values())
    if total != parameter_count(arch, cfg):
        raise InternalError("parameter count does not match the architecture formula")
    return NetModel(arch=arch, config=cfg, params=params)


def _check_batch(model: NetModel, windows, hc):
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    cfg = model.config
    if windows.ndim != 2 or windows.shape[1] != cfg.window_size:
        raise ShapeMismatch(
            f"window batch must be (n, {cfg.window_size}), got {windows.shape}"
        )
    if cfg.hc_dim == 0:
        hc = np.zeros((windows.shape[0], 0))
    else:
        hc = np.atleast_2d(np.asarray(hc, dtype=np.float64))
        if hc.shape != (windows.shape[0], cfg.hc_dim):
            raise ShapeMismatch(
                f"handcrafted batch must be ({windows.shape[0]}, {cfg.hc_dim}), "
                f"got {hc.shape}"
            )
    return windows, hc


def _conv_forward(params, signal):
    # signal (n, L) -> activations (n, 16, L-4) via stacked shifted views
    cols = np.lib.stride_tricks.sliding_window_view(signal, CONV_KERNEL, axis=1)
    pre = np.einsum("nlk,ck->ncl", cols, params["conv_w"]) + params["conv_b"][None, :, None]
    return cols, pre


def _forward(model: NetModel, windows, hc, train_mode: bool):
    """Class scores plus every intermediate needed by _backward."""
    cfg = model.config
    p = model.params
    cache: dict = {"train_mode": train_mode}

    if model.arch is ArchitectureId.MODEL2:
        signal = np.concatenate([windows, hc], axis=1)
    else:
        signal = windows
    cols, conv_pre = _conv_forward(p, signal)
    act = np.maximum(conv_pre, 0.0)

    if train_mode and cfg.dropout_p > 0.0:
        mask_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=(int(cfg.seed), 1, model.dropout_calls))
        )
        model.dropout_calls += 1
        keep = mask_rng.random(act.shape) >= cfg.dropout_p
        drop_mask = keep / (1.0 - cfg.dropout_p)
        act = act * drop_mask
    else:
        drop_mask = None

    n, channels, conv_len = act.shape
    pooled_len = conv_len // POOL_STRIDE
    pairs = act[:, :, : pooled_len * POOL_STRIDE].reshape(n, channels, pooled_len, POOL_SIZE)
    pool_idx = pairs.argmax(axis=3)
    pooled = np.take_along_axis(pairs, pool_idx[..., None], axis=3)[..., 0]
    flat = pooled.reshape(n, channels * pooled_len)

    fc1_pre = flat @ p["fc1_w"].T + p["fc1_b"]
    fc1_act = np.maximum(fc1_pre, 0.0)

    if model.arch is ArchitectureId.MODEL1:
        joined = np.concatenate([fc1_act, hc], axis=1)
        mid_pre = joined @ p["mid_w"].T + p["mid_b"]
        mid_act = np.maximum(mid_pre, 0.0)
        scores = mid_act @ p["out_w"].T + p["out_b"]
        cache.update(joined=joined, mid_pre=mid_pre, mid_act=mid_act)
    elif model.arch is ArchitectureId.MODEL3:
        hc_pre = hc @ p["hc_w"].T + p["hc_b"]
        hc_act = np.maximum(hc_pre, 0.0)
        joined = np.concatenate([fc1_act, hc_act], axis=1)
        mid_pre = joined @ p["mid_w"].T + p["mid_b"]
        mid_act = np.maximum(mid_pre, 0.0)
        scores = mid_act @ p["out_w"].T + p["out_b"]
        cache.update(hc_pre=hc_pre, joined=joined, mid_pre=mid_pre, mid_act=mid_act)
    else:
        scores = fc1_act @ p["out_w"].T + p["out_b"]

    cache.update(
        hc=hc, cols=cols, conv_pre=conv_pre, drop_mask=drop_mask,
        pairs_shape=pairs.shape, pool_idx=pool_idx, conv_len=conv_len,
        flat=flat, fc1_pre=fc1_pre, fc1_act=fc1_act,
    )
    return scores, cache


def forward(model: NetModel, windows, hc=None, train_mode: bool = False) -> np.ndarray:
    windows, hc = _check_batch(model, windows, hc)
    scores, _ = _forward(model, windows, hc, train_mode)
    return scores


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(scores: np.ndarray, labels: np.ndarray) -> float:
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(scores.shape[0]), labels]
    return float(np.mean(log_z - picked))


def _backward(model: NetModel, cache, scores, labels):
    """Mean cross-entropy gradients for every parameter tensor."""
    p = model.params
    n = scores.shape[0]
    grads: dict[str, np.ndarray] = {}

    dscores = softmax(scores)
    dscores[np.arange(n), labels] -= 1.0
    dscores /= n

    if model.arch in (ArchitectureId.MODEL1, ArchitectureId.MODEL3):
        grads["out_w"] = dscores.T @ cache["mid_act"]
        grads["out_b"] = dscores.sum(axis=0)
        dmid = (dscores @ p["out_w"]) * (cache["mid_pre"] > 0.0)
        grads["mid_w"] = dmid.T @ cache["joined"]
        grads["mid_b"] = dmid.sum(axis=0)
        djoined = dmid @ p["mid_w"]
        dfc1_act = djoined[:, : model.config.fc1_out]
        dtail = djoined[:, model.config.fc1_out:]
        if model.arch is ArchitectureId.MODEL3:
            dhc_act = dtail * (cache["hc_pre"] > 0.0)
            grads["hc_w"] = dhc_act.T @ cache["hc"]
            grads["hc_b"] = dhc_act.sum(axis=0)
    else:
        grads["out_w"] = dscores.T @ cache["fc1_act"]
        grads["out_b"] = dscores.sum(axis=0)
        dfc1_act = dscores @ p["out_w"]

    dfc1 = dfc1_act * (cache["fc1_pre"] > 0.0)
    grads["fc1_w"] = dfc1.T @ cache["flat"]
    grads["fc1_b"] = dfc1.sum(axis=0)
    dflat = dfc1 @ p["fc1_w"]

    n_, channels, pooled_len, _ = cache["pairs_shape"]
    dpool = dflat.reshape(n_, channels, pooled_len)
    dpairs = np.zeros(cache["pairs_shape"])
    np.put_along_axis(dpairs, cache["pool_idx"][..., None], dpool[..., None], axis=3)
    dact = np.zeros((n_, channels, cache["conv_len"]))
    dact[:, :, : pooled_len * POOL_STRIDE] = dpairs.reshape(n_, channels, -1)

    if cache["drop_mask"] is not None:
        dact = dact * cache["drop_mask"]
    dconv = dact * (cache["conv_pre"] > 0.0)
    grads["conv_w"] = np.einsum("ncl,nlk->ck", dconv, cache["cols"])
    grads["conv_b"] = dconv.sum(axis=(0, 2))
    return grads


def train(model: NetModel, windows, hc, labels) -> NetModel:
    """Adam on mean softmax cross-entropy; in-place, returns the same model."""
    cfg = model.config
    windows, hc = _check_batch(model, windows, hc)
    labels = np.asarray(labels, dtype=np.int64)
    n = windows.shape[0]
    if n == 0:
        raise EmptyDataset("no training samples")
    if labels.shape != (n,):
        raise ShapeMismatch("labels must be one per sample")
    if labels.min() < 0 or labels.max() >= cfg.n_classes:
        raise UnknownLabel("label outside [0, n_classes)")

    m = {k: np.zeros_like(v) for k, v in model.params.items()}
    v = {k: np.zeros_like(vv) for k, vv in model.params.items()}
    step = 0
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(cfg.seed), 2)))

    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            scores, cache = _forward(model, windows[batch], hc[batch], train_mode=True)
            epoch_loss += cross_entropy(scores, labels[batch]) * batch.size
            grads = _backward(model, cache, scores, labels[batch])
            step += 1
            bias1 = 1.0 - cfg.beta1**step
            bias2 = 1.0 - cfg.beta2**step
            for key, grad in grads.items():
                m[key] = cfg.beta1 * m[key] + (1.0 - cfg.beta1) * grad
                v[key] = cfg.beta2 * v[key] + (1.0 - cfg.beta2) * grad * grad
                model.params[key] -= cfg.learning_rate * (m[key] / bias1) / (
                    np.sqrt(v[key] / bias2) + cfg.adam_epsilon
                )
        model.training_log.append(epoch_loss / n)
    return model


def predict(model: NetModel, windows, hc=None) -> np.ndarray:
    return np.argmax(forward(model, windows, hc, train_mode=False), axis=1)


def gradient_check(model: NetModel, windows, hc, labels, n_params: int = 200,
                   step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Dropout stays off; parameters are sampled without replacement from the
    flattened concatenation of every tensor.
    """
    windows, hc = _check_batch(model, windows, hc)
    labels = np.asarray(labels, dtype=np.int64)
    scores, cache = _forward(model, windows, hc, train_mode=False)
    grads = _backward(model, cache, scores, labels)

    names = sorted(model.params)
    sizes = np.array([model.params[k].size for k in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(model.config.seed), 3)))
    chosen = (
        np.arange(total)
        if total <= n_params
        else np.sort(rng.choice(total, size=n_params, replace=False))
    )

    worst = 0.0
    for flat_index in chosen:
        tensor = int(np.searchsorted(offsets, flat_index, side="right") - 1)
        name = names[tensor]
        local = int(flat_index - offsets[tensor])
        view = model.params[name].reshape(-1)
        saved = view[local]
        view[local] = saved + step
        up = cross_entropy(_forward(model, windows, hc, train_mode=False)[0], labels)
        view[local] = saved - step
        down = cross_entropy(_forward(model, windows, hc, train_mode=False)[0], labels)
        view[local] = saved
        numeric = (up - down) / (2.0 * step)
        analytic = grads[name].reshape(-1)[local]
        err = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
        worst = max(worst, err)
    return worst


def save_net(model: NetModel, path: str | Path) -> None:
    """Versioned JSON; reloaded forward passes are bit-exact."""
    cfg = model.config
    payload = {
        "schema": "net_model.v1",
        "arch": model.arch.value,
        "config": {f: getattr(cfg, f) for f in cfg.__dataclass_fields__},
        "training_log": model.training_log,
        "params": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in sorted(model.params.items())
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_net(path: str | Path) -> NetModel:
    payload = json.loads(Path(path).read_text())
    if payload.get("schema") != "net_model.v1":
        raise InvalidConfig("not a net_model.v1 file")
    cfg = NetConfig(**payload["config"])
    params = {
        name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in payload["params"].items()
    }
    return NetModel(
        arch=ArchitectureId(payload["arch"]),
        config=cfg,
        params=params,
        training_log=list(payload["training_log"]),
    )
