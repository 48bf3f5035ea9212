"""Small numpy training harness: pooled-clip MLP, soft-target cross-entropy, SGD."""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import kernels
from .core import LabeledClip, VideoClip, argmax_class, softmax_array
from .errors import ConfigError, EmptyEvaluationError, FormatError, NumericError
from .metrics import EvalReport, eval_report
from .mixing import midas_batch
from .sampling import DROPOUT, INIT, MIDAS, SEGMENT, SHUFFLE, RngStream, as_generator, sample_segments

MODES = ("hard", "soft", "midas_soft", "midas_hard")
LOG_EPS = 1e-12
FEATURE_OFFSET = 0.5  # pooled intensities are centred before the first layer

MODEL_MAGIC = b"MIDM"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sIIIIIIIB")
PARAM_NAMES = ("w1", "b1", "w2", "b2")


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "midas_soft"
    lr0: float = 0.02
    momentum: float = 0.9
    epochs: int = 50
    batch_size: int = 8
    dropout_rate: float = 0.5
    alpha: float = 0.4
    normalize: bool = True
    seed: int = 42
    hidden: int = 64
    pool: int = 8
    num_segments: int = 8
    pregenerate: bool = False
    workers: int = 1

    def validate(self) -> "TrainConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.lr0 > 0:
            raise ConfigError("lr0 must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        min_batch = 2 if self.mode.startswith("midas") else 1
        if self.batch_size < min_batch:
            raise ConfigError(f"batch_size must be >= {min_batch} for mode {self.mode}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if self.hidden < 1 or self.pool < 1 or self.num_segments < 1:
            raise ConfigError("hidden, pool and num_segments must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self


@dataclass
class TinyClassifier:
    """Two-layer perceptron (tanh hidden layer, softmax head) over spatially
    pooled, frame-concatenated clips."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    frames: int
    pool_h: int
    pool_w: int
    channels: int

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def num_classes(self) -> int:
        return self.w2.shape[1]

    def params(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "TinyClassifier":
        return replace(self, **{k: v.copy() for k, v in self.params().items()})


def init_model(frames, pool_h, pool_w, channels, hidden, num_classes, rng=None, zero=False) -> TinyClassifier:
    """He-uniform weights (bound sqrt(6 / fan_in)), zero biases; all zeros with ``zero=True``."""
    D = frames * pool_h * pool_w * channels
    if zero:
        w1, w2 = np.zeros((D, hidden)), np.zeros((hidden, num_classes))
    else:
        gen = as_generator(rng)
        w1 = gen.uniform(-1, 1, size=(D, hidden)) * math.sqrt(6.0 / D)
        w2 = gen.uniform(-1, 1, size=(hidden, num_classes)) * math.sqrt(6.0 / hidden)
    return TinyClassifier(w1, np.zeros(hidden), w2, np.zeros(num_classes), frames, pool_h, pool_w, channels)


def model_for(dataset: Sequence[LabeledClip], config: TrainConfig, zero=False) -> TinyClassifier:
    _, H, W, Ch = dataset[0].clip.shape
    return init_model(
        config.num_segments,
        min(config.pool, H),
        min(config.pool, W),
        Ch,
        config.hidden,
        dataset[0].soft.num_classes,
        RngStream(config.seed, (INIT,)),
        zero=zero,
    )


# ---------------------------------------------------------------------------
# forward / backward


def features(model: TinyClassifier, clips: Sequence[VideoClip]) -> np.ndarray:
    """Pool each frame to ``pool_h x pool_w`` and flatten to (N, D)."""
    x = np.stack([c.frames for c in clips])
    if x.shape[1] != model.frames:
        raise ValueError(f"model expects {model.frames} frames, got {x.shape[1]}")
    pooled = kernels.pool_clips(x, model.pool_h, model.pool_w)
    return pooled.reshape(len(clips), -1) - FEATURE_OFFSET


@dataclass
class ForwardCache:
    x: np.ndarray
    act: np.ndarray  # tanh activations before dropout
    h: np.ndarray
    mask: Optional[np.ndarray]
    probs: np.ndarray


def forward(model: TinyClassifier, x: np.ndarray, train_mode: bool = False, rng=None, dropout_rate: float = 0.0):
    """Return ``(probs, cache)``; inverted dropout on the hidden layer in train mode."""
    act = np.tanh(x @ model.w1 + model.b1)
    h = act
    mask = None
    if train_mode and dropout_rate > 0:
        keep = as_generator(rng).random(h.shape) >= dropout_rate
        mask = keep / (1.0 - dropout_rate)
        h = h * mask
    logits = h @ model.w2 + model.b2
    if not np.isfinite(logits).all():
        raise NumericError("non-finite activations in forward pass")
    probs = softmax_array(logits)
    return probs, ForwardCache(x, act, h, mask, probs)


def soft_cross_entropy(probs, target) -> np.ndarray:
    """Per-row ``-sum target * log(max(probs, eps))``; a scalar for 1-D inputs."""
    probs, target = np.asarray(probs, dtype=np.float64), np.asarray(target, dtype=np.float64)
    return -(target * np.log(np.maximum(probs, LOG_EPS))).sum(axis=-1)


def backward(model: TinyClassifier, cache: ForwardCache, targets: np.ndarray) -> Dict[str, np.ndarray]:
    """Gradients of the batch-mean soft cross-entropy."""
    n = cache.x.shape[0]
    dlogits = (cache.probs - targets) / n
    grads = {"w2": cache.h.T @ dlogits, "b2": dlogits.sum(axis=0)}
    dh = dlogits @ model.w2.T
    if cache.mask is not None:
        dh = dh * cache.mask
    dpre = dh * (1.0 - cache.act**2)
    grads["w1"] = cache.x.T @ dpre
    grads["b1"] = dpre.sum(axis=0)
    return grads


def sgd_momentum_step(params: Dict[str, np.ndarray], grads, velocity, lr: float, momentum: float):
    """``v <- momentum*v + g``, ``p <- p - lr*v``; updates in place and returns both dicts."""
    for name, p in params.items():
        v = velocity[name]
        v *= momentum
        v += grads[name]
        p -= lr * v
    return params, velocity


def cosine_lr(epoch: float, total_epochs: int, lr0: float) -> float:
    return 0.5 * lr0 * (1.0 + math.cos(math.pi * epoch / total_epochs))


# ---------------------------------------------------------------------------
# training loop


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    lr: float
    train_uar: float
    train_war: float


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "loss", "lr", "train_uar", "train_war"])
        for r in self.records:
            writer.writerow([r.epoch, repr(r.loss), repr(r.lr), repr(r.train_uar), repr(r.train_war)])
        return buf.getvalue()


def _segmented(clip: VideoClip, num_segments: int, mode: str, rng=None) -> VideoClip:
    if clip.num_frames == num_segments and mode == "center":
        return clip
    return clip.select(sample_segments(clip.num_frames, num_segments, mode, rng))


def epoch_batches(dataset: Sequence[LabeledClip], config: TrainConfig, epoch: int):
    """Clips and targets for one epoch, in presentation order."""
    root = RngStream(config.seed)
    if config.mode in ("hard", "soft"):
        order = root.child(SHUFFLE, epoch).generator().permutation(len(dataset))
        clips, targets = [], []
        for k in order:
            item = dataset[k]
            clips.append(_segmented(item.clip, config.num_segments, "random", root.child(SEGMENT, epoch, int(k))))
            if config.mode == "hard":
                t = np.zeros(item.soft.num_classes)
                t[argmax_class(item.soft)] = 1.0
            else:
                t = item.soft.probs
            targets.append(t)
        return clips, np.stack(targets)
    label_mode = "soft" if config.mode == "midas_soft" else "hard"
    mix_epoch = 0 if config.pregenerate else epoch
    mixed = midas_batch(
        dataset,
        len(dataset),
        config.alpha,
        label_mode,
        config.normalize,
        root.child(MIDAS, mix_epoch),
        num_segments=config.num_segments,
        workers=config.workers,
    )
    return [m.clip for m in mixed], np.stack([m.label.probs for m in mixed])


def train(dataset: Sequence[LabeledClip], config: TrainConfig, callback=None):
    """Fit a :class:`TinyClassifier`; returns ``(model, history)``."""
    config.validate()
    if not dataset:
        raise ConfigError("training set is empty")
    if config.mode.startswith("midas") and len(dataset) < 2:
        raise ConfigError("MIDAS modes need at least 2 training samples")
    model = model_for(dataset, config)
    params = model.params()
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    truths = np.array([argmax_class(s.soft) for s in dataset])
    eval_x = features(model, [_segmented(s.clip, config.num_segments, "center") for s in dataset])
    history = TrainHistory()
    root = RngStream(config.seed)
    pregen = None
    for epoch in range(config.epochs):
        lr = cosine_lr(epoch, config.epochs, config.lr0)
        if pregen is None or not config.pregenerate:
            clips, targets = epoch_batches(dataset, config, epoch)
            x_all = features(model, clips)
            if config.pregenerate and config.mode.startswith("midas"):
                pregen = (x_all, targets)
        else:
            x_all, targets = pregen
        total_loss = 0.0
        for step, start in enumerate(range(0, len(x_all), config.batch_size)):
            xb = x_all[start : start + config.batch_size]
            tb = targets[start : start + config.batch_size]
            probs, cache = forward(model, xb, True, root.child(DROPOUT, epoch, step), config.dropout_rate)
            total_loss += float(soft_cross_entropy(probs, tb).sum())
            grads = backward(model, cache, tb)
            sgd_momentum_step(params, grads, velocity, lr, config.momentum)
        probs, _ = forward(model, eval_x)
        rep = eval_report(probs.argmax(axis=1), truths, model.num_classes)
        rec = EpochRecord(epoch, total_loss / len(x_all), lr, rep.uar, rep.war)
        history.records.append(rec)
        if callback is not None:
            callback(rec)
    return model, history


def predict(model: TinyClassifier, clips: Sequence[VideoClip], num_segments: Optional[int] = None) -> np.ndarray:
    """Eval-mode class probabilities with centre segment sampling."""
    n = num_segments or model.frames
    x = features(model, [_segmented(c, n, "center") for c in clips])
    probs, _ = forward(model, x)
    return probs


def evaluate(model: TinyClassifier, dataset: Sequence[LabeledClip]) -> EvalReport:
    if not dataset:
        raise EmptyEvaluationError("cannot evaluate on an empty dataset")
    probs = predict(model, [s.clip for s in dataset])
    truths = [argmax_class(s.soft) for s in dataset]
    return eval_report(probs.argmax(axis=1), truths, model.num_classes)


# ---------------------------------------------------------------------------
# model files: b"MIDM", u32 version, u32 T, pool_h, pool_w, Ch, hidden, C,
# u8 dtype (1 = f32), then w1, b1, w2, b2 as little-endian float32


def save_model(model: TinyClassifier, path) -> None:
    header = _MODEL_HEADER.pack(
        MODEL_MAGIC, MODEL_VERSION, model.frames, model.pool_h, model.pool_w, model.channels,
        model.w1.shape[1], model.num_classes, 1,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for name in PARAM_NAMES:
            fh.write(np.ascontiguousarray(getattr(model, name), dtype="<f4").tobytes())


def load_model(path) -> TinyClassifier:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(path, f"cannot read model file ({exc.strerror})") from exc
    if len(raw) < _MODEL_HEADER.size:
        raise FormatError(path, "truncated header")
    magic, version, T, ph, pw, Ch, hidden, C, dtype = _MODEL_HEADER.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise FormatError(path, f"bad magic {magic!r}")
    if version != MODEL_VERSION:
        raise FormatError(path, f"unsupported version {version}")
    if dtype != 1:
        raise FormatError(path, f"unsupported dtype code {dtype}")
    if min(T, ph, pw, Ch, hidden, C) < 1:
        raise FormatError(path, "invalid shape header")
    D = T * ph * pw * Ch
    shapes = [(D, hidden), (hidden,), (hidden, C), (C,)]
    n_values = sum(int(np.prod(s)) for s in shapes)
    if len(raw) != _MODEL_HEADER.size + 4 * n_values:
        raise FormatError(path, f"expected {_MODEL_HEADER.size + 4 * n_values} bytes, found {len(raw)}")
    flat = np.frombuffer(raw, dtype="<f4", offset=_MODEL_HEADER.size).astype(np.float64)
    if not np.isfinite(flat).all():
        raise FormatError(path, "non-finite parameters")
    arrays, pos = [], 0
    for s in shapes:
        size = int(np.prod(s))
        arrays.append(flat[pos : pos + size].reshape(s).copy())
        pos += size
    return TinyClassifier(*arrays, frames=T, pool_h=ph, pool_w=pw, channels=Ch)
