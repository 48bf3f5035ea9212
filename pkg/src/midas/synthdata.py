"""Synthetic ambiguous clips, simulated annotators and the on-disk dataset format.

Directory layout::

    <dir>/manifest.jsonl      one JSON record per line
    <dir>/clips/<id>.midc     binary clip

Clip file: ``b"MIDC"``, u32 version (1), u32 T, H, W, Ch, u8 dtype code
(1 = float32), then T*H*W*Ch float32 values, t-major then row-major. All
integers and floats little-endian.
"""
from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from .core import SIMPLEX_TOL, AnnotatorVotes, LabeledClip, SoftLabel, VideoClip, argmax_class, from_votes
from .errors import FormatError, ParameterError
from .sampling import SYNTH, RngStream, as_generator

CLIP_MAGIC = b"MIDC"
CLIP_VERSION = 1
DTYPE_F32 = 1
_HEADER = struct.Struct("<4sIIIIIB")
MANIFEST_NAME = "manifest.jsonl"
CLIP_DIR = "clips"
SPLITS = ("train", "test")
DIRICHLET_CONCENTRATION = 1.0

_ID_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


@dataclass(frozen=True)
class SynthConfig:
    num_classes: int = 7
    frames: int = 8
    height: int = 16
    width: int = 16
    channels: int = 3
    annotators: int = 10
    n_train: int = 600
    n_test: int = 200
    ambiguity: float = 0.6
    noise_sigma: float = 0.3
    noise_width: float = 2.0
    noise_persistence: float = 0.7
    seed: int = 42

    def __post_init__(self):
        if self.num_classes < 2:
            raise ParameterError("num_classes must be >= 2")
        if self.annotators < 1:
            raise ParameterError("annotators must be >= 1")
        if min(self.frames, self.height, self.width, self.channels) < 1:
            raise ParameterError("clip dimensions must be >= 1")
        if self.n_train < 0 or self.n_test < 0:
            raise ParameterError("sample counts must be non-negative")
        if not 0.0 <= self.ambiguity <= 1.0:
            raise ParameterError("ambiguity must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be non-negative")
        if self.noise_width < 0:
            raise ParameterError("noise_width must be non-negative")
        if not 0.0 <= self.noise_persistence <= 1.0:
            raise ParameterError("noise_persistence must lie in [0, 1]")

    @property
    def clip_shape(self) -> tuple:
        return (self.frames, self.height, self.width, self.channels)


@dataclass(frozen=True)
class Provenance:
    source_i: str
    source_j: str
    lam: float

    def to_json(self) -> dict:
        return {"source_i": self.source_i, "source_j": self.source_j, "lambda": self.lam}


@dataclass(frozen=True, eq=False)
class Record:
    sample: LabeledClip
    split: str
    provenance: Optional[Provenance] = None

    @property
    def id(self) -> str:
        return self.sample.id

    @property
    def hard_label(self) -> int:
        return argmax_class(self.sample.soft)


@dataclass(frozen=True, eq=False)
class DatasetManifest:
    records: tuple

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("dataset ids must be unique")

    def __len__(self):
        return len(self.records)

    def split(self, name: str) -> List[LabeledClip]:
        return [r.sample for r in self.records if r.split == name]

    @property
    def samples(self) -> List[LabeledClip]:
        return [r.sample for r in self.records]

    @property
    def num_classes(self) -> int:
        return self.records[0].sample.soft.num_classes


# ---------------------------------------------------------------------------
# generation


def gen_prototypes(config: SynthConfig, rng) -> np.ndarray:
    """One (T, H, W, Ch) prototype per class, shape (C, T, H, W, Ch).

    Each class gets a few Gaussian blobs with per-channel gains, a drift
    direction (the pattern scrolls one pixel per frame) and a rising or
    falling intensity ramp.
    """
    gen = as_generator(rng)
    C, (T, H, W, Ch) = config.num_classes, config.clip_shape
    yy, xx = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
    protos = np.empty((C, T, H, W, Ch))
    for c in range(C):
        pattern = np.zeros((H, W, Ch))
        for _ in range(3):
            cy, cx = gen.uniform(0, H), gen.uniform(0, W)
            width = gen.uniform(0.12, 0.3) * max(H, W)
            blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width**2))
            pattern += blob[:, :, None] * gen.uniform(0.2, 1.0, size=Ch)
        pattern /= pattern.max()
        dy, dx = gen.choice([-1, 1]), gen.choice([-1, 0, 1])
        ramp = np.linspace(0.55, 1.0, T) if T > 1 else np.ones(1)
        if gen.random() < 0.5:
            ramp = ramp[::-1]
        for t in range(T):
            protos[c, t] = ramp[t] * np.roll(pattern, (dy * t, dx * t), axis=(0, 1))
    return protos


def smooth_noise(shape: tuple, gen: np.random.Generator, width: float = 0.0, persistence: float = 0.0) -> np.ndarray:
    """Unit-variance Gaussian noise of ``shape`` (T, H, W, Ch).

    ``width`` is the std (pixels) of a periodic Gaussian low-pass applied per
    frame; 0 gives white noise. ``persistence`` is the variance fraction shared
    by every frame of the clip, the rest is drawn per frame.
    """
    T, H, W, Ch = shape

    def field(n):
        z = gen.normal(size=(n, H, W, Ch))
        if width <= 0:
            return z
        ky, kx = np.fft.fftfreq(H)[:, None], np.fft.fftfreq(W)[None, :]
        filt = np.exp(-2.0 * (np.pi * width) ** 2 * (ky**2 + kx**2))
        f = np.fft.ifft2(np.fft.fft2(z, axes=(1, 2)) * filt[None, :, :, None], axes=(1, 2)).real
        # filtered white noise has variance mean(filt**2)
        return f / np.sqrt(np.mean(filt**2))

    if persistence <= 0:
        return field(T)
    static = field(1)
    if persistence >= 1:
        return np.broadcast_to(static, shape).copy()
    return np.sqrt(persistence) * static + np.sqrt(1.0 - persistence) * field(T)


def gen_sample(
    prototypes: np.ndarray,
    mixture_w,
    noise_sigma: float,
    rng,
    noise_width: float = 0.0,
    noise_persistence: float = 0.0,
) -> VideoClip:
    """``clamp(sum_c w_c * prototype_c + noise_sigma * noise, 0, 1)``; white noise by default."""
    w = np.asarray(mixture_w, dtype=np.float64)
    protos = _proto_array(prototypes)
    mean = np.tensordot(w, protos, axes=(0, 0))
    if noise_sigma > 0:
        mean = mean + noise_sigma * smooth_noise(mean.shape, as_generator(rng), noise_width, noise_persistence)
    return VideoClip(np.clip(mean, 0.0, 1.0).astype(np.float32))


def _proto_array(prototypes) -> np.ndarray:
    if isinstance(prototypes, np.ndarray):
        return prototypes
    return np.stack([p.frames if isinstance(p, VideoClip) else np.asarray(p) for p in prototypes])


def simulate_votes(mixture_w, num_annotators: int, rng) -> AnnotatorVotes:
    """``num_annotators`` i.i.d. categorical votes with class probabilities ``mixture_w``."""
    if num_annotators < 1:
        raise ParameterError("need at least one annotator")
    w = np.asarray(mixture_w, dtype=np.float64)
    if w.min() < 0 or abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise ParameterError("mixture weights must lie on the simplex")
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    u = as_generator(rng).random(num_annotators)
    return AnnotatorVotes(tuple(np.searchsorted(cdf, u, side="right").tolist()))


def _mixture(config: SynthConfig, true_class: int, gen: np.random.Generator) -> np.ndarray:
    w = np.zeros(config.num_classes)
    w[true_class] = 1.0 - config.ambiguity
    if config.ambiguity > 0:
        w += config.ambiguity * gen.dirichlet(np.full(config.num_classes, DIRICHLET_CONCENTRATION))
    return w / w.sum()


def gen_dataset(config: SynthConfig) -> DatasetManifest:
    root = RngStream(config.seed, (SYNTH,))
    protos = gen_prototypes(config, root.child(0))
    records = []
    for split_code, (split, n) in enumerate((("train", config.n_train), ("test", config.n_test)), start=1):
        for k in range(n):
            gen = root.child(split_code, k).generator()
            true_class = k % config.num_classes
            w = _mixture(config, true_class, gen)
            clip = gen_sample(protos, w, config.noise_sigma, gen, config.noise_width, config.noise_persistence)
            votes = simulate_votes(w, config.annotators, gen)
            soft = from_votes(votes, config.num_classes)
            sample = LabeledClip(f"{split}-{k:05d}", clip, soft, votes, true_class)
            records.append(Record(sample, split))
    return DatasetManifest(tuple(records))


# ---------------------------------------------------------------------------
# clip files


def write_clip(path, clip: VideoClip) -> None:
    T, H, W, Ch = clip.shape
    header = _HEADER.pack(CLIP_MAGIC, CLIP_VERSION, T, H, W, Ch, DTYPE_F32)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(clip.frames, dtype="<f4").tobytes())


def read_clip(path) -> VideoClip:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(path, f"cannot read clip file ({exc.strerror})") from exc
    if len(raw) < _HEADER.size:
        raise FormatError(path, "truncated header")
    magic, version, T, H, W, Ch, dtype = _HEADER.unpack_from(raw)
    if magic != CLIP_MAGIC:
        raise FormatError(path, f"bad magic {magic!r}")
    if version != CLIP_VERSION:
        raise FormatError(path, f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(path, f"unsupported dtype code {dtype}")
    if min(T, H, W, Ch) < 1:
        raise FormatError(path, f"invalid dims {(T, H, W, Ch)}")
    expected = _HEADER.size + 4 * T * H * W * Ch
    if len(raw) != expected:
        raise FormatError(path, f"expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).astype(np.float32).reshape(T, H, W, Ch)
    try:
        return VideoClip(data)
    except (ValueError, ArithmeticError) as exc:
        raise FormatError(path, str(exc)) from exc


# ---------------------------------------------------------------------------
# dataset directories


def _record_json(rec: Record) -> dict:
    s = rec.sample
    return {
        "id": s.id,
        "clip_path": f"{CLIP_DIR}/{s.id}.midc",
        "soft_label": s.soft.probs.tolist(),
        "votes": list(s.votes.votes) if s.votes is not None else None,
        "hard_label": rec.hard_label,
        "split": rec.split,
        "provenance": rec.provenance.to_json() if rec.provenance is not None else None,
        "true_class": s.true_class,
    }


def write_dataset(manifest: DatasetManifest, directory) -> Path:
    directory = Path(directory)
    (directory / CLIP_DIR).mkdir(parents=True, exist_ok=True)
    lines = []
    for rec in manifest.records:
        if not _ID_RE.match(rec.id):
            raise ValueError(f"id {rec.id!r} is not usable as a file name")
        if rec.split not in SPLITS:
            raise ValueError(f"{rec.id}: unknown split {rec.split!r}")
        write_clip(directory / CLIP_DIR / f"{rec.id}.midc", rec.sample.clip)
        lines.append(json.dumps(_record_json(rec), ensure_ascii=False))
    (directory / MANIFEST_NAME).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return directory


def _parse_record(obj: dict, directory: Path, where: str) -> Record:
    for key in ("id", "clip_path", "soft_label", "hard_label", "split"):
        if key not in obj:
            raise FormatError(where, f"missing field {key!r}")
    rid = obj["id"]
    if not isinstance(rid, str) or not _ID_RE.match(rid):
        raise FormatError(where, f"invalid id {rid!r}")
    if obj["split"] not in SPLITS:
        raise FormatError(where, f"unknown split {obj['split']!r}")
    try:
        soft = SoftLabel(np.asarray(obj["soft_label"], dtype=np.float64))
    except (ValueError, TypeError, ArithmeticError) as exc:
        raise FormatError(where, f"invalid soft_label: {exc}") from exc
    if obj["hard_label"] != argmax_class(soft):
        raise FormatError(where, f"hard_label {obj['hard_label']} is not the argmax of soft_label")
    votes = None
    if obj.get("votes") is not None:
        try:
            votes = AnnotatorVotes(tuple(obj["votes"]))
            votes.counts(soft.num_classes)
        except (ValueError, TypeError) as exc:
            raise FormatError(where, f"invalid votes: {exc}") from exc
    prov = obj.get("provenance")
    if prov is not None:
        try:
            prov = Provenance(str(prov["source_i"]), str(prov["source_j"]), float(prov["lambda"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(where, f"invalid provenance: {exc}") from exc
        if prov.source_i == prov.source_j or not 0.0 <= prov.lam <= 1.0:
            raise FormatError(where, "invalid provenance")
    clip = read_clip(directory / obj["clip_path"])
    try:
        sample = LabeledClip(rid, clip, soft, votes, obj.get("true_class"))
    except ValueError as exc:
        raise FormatError(where, str(exc)) from exc
    return Record(sample, obj["split"], prov)


def read_dataset(directory) -> DatasetManifest:
    directory = Path(directory)
    path = directory / MANIFEST_NAME
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(path, f"cannot read manifest ({exc.strerror})") from exc
    records, seen = [], set()
    shape = num_classes = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(where, f"invalid JSON: {exc.msg}") from exc
        rec = _parse_record(obj, directory, where)
        if rec.id in seen:
            raise FormatError(where, f"duplicate id {rec.id!r}")
        seen.add(rec.id)
        if shape is None:
            shape, num_classes = rec.sample.clip.shape, rec.sample.soft.num_classes
        elif rec.sample.clip.shape != shape:
            raise FormatError(directory / obj["clip_path"], f"clip dims {rec.sample.clip.shape} differ from {shape}")
        elif rec.sample.soft.num_classes != num_classes:
            raise FormatError(where, "soft_label length differs from earlier records")
        records.append(rec)
    if not records:
        raise FormatError(path, "manifest has no records")
    return DatasetManifest(tuple(records))


def datasets_equal(a: DatasetManifest, b: DatasetManifest) -> bool:
    if len(a) != len(b):
        return False
    for ra, rb in zip(a.records, b.records):
        sa, sb = ra.sample, rb.sample
        if (ra.split, ra.provenance, sa.id, sa.votes, sa.true_class) != (rb.split, rb.provenance, sb.id, sb.votes, sb.true_class):
            return False
        if not (sa.clip.equals(sb.clip) and sa.soft.equals(sb.soft)):
            return False
    return True
