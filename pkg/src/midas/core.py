"""Label and clip types plus the small amount of algebra shared by every module."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidVoteError, NumericError, ShapeError

SIMPLEX_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class VideoClip:
    """A (T, H, W, Ch) float32 array of intensities in [0, 1]."""

    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 4 or min(frames.shape) < 1:
            raise ShapeError(f"clip must be a non-empty (T, H, W, Ch) array, got shape {frames.shape}")
        if frames.dtype != np.float32:
            frames = frames.astype(np.float32)
        elif frames.flags.writeable:
            frames = frames.copy()
        if not np.isfinite(frames).all():
            raise NumericError("clip contains non-finite intensities")
        if frames.min() < 0.0 or frames.max() > 1.0:
            raise NumericError("clip intensities must lie in [0, 1]")
        object.__setattr__(self, "frames", _frozen(frames))

    @classmethod
    def from_uint8(cls, frames: np.ndarray) -> "VideoClip":
        return cls(np.asarray(frames, dtype=np.float32) / np.float32(255.0))

    @property
    def shape(self) -> tuple:
        return self.frames.shape

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def select(self, indices: Sequence[int]) -> "VideoClip":
        return VideoClip(self.frames[np.asarray(indices, dtype=np.int64)])

    def equals(self, other: "VideoClip") -> bool:
        return self.shape == other.shape and np.array_equal(self.frames, other.frames)


@dataclass(frozen=True, eq=False)
class SoftLabel:
    """Probability vector over C classes."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size < 1:
            raise ShapeError(f"soft label must be a non-empty vector, got shape {p.shape}")
        if not np.isfinite(p).all():
            raise NumericError("soft label contains non-finite entries")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError(f"soft label entries must lie in [0, 1]: {p.tolist()}")
        if abs(p.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"soft label sums to {p.sum():.12g}, not 1")
        object.__setattr__(self, "probs", _frozen(p))

    @property
    def num_classes(self) -> int:
        return self.probs.size

    def equals(self, other: "SoftLabel") -> bool:
        return np.array_equal(self.probs, other.probs)

    def __repr__(self):
        return f"SoftLabel({np.array2string(self.probs, precision=4)})"


@dataclass(frozen=True)
class AnnotatorVotes:
    """One class index per annotator."""

    votes: tuple

    def __post_init__(self):
        votes = tuple(int(v) for v in self.votes)
        if not votes:
            raise InvalidVoteError("need at least one annotator vote")
        if min(votes) < 0:
            raise InvalidVoteError(f"negative vote index in {votes}")
        object.__setattr__(self, "votes", votes)

    def __len__(self):
        return len(self.votes)

    def counts(self, num_classes: int) -> np.ndarray:
        if max(self.votes) >= num_classes:
            raise InvalidVoteError(f"vote index {max(self.votes)} out of range for {num_classes} classes")
        return np.bincount(np.asarray(self.votes), minlength=num_classes)


@dataclass(frozen=True, eq=False)
class LabeledClip:
    id: str
    clip: VideoClip
    soft: SoftLabel
    votes: Optional[AnnotatorVotes] = None
    true_class: Optional[int] = None

    def __post_init__(self):
        if self.votes is not None:
            expected = from_votes(self.votes, self.soft.num_classes).probs
            if np.abs(expected - self.soft.probs).max() > SIMPLEX_TOL:
                raise ValueError(f"{self.id}: soft label disagrees with its votes")
        if self.true_class is not None and not 0 <= self.true_class < self.soft.num_classes:
            raise ValueError(f"{self.id}: true_class {self.true_class} out of range")

    @property
    def hard_label(self) -> int:
        return argmax_class(self.soft)


def from_votes(votes: AnnotatorVotes, num_classes: int) -> SoftLabel:
    counts = votes.counts(num_classes)
    return SoftLabel(counts / len(votes))


def argmax_class(label) -> int:
    """Index of the largest probability; ties go to the lowest index."""
    probs = label.probs if isinstance(label, SoftLabel) else np.asarray(label)
    # np.argmax returns the first occurrence of the maximum
    return int(np.argmax(probs))


def softmax(v) -> SoftLabel:
    return SoftLabel(softmax_array(np.asarray(v, dtype=np.float64)))


def softmax_array(v: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a 1-D or 2-D float array."""
    if not np.isfinite(v).all():
        raise NumericError("softmax input contains non-finite values")
    z = np.exp(v - v.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def one_hot(index: int, num_classes: int) -> SoftLabel:
    p = np.zeros(num_classes)
    p[index] = 1.0
    return SoftLabel(p)
