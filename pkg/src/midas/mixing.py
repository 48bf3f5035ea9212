"""MIDAS augmentation: convex mixing of clip pairs and their soft labels."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import kernels
from .core import (
    AnnotatorVotes,
    LabeledClip,
    SoftLabel,
    VideoClip,
    argmax_class,
    from_votes,
    one_hot,
    softmax_array,
)
from .errors import InsufficientDataError, ParameterError, ShapeError
from .sampling import DEFAULT_ALPHA, MixCoefficient, RngStream, sample_lambda, sample_pair, sample_segments

LABEL_MODES = ("soft", "hard")


@dataclass(frozen=True, eq=False)
class MixedSample:
    clip: VideoClip
    label: SoftLabel
    source_i: str
    source_j: str
    lam: MixCoefficient
    label_pre_norm: np.ndarray

    def __post_init__(self):
        if self.source_i == self.source_j:
            raise ValueError(f"mixed sample built from a single source {self.source_i!r}")


@dataclass(frozen=True, eq=False)
class VicinityDecomposition:
    lambda_prime: float
    y_prime_j: np.ndarray
    correct_votes: int
    num_annotators: int
    degenerate: bool = False

    def reconstruct(self, true_class: int) -> np.ndarray:
        """``lambda' * onehot(true_class) + (1 - lambda') * y'_j``."""
        y = np.zeros_like(self.y_prime_j)
        y[true_class] = 1.0
        return self.lambda_prime * y + (1.0 - self.lambda_prime) * self.y_prime_j


def _lam(lam) -> float:
    value = lam.lam if isinstance(lam, MixCoefficient) else float(lam)
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"lambda must lie in [0, 1], got {value}")
    return value


def mix_weights(lam: float) -> tuple:
    """Weights ``(w_a, w_b)`` with ``w_a + w_b == 1`` exactly.

    ``w_a`` equals ``lam`` to within half an ulp of 0.5. Computing the larger
    weight as ``1 - smaller`` keeps both subtractions exact, so swapping the
    inputs together with ``lam -> 1 - lam`` reproduces the same pair.
    """
    if lam >= 0.5:
        return lam, 1.0 - lam
    wb = 1.0 - lam
    return 1.0 - wb, wb


def mix_clips(a: VideoClip, b: VideoClip, lam) -> VideoClip:
    if a.shape != b.shape:
        raise ShapeError(f"cannot mix clips of shapes {a.shape} and {b.shape}")
    wa, wb = mix_weights(_lam(lam))
    return VideoClip(kernels.mix_frames(a.frames, b.frames, wa, wb))


def mix_label_vectors(y_i: np.ndarray, y_j: np.ndarray, lam) -> np.ndarray:
    y_i, y_j = np.asarray(y_i, dtype=np.float64), np.asarray(y_j, dtype=np.float64)
    if y_i.shape != y_j.shape:
        raise ShapeError(f"cannot mix labels of shapes {y_i.shape} and {y_j.shape}")
    wa, wb = mix_weights(_lam(lam))
    return wa * y_i + wb * y_j


def mix_labels(y_i: SoftLabel, y_j: SoftLabel, lam, normalize: bool = True) -> tuple:
    """Return ``(label, pre_norm)``; ``label`` is the softmax of ``pre_norm`` when normalising."""
    pre = mix_label_vectors(y_i.probs, y_j.probs, lam)
    if normalize:
        return SoftLabel(softmax_array(pre)), pre
    return SoftLabel(pre), pre


def _source_label(item: LabeledClip, label_mode: str) -> SoftLabel:
    if label_mode == "hard":
        return one_hot(argmax_class(item.soft), item.soft.num_classes)
    return item.soft


def mix_one(
    dataset: Sequence[LabeledClip],
    rng: RngStream,
    alpha: float = DEFAULT_ALPHA,
    label_mode: str = "soft",
    normalize: bool = True,
    num_segments: Optional[int] = None,
) -> MixedSample:
    """Draw a pair, a coefficient and (optionally) segment indices from ``rng`` and mix."""
    gen = rng.generator()
    i, j = sample_pair(len(dataset), gen)
    lam = sample_lambda(alpha, gen)
    a, b = dataset[i], dataset[j]
    ca, cb = a.clip, b.clip
    if num_segments is not None:
        ca = ca.select(sample_segments(ca.num_frames, num_segments, "random", gen))
        cb = cb.select(sample_segments(cb.num_frames, num_segments, "random", gen))
    label, pre = mix_labels(_source_label(a, label_mode), _source_label(b, label_mode), lam, normalize)
    return MixedSample(mix_clips(ca, cb, lam), label, a.id, b.id, lam, pre)


def midas_batch(
    dataset: Sequence[LabeledClip],
    batch_size: int,
    alpha: float = DEFAULT_ALPHA,
    label_mode: str = "soft",
    normalize: bool = True,
    rng: Optional[RngStream] = None,
    num_segments: Optional[int] = None,
    workers: int = 1,
) -> List[MixedSample]:
    """Generate ``batch_size`` mixed samples.

    Sample k draws everything from ``rng.child(k)``, so the output is the
    same for any ``workers`` count and is always ordered by k.
    """
    if len(dataset) < 2:
        raise InsufficientDataError(f"need at least 2 clips to mix, got {len(dataset)}")
    if label_mode not in LABEL_MODES:
        raise ParameterError(f"label_mode must be one of {LABEL_MODES}, got {label_mode!r}")
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    if rng is None:
        rng = RngStream(42)

    def make(k):
        return mix_one(dataset, rng.child(k), alpha, label_mode, normalize, num_segments)

    if workers <= 1:
        return [make(k) for k in range(batch_size)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(make, range(batch_size)))


def decompose_vicinity(lam, true_class: int, votes_i: AnnotatorVotes, q_j: SoftLabel) -> VicinityDecomposition:
    """Rewrite ``lam*q_i + (1-lam)*q_j`` around the true one-hot label of sample i.

    With ``l`` correct votes out of ``S``: ``lambda' = lam*l/S`` and
    ``y'_j = lam/(S - lam*l) * sum_wrong onehot(v) + S(1-lam)/(S - lam*l) * q_j``.
    """
    lam = _lam(lam)
    num_classes = q_j.num_classes
    if not 0 <= true_class < num_classes:
        raise ParameterError(f"true_class {true_class} out of range for {num_classes} classes")
    counts = votes_i.counts(num_classes).astype(np.float64)
    S = len(votes_i)
    l = int(counts[true_class])
    wrong = counts.copy()
    wrong[true_class] = 0.0
    denom = S - lam * l
    if denom == 0.0:
        return VicinityDecomposition(1.0, q_j.probs.copy(), l, S, degenerate=True)
    y_prime = (lam / denom) * wrong + (S * (1.0 - lam) / denom) * q_j.probs
    return VicinityDecomposition(lam * l / S, y_prime, l, S)


def soft_mixture(lam, votes_i: AnnotatorVotes, q_j: SoftLabel) -> np.ndarray:
    """``lam*q_i + (1-lam)*q_j`` with ``q_i`` taken from the votes, as written (no weight trick)."""
    lam = _lam(lam)
    q_i = from_votes(votes_i, q_j.num_classes).probs
    return lam * q_i + (1.0 - lam) * q_j.probs
