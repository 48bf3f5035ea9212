"""Seeded randomness: mixing coefficients, source pairs and temporal segments.

Every random decision is taken from a generator derived from
``(seed, purpose, *indices)``, so results never depend on call order or on
how work is split across workers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import InsufficientDataError, ParameterError

DEFAULT_SEED = 42
DEFAULT_ALPHA = 0.4

# purpose tags folded into the stream key
INIT, SHUFFLE, SEGMENT, MIDAS, DROPOUT, SYNTH, RESAMPLE, AUGMENT = range(1, 9)


@dataclass(frozen=True)
class RngStream:
    """Deterministic stream keyed by a seed and a tuple of non-negative ints.

    ``SeedSequence`` hashes the key, so distinct keys give independent
    streams and equal keys give identical ones.
    """

    seed: int
    key: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "key", tuple(int(k) for k in self.key))

    def child(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(key))

    @property
    def stream_id(self) -> int:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return int(ss.generate_state(1, dtype=np.uint64)[0])

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.key)))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True)
class MixCoefficient:
    lam: float
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 <= self.lam <= 1.0:
            raise ParameterError(f"lambda must lie in [0, 1], got {self.lam}")


def sample_lambda(alpha: float, rng) -> MixCoefficient:
    """Draw lambda ~ Beta(alpha, alpha)."""
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    lam = float(as_generator(rng).beta(alpha, alpha))
    return MixCoefficient(lam, float(alpha))


def sample_lambdas(alpha: float, size: int, rng) -> np.ndarray:
    """Vectorised form of :func:`sample_lambda` for distribution checks."""
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    return as_generator(rng).beta(alpha, alpha, size=size)


def sample_pair(n: int, rng) -> tuple:
    """Two distinct indices in ``range(n)``, each marginally uniform."""
    if n < 2:
        raise InsufficientDataError(f"need at least 2 samples to form a pair, got {n}")
    gen = as_generator(rng)
    i = int(gen.integers(n))
    j = int(gen.integers(n - 1))
    if j >= i:
        j += 1
    return i, j


def segment_bounds(total_frames: int, num_segments: int) -> np.ndarray:
    k = np.arange(num_segments + 1, dtype=np.int64)
    return (k * total_frames) // num_segments


def sample_segments(total_frames: int, num_segments: int, mode: str = "random", rng=None) -> List[int]:
    """One frame index per equal-width segment.

    Segment k spans ``[k*total//num, (k+1)*total//num)``. ``center`` takes the
    midpoint, ``random`` a uniform frame inside. An empty segment (only when
    ``total_frames < num_segments``) yields its start index, which repeats
    frames so the output length is always ``num_segments``.
    """
    if total_frames < 1:
        raise ParameterError("cannot sample segments from a zero-length clip")
    if num_segments < 1:
        raise ParameterError(f"num_segments must be >= 1, got {num_segments}")
    bounds = segment_bounds(total_frames, num_segments)
    start, length = bounds[:-1], np.diff(bounds)
    if mode == "center":
        offset = length // 2
    elif mode == "random":
        if rng is None:
            raise ParameterError("random segment sampling needs an rng")
        offset = as_generator(rng).integers(0, np.maximum(length, 1))
    else:
        raise ParameterError(f"unknown segment mode {mode!r}")
    idx = np.minimum(start + offset, total_frames - 1)
    return idx.tolist()
