"""Mixup of soft-labeled video clips (MIDAS), with metrics, synthetic data and a small trainer."""

__version__ = "0.1.0"

from .core import AnnotatorVotes, LabeledClip, SoftLabel, VideoClip, argmax_class, from_votes, softmax
from .mixing import MixedSample, decompose_vicinity, midas_batch, mix_clips, mix_labels
from .sampling import RngStream, sample_lambda, sample_pair, sample_segments

__all__ = [
    "AnnotatorVotes",
    "LabeledClip",
    "MixedSample",
    "RngStream",
    "SoftLabel",
    "VideoClip",
    "argmax_class",
    "decompose_vicinity",
    "from_votes",
    "midas_batch",
    "mix_clips",
    "mix_labels",
    "sample_lambda",
    "sample_pair",
    "sample_segments",
    "softmax",
]
