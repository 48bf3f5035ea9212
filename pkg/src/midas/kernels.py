"""Hot inner loops, each with a numba and a pure-numpy implementation.

The public names (``pool_clips``, ``mix_frames``, ``confusion_counts``)
dispatch to numba unless ``MIDAS_DISABLE_NUMBA`` is set. Both variants are
importable by suffix so tests and benchmarks can compare them directly.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


def bin_edges(size: int, bins: int) -> np.ndarray:
    """Split ``range(size)`` into ``bins`` contiguous chunks: edge k = floor(k*size/bins)."""
    if bins < 1 or size < bins:
        raise ValueError(f"cannot pool size {size} into {bins} bins")
    return (np.arange(bins + 1, dtype=np.int64) * size) // bins


# --------------------------------------------------------------------------
# spatial average pooling: (N, T, H, W, Ch) float32 -> (N, T, ph, pw, Ch) float64


def pool_clips_numpy(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    n, t, h, w, ch = x.shape
    he, we = bin_edges(h, ph), bin_edges(w, pw)
    xs = x.astype(np.float64)
    s = np.add.reduceat(xs, he[:-1], axis=2)
    s = np.add.reduceat(s, we[:-1], axis=3)
    area = np.diff(he)[:, None] * np.diff(we)[None, :]
    return s / area[None, None, :, :, None]


@njit
def _pool_loop(x, he, we, out):
    n, t = x.shape[0], x.shape[1]
    ch = x.shape[4]
    ph = he.shape[0] - 1
    pw = we.shape[0] - 1
    for a in range(n):
        for f in range(t):
            for i in range(ph):
                for j in range(pw):
                    area = (he[i + 1] - he[i]) * (we[j + 1] - we[j])
                    for c in range(ch):
                        acc = 0.0
                        for r in range(he[i], he[i + 1]):
                            for s in range(we[j], we[j + 1]):
                                acc += x[a, f, r, s, c]
                        out[a, f, i, j, c] = acc / area
    return out


def pool_clips_numba(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    n, t, h, w, ch = x.shape
    out = np.empty((n, t, ph, pw, ch), dtype=np.float64)
    return _pool_loop(np.ascontiguousarray(x), bin_edges(h, ph), bin_edges(w, pw), out)


# --------------------------------------------------------------------------
# convex frame mixing in float64, rounded once to float32


def mix_frames_numpy(a: np.ndarray, b: np.ndarray, wa: float, wb: float) -> np.ndarray:
    return (wa * a.astype(np.float64) + wb * b.astype(np.float64)).astype(np.float32)


@njit
def _mix_loop(a, b, wa, wb, out):
    for k in range(a.shape[0]):
        out[k] = np.float32(wa * np.float64(a[k]) + wb * np.float64(b[k]))
    return out


def mix_frames_numba(a: np.ndarray, b: np.ndarray, wa: float, wb: float) -> np.ndarray:
    fa = np.ascontiguousarray(a).reshape(-1)
    fb = np.ascontiguousarray(b).reshape(-1)
    out = np.empty(fa.shape[0], dtype=np.float32)
    return _mix_loop(fa, fb, float(wa), float(wb), out).reshape(a.shape)


# --------------------------------------------------------------------------
# confusion counts, rows = truth, cols = prediction


def confusion_counts_numpy(preds: np.ndarray, truths: np.ndarray, num_classes: int) -> np.ndarray:
    flat = truths.astype(np.int64) * num_classes + preds.astype(np.int64)
    return np.bincount(flat, minlength=num_classes * num_classes).reshape(num_classes, num_classes)


@njit
def _confusion_loop(preds, truths, out):
    for k in range(preds.shape[0]):
        out[truths[k], preds[k]] += 1
    return out


def confusion_counts_numba(preds: np.ndarray, truths: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((num_classes, num_classes), dtype=np.int64)
    return _confusion_loop(preds.astype(np.int64), truths.astype(np.int64), out)


if USE_NUMBA:
    pool_clips = pool_clips_numba
    mix_frames = mix_frames_numba
    confusion_counts = confusion_counts_numba
else:
    pool_clips = pool_clips_numpy
    mix_frames = mix_frames_numpy
    confusion_counts = confusion_counts_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
