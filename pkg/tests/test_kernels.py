import os
import subprocess
import sys

import numpy as np
import pytest

from midas import kernels
from midas._accel import HAVE_NUMBA

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def test_bin_edges():
    assert kernels.bin_edges(16, 8).tolist() == list(range(0, 17, 2))
    assert kernels.bin_edges(5, 2).tolist() == [0, 2, 5]
    with pytest.raises(ValueError):
        kernels.bin_edges(3, 4)


def test_pool_numpy_against_loops():
    x = np.random.default_rng(0).random((2, 3, 5, 7, 2)).astype(np.float32)
    got = kernels.pool_clips_numpy(x, 2, 3)
    he, we = kernels.bin_edges(5, 2), kernels.bin_edges(7, 3)
    for i in range(2):
        for j in range(3):
            block = x[:, :, he[i] : he[i + 1], we[j] : we[j + 1], :].astype(np.float64)
            np.testing.assert_allclose(got[:, :, i, j, :], block.mean(axis=(2, 3)), atol=1e-15)


@needs_numba
def test_pool_variants_agree():
    x = np.random.default_rng(1).random((3, 8, 16, 16, 3)).astype(np.float32)
    np.testing.assert_allclose(kernels.pool_clips_numba(x, 8, 8), kernels.pool_clips_numpy(x, 8, 8), atol=1e-14)


@needs_numba
def test_mix_variants_identical():
    rng = np.random.default_rng(2)
    a, b = rng.random((8, 16, 16, 3)).astype(np.float32), rng.random((8, 16, 16, 3)).astype(np.float32)
    for wa in (0.0, 0.3141, 0.5, 1.0):
        np.testing.assert_array_equal(kernels.mix_frames_numba(a, b, wa, 1 - wa), kernels.mix_frames_numpy(a, b, wa, 1 - wa))


@needs_numba
def test_confusion_variants_identical():
    rng = np.random.default_rng(3)
    p, t = rng.integers(0, 7, 500), rng.integers(0, 7, 500)
    np.testing.assert_array_equal(kernels.confusion_counts_numba(p, t, 7), kernels.confusion_counts_numpy(p, t, 7))


def test_env_flag_selects_numpy():
    env = dict(os.environ, MIDAS_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from midas import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"
