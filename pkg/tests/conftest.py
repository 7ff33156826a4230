import numpy as np
import pytest

from drusenuq import BinaryMask, GrayImage, ProbMap


def fg_map(fg) -> ProbMap:
    """Two-class map from a foreground-probability array."""
    fg = np.asarray(fg, dtype=np.float64)
    return ProbMap(np.stack([1.0 - fg, fg], axis=-1))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture
def checker_image():
    data = np.indices((8, 8)).sum(axis=0) % 2
    return GrayImage(data.astype(np.float64))


@pytest.fixture
def small_mask():
    data = np.zeros((8, 8), dtype=np.uint8)
    data[2:5, 3:7] = 1
    return BinaryMask(data)
