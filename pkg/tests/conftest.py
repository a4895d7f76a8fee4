"""Shared fixtures.

NUMBA_NUM_THREADS is raised before numba is first imported so thread-count
invariance can be exercised even on single-core runners.
"""

import os

os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import numpy as np
import pytest

from nldenoise.video import Video


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_video(rng):
    return Video(rng.uniform(0.0, 255.0, (5, 1, 12, 16)).astype(np.float32))


@pytest.fixture
def small_color_video(rng):
    return Video(rng.uniform(0.0, 255.0, (4, 3, 10, 14)).astype(np.float32))
