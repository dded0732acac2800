import numpy as np
import pytest

from fracshape.curve import random_trig_poly


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def band_limited(rng, n, d=2, max_mode=None, decay=2.0, amplitude=1.0):
    """Random real trig polynomial with modes up to ``max_mode`` (default n/8)."""
    return random_trig_poly(rng, n, d, max_mode or n // 8, decay, amplitude)


def nodes(n):
    return np.arange(n) / n


def ring(n, radius=1.0):
    t = nodes(n)
    return radius * np.stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)], axis=1)
