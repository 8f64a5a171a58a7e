import numpy as np
import pytest
from hypothesis import settings

from responsekit.paths import make_path

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_pl_path(rng, dim=2, segments=5, max_step=1.0, uniform_times=True):
    """Piecewise-linear path with increments of norm <= max_step."""
    inc = rng.uniform(-1, 1, (segments, dim))
    norms = np.linalg.norm(inc, axis=1, keepdims=True)
    inc = inc / np.maximum(1.0, norms) * max_step
    if uniform_times:
        times = np.arange(segments + 1, dtype=float)
    else:
        times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.2, 1.0, segments))])
    start = rng.normal(size=dim)
    return make_path(times, np.vstack([start, start + np.cumsum(inc, axis=0)]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_segment():
    return make_path([0.0, 1.0, 2.0], [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
