import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@st.composite
def complex_matrices(draw, min_side=1, max_side=6, rows=None, cols=None, scale=None):
    m = rows if rows is not None else draw(st.integers(min_side, max_side))
    n = cols if cols is not None else draw(st.integers(min_side, max_side))
    seed = draw(st.integers(0, 2**32 - 1))
    s = scale if scale is not None else draw(st.sampled_from([1e-3, 1.0, 10.0]))
    return s * crandn(np.random.default_rng(seed), m, n)


seeds = st.integers(0, 2**31 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
