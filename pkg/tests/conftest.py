import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from varfrac import exponent as ex

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SAMPLES = np.linspace(-5.0, 5.0, 1001)


@st.composite
def piecewise_exponents(draw, lo=1.0, hi=6.0, allow_inf=False):
    """Random exponent made of constant and affine pieces on [-4, 4]."""
    n = draw(st.integers(0, 4))
    cuts = sorted(draw(st.lists(st.floats(-4, 4), min_size=2 * n, max_size=2 * n, unique=True)))
    val = st.floats(lo, hi)
    segs = []
    for a, b in zip(cuts[::2], cuts[1::2]):
        if b - a < 1e-3:
            continue
        if draw(st.booleans()):
            segs.append((a, b, draw(val)))
        else:
            segs.append((a, b, draw(val), draw(val)))
    if allow_inf and draw(st.booleans()):
        segs.append((4.5, 5.0, np.inf))
    return ex.pieces(segs, draw(val))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
