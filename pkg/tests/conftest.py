"""Shared strategies and settings for the test suite.

Random grids come from the package's own counter-based generator (so every
draw is reproducible from the printed spec string), and the dyadic strategy
builds cells as mantissa * 2^e with small mantissas, for which block sums
are exactly representable and bit-level assertions are meaningful.
"""

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from rhlab.grid import WeightGrid, make_grid

settings.register_profile(
    "rhlab",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    max_examples=50,
)
settings.load_profile("rhlab")


@st.composite
def random_grids(draw, max_level_1d=8, max_level_2d=4, min_level=1):
    """Lognormal grids through make_grid's deterministic generator."""
    d = draw(st.sampled_from([1, 2]))
    L = draw(st.integers(min_level, max_level_1d if d == 1 else max_level_2d))
    seed = draw(st.integers(0, 2**31 - 1))
    sigma = draw(st.sampled_from([0.3, 0.7, 1.0, 1.5]))
    return make_grid(d, L, f"rand:{seed}:lognormal:{sigma:g}")


@st.composite
def dyadic_grids(draw, max_level=6):
    """Grids whose cells are small integers times a power of two."""
    d = draw(st.sampled_from([1, 2]))
    L = draw(st.integers(1, max_level if d == 1 else max_level // 2))
    n = 1 << (d * L)
    mant = draw(st.lists(st.integers(1, 1 << 12), min_size=n, max_size=n))
    expo = draw(st.integers(-6, 6))
    cells = np.ldexp(np.asarray(mant, dtype=np.float64), expo)
    return WeightGrid(d, L, cells, label="dyadic-random")
