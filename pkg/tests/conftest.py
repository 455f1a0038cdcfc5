from fractions import Fraction as F

import hypothesis.strategies as st
import pytest
from hypothesis import settings

from qsure.core import Prior, PriorFamily, SampleSpace

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def family(*rows, labels=None):
    rows = [tuple(F(x) if not isinstance(x, float) else x for x in r) for r in rows]
    space = SampleSpace(labels) if labels else SampleSpace.of_size(len(rows[0]))
    return PriorFamily(space, tuple(Prior(r) for r in rows))


@st.composite
def priors(draw, n):
    support = draw(st.sets(st.integers(0, n - 1), min_size=1))
    raw = [draw(st.integers(1, 5)) if i in support else 0 for i in range(n)]
    total = sum(raw)
    return tuple(F(r, total) for r in raw)


@st.composite
def families(draw, max_n=6, max_k=4):
    n = draw(st.integers(1, max_n))
    rows = draw(st.lists(priors(n), min_size=1, max_size=max_k))
    return family(*rows)


@st.composite
def vectors(draw, n, low=-5, high=5):
    return tuple(F(draw(st.integers(2 * low, 2 * high)), 2) for _ in range(n))


@pytest.fixture
def two_point():
    return family((1, 0), (F(1, 2), F(1, 2)))
