import numpy as np
import pytest
from hypothesis import settings, strategies as st

from nschow.brackets import Leaf, Node
from nschow.fields import builtin_system

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def _shape(length: int):
    if length == 1:
        return st.just(None)
    return st.integers(1, length - 1).flatmap(
        lambda k: st.tuples(_shape(k), _shape(length - k))
    )


def _build(shape, start: int):
    if shape is None:
        return Leaf(start), start + 1
    left, nxt = _build(shape[0], start)
    right, nxt = _build(shape[1], nxt)
    return Node(left, right), nxt


@st.composite
def brackets(draw, max_length: int = 7, max_offset: int = 5):
    """Valid formal brackets: random tree shape, consecutive letters from a random offset."""
    length = draw(st.integers(1, max_length))
    shape = draw(_shape(length))
    start = draw(st.integers(1, max_offset))
    return _build(shape, start)[0]


@pytest.fixture(scope="session")
def r4():
    return builtin_system("example-r4")


@pytest.fixture(scope="session")
def heis():
    return builtin_system("heisenberg")


@pytest.fixture(scope="session")
def trans():
    return builtin_system("translations-r2")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
