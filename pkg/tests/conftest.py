import numpy as np
import pytest
from hypothesis import strategies as st

from zrpmeta.graph import complete, from_conductances, ring
from zrpmeta.model import ZrpModel


@pytest.fixture
def two_site():
    return ZrpModel(2.0, complete(2))


@pytest.fixture
def three_ring():
    return ZrpModel(2.0, ring(3))


@st.composite
def reversible_graphs(draw, k_min=2, k_max=5):
    """Random irreducible reversible walk: a spanning path plus random extra conductances."""
    k = draw(st.integers(k_min, k_max))
    pos = st.floats(0.2, 5.0)
    C = np.zeros((k, k))
    for x in range(k - 1):
        C[x, x + 1] = C[x + 1, x] = draw(pos)
    for x in range(k):
        for y in range(x + 2, k):
            if draw(st.booleans()):
                C[x, y] = C[y, x] = draw(pos)
    m = np.array([draw(pos) for _ in range(k)])
    return from_conductances(C, m)


SIX_GRAPHS = {
    "complete2": lambda: complete(2),
    "complete3": lambda: complete(3),
    "ring3": lambda: ring(3),
    "ring4": lambda: ring(4),
    "path3_weighted": lambda: from_conductances([[0, 1, 0], [1, 0, 2], [0, 2, 0]], [1, 0.5, 1]),
    "nonuniform3": lambda: from_conductances([[0, 1, 1], [1, 0, 1], [1, 1, 0]], [0.4, 0.4, 0.2]),
}
