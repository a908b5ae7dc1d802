import numpy as np
import pytest

from zrpmeta.bounds import lower_comparator, profile_G_and_Xi, scaled_Xi
from zrpmeta.errors import DegenerateRange
from zrpmeta.graph import complete, ring
from zrpmeta.measure import meta_partition, stationary_measure
from zrpmeta.model import ZrpModel, default_scales
from zrpmeta.potential import capacity_N


@pytest.mark.parametrize("alpha,N,k,ell", [(2.0, 60, 0, 10), (2.5, 80, 3, 12), (1.5, 40, 5, 8)])
def test_profile_minimiser_identity(alpha, N, k, ell):
    m = ZrpModel(alpha, complete(2))
    prof = profile_G_and_Xi(m, N, k, ell)
    assert prof.G[0] == 0.0 and prof.G[-1] == 1.0
    assert prof.form_value() == pytest.approx(prof.Xi, rel=1e-12)
    rng = np.random.default_rng(0)
    for _ in range(5):
        G = prof.G.copy()
        G[1:-1] += rng.normal(scale=1e-3, size=G.size - 2)
        assert np.sum(np.diff(G) ** 2 / prof.weights) > prof.Xi


def test_scaled_Xi_tends_to_inverse_beta():
    m = ZrpModel(2.0, complete(2))
    vals = [scaled_Xi(m, N, 0, int(N ** 0.5)) for N in (100, 400, 1600)]
    assert abs(vals[-1] - 30.0) < abs(vals[0] - 30.0)
    assert vals[-1] == pytest.approx(30.0, rel=0.05)


def test_degenerate_range():
    m = ZrpModel(2.0, complete(2))
    with pytest.raises(DegenerateRange):
        profile_G_and_Xi(m, 10, 0, 5)


@pytest.mark.parametrize("graph,alpha,N", [(complete(2), 2.0, 60), (ring(3), 2.5, 30), (complete(3), 2.0, 30)])
def test_lower_comparator_below_capacity(graph, alpha, N):
    m = ZrpModel(alpha, graph)
    t = stationary_measure(m, N)
    ell, b = default_scales(N, m)
    p = meta_partition(m, N, ell, b, t.space)
    cap = capacity_N(t, p.wells[0], p.others(0))
    assert lower_comparator(t, p, [0]).value <= cap * (1 + 1e-9)


def test_two_site_comparator_is_exact():
    m = ZrpModel(2.0, complete(2))
    t = stationary_measure(m, 100)
    ell, b = default_scales(100, m)
    p = meta_partition(m, 100, ell, b, t.space)
    cap = capacity_N(t, p.wells[0], p.wells[1])
    assert lower_comparator(t, p, [0]).value == pytest.approx(cap, rel=1e-10)
