import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zrpmeta.errors import WellsOverlap
from zrpmeta.graph import complete, ring
from zrpmeta.measure import (conditional_vs_grand_canonical, meta_partition, stationary_measure,
                             tail_masses)
from zrpmeta.model import ZrpModel, default_scales

from conftest import reversible_graphs


def test_two_site_N1_partition_function(two_site):
    assert stationary_measure(two_site, 1).Z_NS == pytest.approx(2.0, rel=1e-15)


def test_two_site_N2_weights(two_site):
    t = stationary_measure(two_site, 2)
    # unnormalised weights 4 * (1, 1, 1) / a(eta) -> (1/4, 1, 1/4)
    assert t.weights.tolist() == pytest.approx([1 / 6, 2 / 3, 1 / 6], rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(reversible_graphs(k_max=4), st.floats(1.2, 4.0), st.integers(2, 12))
def test_detailed_balance(g, alpha, N):
    t = stationary_measure(ZrpModel(alpha, g), N)
    assert t.weights.sum() == pytest.approx(1.0, abs=1e-12)
    flux = t.conductances()
    for e, (x, y) in enumerate(t.edges):
        back = t.edges.index((y, x))
        ok = t.targets[e] >= 0
        tgt = t.targets[e][ok]
        # mu(eta) q(eta, sigma eta) = mu(sigma eta) q(sigma eta, eta)
        src = np.flatnonzero(ok)
        rev = flux[back][tgt]
        assert np.allclose(flux[e][ok], rev, rtol=1e-12, atol=0.0)
        assert np.array_equal(t.targets[back][tgt], src)


def test_partition_wells_and_delta():
    m = ZrpModel(2.0, ring(3))
    t = stationary_measure(m, 20)
    p = meta_partition(m, 20, 5, {}, t.space)
    c = t.space.counts
    for x in m.star.S_star:
        assert np.all(c[p.wells[x], x] >= 15)
    total = sum(t.mass(p.wells[x]) for x in m.star.S_star) + t.mass(p.delta)
    assert total == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(WellsOverlap):
        meta_partition(m, 20, 10, {}, t.space)


def test_tail_masses_sum():
    m = ZrpModel(2.0, complete(3))
    t = stationary_measure(m, 30)
    tm = tail_masses(t, 6)
    # {eta_x >= N - ell} and {max eta <= N - ell - 1} split E_N when 2 ell < N
    assert tm.per_site.sum() + tm.remainder == pytest.approx(1.0, abs=1e-12)
    assert tm.remainder <= tm.spread


def test_well_mass_approaches_half():
    m = ZrpModel(3.0, complete(2))
    N = 400
    t = stationary_measure(m, N)
    ell, _ = default_scales(N, m)
    assert abs(tail_masses(t, ell).per_site[0] - 0.5) < 0.01


def test_tv_to_grand_canonical_small():
    m = ZrpModel(2.0, complete(3))
    N = 300
    t = stationary_measure(m, N)
    ell, _ = default_scales(N, m)
    assert conditional_vs_grand_canonical(t, 0, ell) < 0.05


def test_tv_with_empty_window_is_explicit():
    m = ZrpModel(2.0, complete(3))
    t = stationary_measure(m, 20)
    q0 = 1.0 / np.prod(m.limits.Gamma_x[[1, 2]])
    assert conditional_vs_grand_canonical(t, 0, 0) == pytest.approx(1.0 - q0, rel=1e-12)


def test_tv_two_site_example():
    m = ZrpModel(3.0, complete(2))
    t = stationary_measure(m, 500)
    assert conditional_vs_grand_canonical(t, 0, 20) < 0.05
