import numpy as np
import pytest
from scipy.special import zeta

from zrpmeta.errors import DegenerateScale
from zrpmeta.graph import complete, from_conductances, ring
from zrpmeta.model import (ZrpModel, beta_closed_form, beta_integral, capacity_limit, default_scales,
                           gamma_series, jump_rates, kinetics_a, kinetics_g, limit_constants, tunneling_rates)


def test_kinetics():
    assert kinetics_a(0, 2.0) == 1.0
    assert kinetics_a(3, 2.0) == 9.0
    assert kinetics_g(0, 2.0) == 0.0
    assert kinetics_g(1, 2.0) == 1.0
    assert kinetics_g(2, 2.0) == pytest.approx(4.0)


def test_alpha_must_exceed_one():
    with pytest.raises(ValueError):
        ZrpModel(1.0, complete(2))


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0, 4.5])
def test_gamma_series_is_one_plus_zeta(alpha):
    assert gamma_series(1.0, alpha) == pytest.approx(1.0 + zeta(alpha), rel=1e-12)


def test_gamma_series_subcritical():
    # sum_n 0.5^n / n^2 = Li_2(1/2) = pi^2/12 - log(2)^2/2
    expected = 1.0 + np.pi**2 / 12 - np.log(2) ** 2 / 2
    assert gamma_series(0.5, 2.0) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 2.5, 3.0])
def test_beta_integral_two_routes(alpha):
    assert beta_integral(alpha) == pytest.approx(beta_closed_form(alpha), rel=1e-12)


def test_I2_is_one_thirtieth():
    assert beta_closed_form(2.0) == pytest.approx(1 / 30, rel=1e-14)


def test_limit_constants_two_site():
    lc = limit_constants(ZrpModel(2.0, complete(2)))
    assert lc.Gamma_alpha == pytest.approx(2.6449340668, rel=1e-10)
    assert lc.Z_S == pytest.approx(5.289868, rel=1e-6)


def test_limit_constants_single_maximum():
    g = from_conductances([[0, 1], [1, 0]], [0.6, 0.4])
    m = ZrpModel(2.0, g)
    lc = m.limits
    assert m.star.kappa_star == 1
    assert lc.Z_S == pytest.approx(lc.Gamma_x[1], rel=1e-12)


def test_tunneling_rate_and_capacity_limit():
    m = ZrpModel(2.0, complete(2))
    assert tunneling_rates(m)[0, 1] == pytest.approx(11.342437, rel=1e-6)
    assert capacity_limit(m, [0]) == pytest.approx(5.671219, rel=1e-6)


def test_capacity_limit_ignores_nonmaximal_site():
    g = from_conductances([[0, 1, 1], [1, 0, 1], [1, 1, 0]], [0.4, 0.4, 0.2])
    m = ZrpModel(2.0, g)
    from zrpmeta.graph import capacity_S
    lc = m.limits
    expected = capacity_S(g, [0], [1]) / (0.4 * 2 * lc.Gamma_alpha * lc.I_alpha)
    assert capacity_limit(m, [0]) == pytest.approx(expected, rel=1e-12)


def test_jump_rates_from_pure_state():
    m = ZrpModel(2.0, ring(3))
    moves = jump_rates(m, np.array([5, 0, 0]))
    total = sum(r for _, r in moves)
    assert total == pytest.approx(m.g(5) * 2.0)


def test_default_scales():
    m = ZrpModel(2.0, complete(2))
    assert default_scales(40, m) == (12, {})
    m3 = ZrpModel(2.0, complete(3))
    assert default_scales(1000, m3)[0] == 32
    with pytest.raises(DegenerateScale):
        default_scales(3, m)


def test_default_b_for_nonmaximal_site():
    g = from_conductances([[0, 1, 1], [1, 0, 1], [1, 1, 0]], [0.4, 0.4, 0.2])
    ell, b = default_scales(200, ZrpModel(2.0, g))
    assert b == {2: int(np.ceil(np.log(ell) / np.log(2.0) - 1e-9))}
