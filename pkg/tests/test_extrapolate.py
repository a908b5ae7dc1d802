import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zrpmeta.extrapolate import convergence_report, fit_power_law


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(0.5, 50), st.floats(0.3, 2.5))
def test_recovers_exact_power_law(c0, c1, beta):
    Ns = np.array([50, 100, 200, 400])
    fit = fit_power_law(Ns, c0 + c1 * Ns**-beta)
    assert fit.c0 == pytest.approx(c0, abs=1e-6 * max(1, abs(c1)))
    assert fit.beta == pytest.approx(beta, rel=1e-4)
    assert fit.residual < 1e-6


def test_needs_three_points():
    with pytest.raises(ValueError):
        fit_power_law([1, 2], [1.0, 2.0])


def test_statuses():
    Ns = [100, 200, 400, 800]
    v = [1 + 3 / n for n in Ns]
    assert convergence_report(Ns, v, 1.0, 0.01).status == "pass"
    assert convergence_report(Ns, v, 1.5, 0.01).status == "fail"
    noisy = [1.0, 3.0, 0.5, 2.5]
    assert convergence_report(Ns, noisy, 1.0, 0.5).status == "inconclusive"


def test_short_schedule_is_inconclusive():
    rep = convergence_report([20, 40], [6.1, 5.9], target=5.67, tolerance=0.05)
    assert rep.fit is None and rep.status == "inconclusive"
    assert rep.limit == 5.9
