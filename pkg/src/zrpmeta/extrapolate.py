"""Limit extrapolation of finite-N sequences with the model c0 + c1 N^-beta."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

INCONCLUSIVE_RESIDUAL = 0.10


@dataclass(frozen=True)
class PowerFit:
    c0: float
    c1: float
    beta: float
    residual: float
    points: int


@dataclass(frozen=True)
class ConvergenceReport:
    Ns: list
    values: list
    target: float
    tolerance: float
    fit: PowerFit | None
    limit: float
    rel_gap: float
    status: str

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _linear_part(x: np.ndarray, v: np.ndarray, beta: float):
    X = np.column_stack([np.ones_like(x), x**-beta])
    coef, *_ = np.linalg.lstsq(X, v, rcond=None)
    return coef, v - X @ coef


def fit_power_law(Ns, values, points: int | None = None) -> PowerFit:
    """Least-squares fit of v(N) = c0 + c1 N^-beta over the last ``points`` values (>= 3).

    beta is profiled out: for fixed beta the fit is linear, and the starting
    value comes from the ratio of successive log-differences.
    """
    x = np.asarray(Ns, dtype=float)
    v = np.asarray(values, dtype=float)
    if points is not None:
        x, v = x[-points:], v[-points:]
    if len(x) < 3:
        raise ValueError("extrapolation needs at least three points")

    def sse(log_beta):
        return float(np.sum(_linear_part(x, v, math.exp(log_beta))[1] ** 2))

    d = np.diff(v)
    guess = 1.0
    if np.all(d[:-1] * d[1:] > 0):
        ratios = np.log(np.abs(d[1:] / d[:-1])) / np.log(x[1:-1] / x[2:])
        ratios = ratios[np.isfinite(ratios) & (ratios > 0)]
        if ratios.size:
            guess = float(np.median(ratios))
    grid = np.log(np.geomspace(0.02, 8.0, 200))
    start = grid[np.argmin([sse(g) for g in grid])]
    if sse(math.log(guess)) < sse(start):
        start = math.log(guess)
    res = optimize.minimize_scalar(sse, bracket=(start - 0.2, start + 0.2), tol=1e-12)
    beta = math.exp(res.x) if res.success and res.fun <= sse(start) else math.exp(start)
    coef, resid = _linear_part(x, v, beta)
    spread = np.linalg.norm(v - v.mean())
    rel = float(np.linalg.norm(resid) / spread) if spread > 0 else 0.0
    return PowerFit(c0=float(coef[0]), c1=float(coef[1]), beta=float(beta), residual=rel, points=len(x))


def convergence_report(Ns, values, target: float, tolerance: float,
                       points: int | None = None) -> ConvergenceReport:
    """Extrapolate, compare with ``target`` at relative ``tolerance``.

    The report is "inconclusive" when the fit residual exceeds 10 % or beta
    comes out non-positive. With fewer than three usable points no fit is
    made, the last value stands in for the limit and the report is
    "inconclusive".
    """
    used = len(Ns) if points is None else min(points, len(Ns))
    if used < 3:
        fit, limit = None, float(values[-1])
    else:
        fit = fit_power_law(Ns, values, points)
        limit = fit.c0
    gap = abs(limit - target) / abs(target)
    if fit is None or fit.residual > INCONCLUSIVE_RESIDUAL or not fit.beta > 0:
        status = "inconclusive"
    else:
        status = "pass" if gap <= tolerance else "fail"
    return ConvergenceReport(Ns=[int(n) for n in Ns], values=[float(v) for v in values],
                             target=float(target), tolerance=float(tolerance), fit=fit,
                             limit=limit, rel_gap=float(gap), status=status)
