"""The condensing zero-range model: kinetics, jump rates and limiting constants."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .errors import DegenerateScale
from .graph import SiteGraph, StarStructure, star_structure

SERIES_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ZrpModel:
    alpha: float
    graph: SiteGraph

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")

    @cached_property
    def star(self) -> StarStructure:
        return star_structure(self.graph)

    @property
    def kappa(self) -> int:
        return self.graph.kappa

    def log_a(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return self.alpha * np.log(np.maximum(n, 1.0))

    def a(self, n):
        return kinetics_a(n, self.alpha)

    def g(self, n):
        return kinetics_g(n, self.alpha)

    @cached_property
    def limits(self) -> "LimitConstants":
        return limit_constants(self)

    def to_spec(self) -> dict:
        spec = self.graph.to_spec()
        spec["alpha"] = self.alpha
        return spec


def kinetics_a(n, alpha: float):
    """a(0) = 1 and a(n) = n^alpha."""
    n_arr = np.asarray(n, dtype=float)
    out = np.where(n_arr > 0, np.maximum(n_arr, 1.0) ** alpha, 1.0)
    return float(out) if out.ndim == 0 else out


def kinetics_g(n, alpha: float):
    """g(0) = 0, g(1) = 1, g(n) = a(n)/a(n-1); the product g(1)...g(n) is a(n)."""
    n_arr = np.asarray(n, dtype=float)
    safe = np.maximum(n_arr, 2.0)
    out = np.where(n_arr >= 2, (safe / (safe - 1.0)) ** alpha, np.where(n_arr == 1, 1.0, 0.0))
    return float(out) if out.ndim == 0 else out


def jump_rates(model: ZrpModel, eta) -> list[tuple[np.ndarray, float]]:
    """All moves out of ``eta`` with their rates g(eta_x) r(x, y)."""
    eta = np.asarray(eta, dtype=np.int64)
    out = []
    for x, y in model.graph.edges():
        if eta[x] > 0:
            target = eta.copy()
            target[x] -= 1
            target[y] += 1
            out.append((target, float(model.g(eta[x]) * model.graph.rates[x, y])))
    return out


def gamma_series(m_star: float, alpha: float, tol: float = SERIES_TOL) -> float:
    """sum_{j>=0} m_star^j / a(j).

    For m_star < 1 the series is cut once the integral tail bound
    m^J J^-alpha / (1 - m) drops below ``tol``; for m_star = 1 the tail beyond
    the partial sum is the Hurwitz zeta value zeta(alpha, J + 1).
    """
    if m_star >= 1.0:
        J = 1000
        j = np.arange(1, J + 1, dtype=float)
        return 1.0 + math.fsum(j**-alpha) + float(special.zeta(alpha, J + 1))
    total = [1.0]
    j0 = 1
    chunk = 4096
    while True:
        j = np.arange(j0, j0 + chunk, dtype=float)
        terms = np.exp(j * math.log(m_star) - alpha * np.log(j))
        total.append(math.fsum(terms))
        J = j[-1]
        bound = min(math.exp(J * math.log(m_star) - alpha * math.log(J)) / (1.0 - m_star),
                    J ** (1.0 - alpha) / (alpha - 1.0))
        if bound < tol or j0 > 10**8:
            return math.fsum(total)
        j0 += chunk


def beta_integral(alpha: float) -> float:
    """int_0^1 u^alpha (1-u)^alpha du by adaptive quadrature."""
    val, _ = integrate.quad(lambda u: u**alpha * (1.0 - u) ** alpha, 0.0, 1.0,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def beta_closed_form(alpha: float) -> float:
    return float(np.exp(special.betaln(alpha + 1.0, alpha + 1.0)))


@dataclass(frozen=True)
class LimitConstants:
    Gamma_x: np.ndarray
    Gamma_alpha: float
    I_alpha: float
    Z_S: float

    def as_dict(self) -> dict:
        return {"Gamma_x": self.Gamma_x.tolist(), "Gamma_alpha": self.Gamma_alpha,
                "I_alpha": self.I_alpha, "Z_S": self.Z_S}


def limit_constants(model: ZrpModel) -> LimitConstants:
    star = model.star
    gam = np.array([gamma_series(float(m), model.alpha) for m in star.m_star])
    gamma_alpha = gamma_series(1.0, model.alpha)
    I = beta_integral(model.alpha)
    if abs(I - beta_closed_form(model.alpha)) > 1e-12:
        raise ArithmeticError("quadrature and Beta closed form disagree")
    others = [z for z in range(model.kappa) if z not in star.S_star]
    Z_S = star.kappa_star * gamma_alpha ** (star.kappa_star - 1) * float(np.prod(gam[others]))
    return LimitConstants(Gamma_x=gam, Gamma_alpha=gamma_alpha, I_alpha=I, Z_S=Z_S)


def tunneling_rates(model: ZrpModel) -> np.ndarray:
    """Limit generator on S_star: Cap_S(x, y) / (M_star Gamma(alpha) I_alpha)."""
    from .graph import capacity_S

    star = model.star
    lc = model.limits
    k = star.kappa_star
    out = np.zeros((k, k))
    for i, x in enumerate(star.S_star):
        for j, y in enumerate(star.S_star):
            if i != j:
                out[i, j] = capacity_S(model.graph, [x], [y]) / (star.M_star * lc.Gamma_alpha * lc.I_alpha)
    return out


def capacity_limit(model: ZrpModel, S1_star) -> float:
    """Limit of N^{1+alpha} Cap_N(E_N(S1), E_N(S2)) with S2 = S_star minus S1."""
    from .graph import capacity_S

    star = model.star
    lc = model.limits
    s1 = [model.graph.index(x) for x in S1_star]
    s2 = [x for x in star.S_star if x not in s1]
    total = sum(capacity_S(model.graph, [x], [y]) for x in s1 for y in s2)
    return total / (star.M_star * star.kappa_star * lc.Gamma_alpha * lc.I_alpha)


def _ceil(v: float) -> int:
    return int(math.ceil(v - 1e-9))


def default_scales(N: int, model: ZrpModel) -> tuple[int, dict[int, int]]:
    """Well depth ell_N and caps b_N(z) on the non-maximal sites."""
    star = model.star
    kappa = model.kappa
    if star.kappa_star == 2:
        ell = _ceil(N ** (1.0 / (kappa - 0.5)))
    else:
        ell = _ceil(N ** (1.0 / (kappa - 1)))
    if 2 * ell >= N:
        raise DegenerateScale(f"ell_N = {ell} is not below N/2 for N = {N}")
    b = {}
    for z in range(kappa):
        if z not in star.S_star:
            b[z] = _ceil(-math.log(ell) / math.log(star.m_star[z]))
    return ell, b
