"""Reversible random walks on a finite site set and their potential theory.

A :class:`SiteGraph` holds the jump rates ``r(x, y)`` of an irreducible walk
on ``S`` together with a reversible probability measure ``m``.  The module
provides the Dirichlet form, equilibrium potentials and capacities of that
walk; these are the finite-dimensional ingredients that enter the limiting
dynamics of the condensate.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse.csgraph as csgraph

from .errors import InvalidMeasure, NotIrreducible, NotReversible, OverlappingSets

STAR_RTOL = 1e-12
BALANCE_RTOL = 1e-12


@dataclass(frozen=True)
class SiteGraph:
    sites: tuple
    rates: np.ndarray = field(repr=False)
    measure: np.ndarray

    @property
    def kappa(self) -> int:
        return len(self.sites)

    def index(self, site) -> int:
        """Position of ``site`` in :attr:`sites` (integers are accepted as positions)."""
        if site in self.sites:
            return self.sites.index(site)
        if isinstance(site, (int, np.integer)) and 0 <= site < self.kappa:
            return int(site)
        raise KeyError(site)

    def indices(self, sites: Iterable) -> list[int]:
        return sorted({self.index(s) for s in sites})

    def total_rates(self) -> np.ndarray:
        """lambda(x) = sum_y r(x, y)."""
        return self.rates.sum(axis=1)

    def edges(self) -> list[tuple[int, int]]:
        """Ordered pairs (x, y), x != y, with r(x, y) > 0."""
        xs, ys = np.nonzero(self.rates)
        return [(int(x), int(y)) for x, y in zip(xs, ys) if x != y]

    def to_spec(self) -> dict:
        return {
            "sites": [str(s) for s in self.sites],
            "rates": [
                {"from": str(self.sites[x]), "to": str(self.sites[y]), "rate": float(self.rates[x, y])}
                for x, y in self.edges()
            ],
            "measure": {str(s): float(w) for s, w in zip(self.sites, self.measure)},
        }

    def digest(self) -> str:
        """Short content hash used to tag exported results."""
        blob = json.dumps(self.to_spec(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class StarStructure:
    M_star: float
    S_star: tuple[int, ...]
    kappa_star: int
    m_star: np.ndarray


def _is_exact(values) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values)


def _check_irreducible(rates: np.ndarray) -> None:
    n_comp, _ = csgraph.connected_components(rates > 0, directed=True, connection="strong")
    if n_comp != 1:
        raise NotIrreducible(f"rate graph has {n_comp} strongly connected components")


def stationary_distribution(rates: np.ndarray) -> np.ndarray:
    """Solve the global balance equations pi Q = 0, sum(pi) = 1."""
    k = rates.shape[0]
    Q = rates - np.diag(rates.sum(axis=1))
    A = np.vstack([Q.T, np.ones(k)])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi


def _check_balance_exact(rates, measure) -> None:
    k = len(measure)
    for x in range(k):
        for y in range(x + 1, k):
            if measure[x] * rates[x][y] != measure[y] * rates[y][x]:
                raise NotReversible(f"detailed balance fails on ({x}, {y})")


def _check_balance_float(rates: np.ndarray, measure: np.ndarray) -> None:
    flux = measure[:, None] * rates
    scale = np.maximum(np.abs(flux), np.abs(flux.T))
    bad = np.abs(flux - flux.T) > BALANCE_RTOL * np.maximum(scale, np.finfo(float).tiny)
    if bad.any():
        x, y = np.argwhere(bad)[0]
        raise NotReversible(f"detailed balance fails on ({x}, {y})")


def from_matrix(rates, measure=None, sites: Sequence | None = None) -> SiteGraph:
    """Validated :class:`SiteGraph` from a rate matrix.

    If ``measure`` is None it is computed from the global balance equations
    and detailed balance is then required; non-reversible walks are rejected.
    Entries given as ``int``/``Fraction`` are checked exactly.
    """
    raw_rates = [list(row) for row in rates]
    k = len(raw_rates)
    if k < 2 or any(len(row) != k for row in raw_rates):
        raise ValueError("rates must be a square matrix with at least two sites")
    flat = [v for row in raw_rates for v in row]
    R = np.array([[float(v) for v in row] for row in raw_rates])
    if (R < 0).any():
        raise ValueError("rates must be nonnegative")
    np.fill_diagonal(R, 0.0)
    _check_irreducible(R)

    if measure is None:
        m = stationary_distribution(R)
        if (m <= 0).any():
            raise InvalidMeasure("computed stationary measure is not positive")
        m = m / m.sum()
        _check_balance_float(R, m)
    else:
        raw_m = list(measure)
        if len(raw_m) != k:
            raise InvalidMeasure("measure length does not match number of sites")
        if _is_exact(raw_m) and _is_exact(flat):
            if any(v <= 0 for v in raw_m) or sum(raw_m) != 1:
                raise InvalidMeasure("measure must be positive and sum to one")
            _check_balance_exact(raw_rates, raw_m)
        m = np.array([float(v) for v in raw_m])
        if (m <= 0).any():
            raise InvalidMeasure("measure must be strictly positive")
        if abs(m.sum() - 1.0) > 1e-12:
            raise InvalidMeasure(f"measure sums to {m.sum()!r}, not 1")
        _check_balance_float(R, m)

    names = tuple(sites) if sites is not None else tuple(range(k))
    return SiteGraph(sites=names, rates=R, measure=m)


def build_graph(spec: Mapping) -> SiteGraph:
    """Build a graph from the JSON-style description.

    ``spec`` has ``sites`` (names), ``rates`` (list of ``{from, to, rate}``)
    and an optional ``measure`` mapping site -> weight, normalized on load.
    """
    sites = list(spec["sites"])
    pos = {s: i for i, s in enumerate(sites)}
    pos.update({str(s): i for i, s in enumerate(sites)})
    k = len(sites)
    R = [[0.0] * k for _ in range(k)]
    for entry in spec.get("rates", []):
        x, y = pos[entry["from"]], pos[entry["to"]]
        if x != y:
            R[x][y] = entry["rate"]
    measure = spec.get("measure")
    if measure is not None:
        w = [measure.get(s, measure.get(str(s))) for s in sites]
        if any(v is None for v in w):
            raise InvalidMeasure("measure must give a weight for every site")
        if _is_exact(w):
            total = sum(w)
            measure = [Fraction(v) / total for v in w]
        else:
            total = float(sum(w))
            if total <= 0:
                raise InvalidMeasure("measure weights must be positive")
            measure = [float(v) / total for v in w]
    return from_matrix(R, measure, sites=sites)


def ring(kappa: int, rate: float = 1.0) -> SiteGraph:
    """Symmetric nearest-neighbour walk on the cycle Z/kappa."""
    R = np.zeros((kappa, kappa))
    for x in range(kappa):
        R[x, (x + 1) % kappa] = rate
        R[x, (x - 1) % kappa] = rate
    return from_matrix(R, np.full(kappa, 1.0 / kappa))


def complete(kappa: int, rate: float = 1.0) -> SiteGraph:
    R = np.full((kappa, kappa), rate)
    np.fill_diagonal(R, 0.0)
    return from_matrix(R, np.full(kappa, 1.0 / kappa))


def from_conductances(conductance, measure) -> SiteGraph:
    """Reversible walk with r(x, y) = c(x, y) / m(x) for a symmetric conductance c."""
    C = np.asarray(conductance, dtype=float)
    m = np.asarray(measure, dtype=float)
    m = m / m.sum()
    return from_matrix(C / m[:, None], m)


def star_structure(g: SiteGraph) -> StarStructure:
    m = g.measure
    M = float(m.max())
    star = tuple(int(x) for x in np.flatnonzero(m >= M * (1.0 - STAR_RTOL)))
    m_star = m / M
    m_star[list(star)] = 1.0
    return StarStructure(M_star=M, S_star=star, kappa_star=len(star), m_star=m_star)


def dirichlet_form_S(g: SiteGraph, f) -> float:
    """D_S(f) = 1/2 sum_{x,y} m(x) r(x,y) (f(y) - f(x))^2."""
    f = np.asarray(f, dtype=float)
    diff = f[None, :] - f[:, None]
    return 0.5 * float(np.sum(g.measure[:, None] * g.rates * diff**2))


def equilibrium_potential_S(g: SiteGraph, A, B) -> np.ndarray:
    """Harmonic function equal to 1 on A and 0 on B, i.e. P_z[T_A < T_B]."""
    a, b = g.indices(A), g.indices(B)
    if not a or not b:
        raise ValueError("A and B must be nonempty")
    if set(a) & set(b):
        raise OverlappingSets("A and B intersect")
    f = np.zeros(g.kappa)
    f[a] = 1.0
    inner = [z for z in range(g.kappa) if z not in a and z not in b]
    if inner:
        # conductance Laplacian restricted to inner sites: symmetric positive definite
        C = g.measure[:, None] * g.rates
        L = np.diag(C.sum(axis=1)) - C
        rhs = C[np.ix_(inner, a)].sum(axis=1)
        f[inner] = np.linalg.solve(L[np.ix_(inner, inner)], rhs)
    return np.clip(f, 0.0, 1.0)


def capacity_S(g: SiteGraph, A, B) -> float:
    return dirichlet_form_S(g, equilibrium_potential_S(g, A, B))


def escape_capacity_S(g: SiteGraph, x, y) -> float:
    """m(x) lambda(x) P_x[T_y < T_x^+] via the embedded jump chain.

    Independent of :func:`capacity_S`; the two agree for reversible walks.
    """
    xi, yi = g.index(x), g.index(y)
    lam = g.total_rates()
    P = g.rates / lam[:, None]
    k = g.kappa
    others = [z for z in range(k) if z not in (xi, yi)]
    # h(z) = P_z[T_y < T_x] on the remaining sites
    h = np.zeros(k)
    h[yi] = 1.0
    if others:
        M = np.eye(len(others)) - P[np.ix_(others, others)]
        h[others] = np.linalg.solve(M, P[others, yi])
    escape = float(P[xi] @ h)
    return float(g.measure[xi] * lam[xi] * escape)
