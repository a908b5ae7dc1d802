"""Stationary measure of the zero-range process and the metastable partition."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
from scipy.special import logsumexp

from .errors import WellsOverlap
from .model import ZrpModel
from .space import DEFAULT_MAX_STATES, ConfigSpace, enumerate_space


@dataclass(frozen=True, eq=False)
class MeasureTable:
    """mu_N on an enumerated E_N, with the move tables of the generator.

    ``targets[e, i]`` is the index reached from configuration ``i`` by the
    move ``edges[e] = (x, y)`` (``-1`` if site x is empty) and
    ``rates[e, i] = g(eta_x) r(x, y)``.
    """

    model: ZrpModel
    space: ConfigSpace
    log_weights: np.ndarray = field(repr=False)
    logZ: float

    @property
    def N(self) -> int:
        return self.space.N

    @property
    def Z_NS(self) -> float:
        return float(np.exp(self.logZ))

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.logZ)
        w.setflags(write=False)
        return w

    @cached_property
    def edges(self) -> list[tuple[int, int]]:
        return self.model.graph.edges()

    @cached_property
    def targets(self) -> np.ndarray:
        return np.stack([self.space.move_targets(x, y) for x, y in self.edges])

    @cached_property
    def rates(self) -> np.ndarray:
        r = self.model.graph.rates
        out = np.stack([self.model.g(self.space.counts[:, x]) * r[x, y] for x, y in self.edges])
        out[self.targets < 0] = 0.0
        return out

    @cached_property
    def total_rates(self) -> np.ndarray:
        return self.rates.sum(axis=0)

    def conductances(self) -> np.ndarray:
        """mu(eta) g(eta_x) r(x, y) for every move, shape (edges, states)."""
        return self.weights[None, :] * self.rates

    def mass(self, indices) -> float:
        idx = np.asarray(indices, dtype=np.int64)
        return float(np.sum(self.weights[idx])) if idx.size else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rank"] + [f"n{s}" for s in self.space.sites] + ["weight"])
            for i in range(self.space.size):
                writer.writerow([i, *self.space.counts[i].tolist(), repr(float(self.weights[i]))])


def log_unnormalized(model: ZrpModel, counts: np.ndarray) -> np.ndarray:
    """log of m_star^eta / a(eta) row by row."""
    log_m = np.log(model.star.m_star)
    c = np.asarray(counts)
    return c @ log_m - model.log_a(c).sum(axis=1)


def stationary_measure(model: ZrpModel, N: int, max_states: int = DEFAULT_MAX_STATES,
                       space: ConfigSpace | None = None) -> MeasureTable:
    """mu_N(eta) = N^alpha m_star^eta / (a(eta) Z_{N,S})."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if space is None:
        space = enumerate_space(N, model.kappa, max_states=max_states)
    logw = model.alpha * np.log(N) + log_unnormalized(model, space.counts)
    logw.setflags(write=False)
    return MeasureTable(model=model, space=space, log_weights=logw, logZ=float(logsumexp(logw)))


@dataclass(frozen=True, eq=False)
class MetaPartition:
    ell_N: int
    b_N: dict
    labels: np.ndarray = field(repr=False)
    star: tuple[int, ...]

    @cached_property
    def wells(self) -> dict[int, np.ndarray]:
        return {x: np.flatnonzero(self.labels == x) for x in self.star}

    @cached_property
    def delta(self) -> np.ndarray:
        return np.flatnonzero(self.labels < 0)

    def union(self, sites) -> np.ndarray:
        """E_N(S') for a subset S' of S_star."""
        sites = list(sites)
        if not sites:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(np.isin(self.labels, sites))

    def all_wells(self) -> np.ndarray:
        return self.union(self.star)

    def others(self, x: int) -> np.ndarray:
        """E_N(S_star minus {x})."""
        return self.union([y for y in self.star if y != x])

    def resolved(self) -> dict:
        return {"ell_N": int(self.ell_N), "b_N": {str(k): int(v) for k, v in self.b_N.items()}}


def meta_partition(model: ZrpModel, N: int, ell_N: int, b_N: Mapping | None = None,
                   space: ConfigSpace | None = None) -> MetaPartition:
    """Wells E^x_N = {eta_x >= N - ell_N, eta_z <= b_N(z) off S_star} and the rest Delta_N."""
    if 2 * ell_N >= N:
        raise WellsOverlap(f"2 ell_N = {2 * ell_N} >= N = {N}")
    if space is None:
        space = enumerate_space(N, model.kappa)
    star = model.star.S_star
    b_N = {int(k): int(v) for k, v in (b_N or {}).items()}
    c = space.counts
    ok = np.ones(space.size, dtype=bool)
    for z, cap in b_N.items():
        if z not in star:
            ok &= c[:, z] <= cap
    labels = np.full(space.size, -1, dtype=np.int64)
    for x in star:
        labels[(c[:, x] >= N - ell_N) & ok] = x
    labels.setflags(write=False)
    return MetaPartition(ell_N=int(ell_N), b_N=b_N, labels=labels, star=tuple(star))


@dataclass(frozen=True)
class TailMasses:
    per_site: np.ndarray
    spread: float
    remainder: float


def tail_masses(table: MeasureTable, ell: int) -> TailMasses:
    """mu_N of E^{x,ell} = {eta_x >= N - ell} for each x, and of E_{N,S}(ell), E_{N,S}(ell+1).

    E_{N,S}(l) holds the configurations with at most N - l particles per site.
    """
    N = table.N
    c = table.space.counts
    w = table.weights
    per_site = np.array([w[c[:, x] >= N - ell].sum() for x in range(c.shape[1])])
    peak = c.max(axis=1)
    return TailMasses(per_site=per_site,
                      spread=float(w[peak <= N - ell].sum()),
                      remainder=float(w[peak <= N - ell - 1].sum()))


def grand_canonical(model: ZrpModel, x: int, zeta: np.ndarray) -> np.ndarray:
    """Product measure prod_{z != x} m_star(z)^zeta_z / (a(zeta_z) Gamma_z) on rows of zeta."""
    others = [z for z in range(model.kappa) if z != x]
    lc = model.limits
    log_m = np.log(model.star.m_star[others])
    zeta = np.asarray(zeta)
    logq = zeta @ log_m - model.log_a(zeta).sum(axis=1) - np.log(lc.Gamma_x[others]).sum()
    return np.exp(logq)


def conditional_vs_grand_canonical(table: MeasureTable, x: int, ell_N: int) -> float:
    """TV distance between the law of (eta_z)_{z != x} given eta_x >= N - ell_N and
    the grand-canonical product measure (mass outside Sum zeta <= ell_N counted in full)."""
    model = table.model
    if x not in model.star.S_star:
        raise ValueError("x must be a maximal site")
    c = table.space.counts
    sel = c[:, x] >= table.N - ell_N
    p = table.weights[sel]
    p = p / p.sum()
    zeta = np.delete(c[sel], x, axis=1)
    q = grand_canonical(model, x, zeta)
    return float(0.5 * np.abs(p - q).sum() + 0.5 * max(0.0, 1.0 - q.sum()))
