"""Enumeration and ranking of particle configurations.

``E_{N,S0}`` is the set of count vectors on ``|S0|`` sites summing to ``N``.
Configurations are indexed in colexicographic order of their bar positions:
writing the vector in stars-and-bars form, the bars sit at
``p_j = c_0 + ... + c_j + j`` and the rank is ``sum_j C(p_j, j + 1)``
(the combinatorial number system).  Ranking is vectorised so that the
neighbour table of every particle move can be built in one pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import EmptySource, IndexOutOfRange, SpaceTooLarge

DEFAULT_MAX_STATES = 50_000_000


def space_size(N: int, k: int) -> int:
    return comb(N + k - 1, k - 1)


def _binomial_table(n_max: int, k_max: int) -> np.ndarray:
    table = np.zeros((n_max + 1, k_max + 1), dtype=np.int64)
    for n in range(n_max + 1):
        for j in range(min(n, k_max) + 1):
            table[n, j] = comb(n, j)
    return table


def _compositions(N: int, k: int) -> np.ndarray:
    """All length-k nonnegative integer vectors with sum N (unordered rows)."""
    if k == 1:
        return np.array([[N]], dtype=np.int64)
    if k == 2:
        first = np.arange(N + 1, dtype=np.int64)
        return np.column_stack([first, N - first])
    blocks = []
    for last in range(N + 1):
        head = _compositions(N - last, k - 1)
        blocks.append(np.column_stack([head, np.full(len(head), last, dtype=np.int64)]))
    return np.concatenate(blocks)


@dataclass(frozen=True, eq=False)
class ConfigSpace:
    N: int
    sites: tuple[int, ...]
    counts: np.ndarray = field(repr=False)
    _binom: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.counts.shape[0]

    @property
    def k(self) -> int:
        return len(self.sites)

    def __len__(self) -> int:
        return self.size

    def rank_many(self, counts) -> np.ndarray:
        c = np.asarray(counts, dtype=np.int64)
        if c.ndim == 1:
            c = c[None, :]
        if self.k == 1:
            return np.zeros(len(c), dtype=np.int64)
        bars = np.cumsum(c[:, :-1], axis=1) + np.arange(self.k - 1)
        return self._binom[bars, np.arange(1, self.k)].sum(axis=1)

    def rank(self, eta) -> int:
        eta = np.asarray(eta, dtype=np.int64)
        if eta.shape != (self.k,) or eta.sum() != self.N or (eta < 0).any():
            raise ValueError(f"{eta!r} is not a configuration of {self.N} particles on {self.k} sites")
        return int(self.rank_many(eta)[0])

    def unrank(self, index: int) -> np.ndarray:
        """Decode an index with the greedy combinatorial-number-system walk."""
        if not 0 <= index < self.size:
            raise IndexOutOfRange(f"index {index} outside [0, {self.size})")
        rem = int(index)
        bars = []
        top = self.N + self.k - 2
        for j in range(self.k - 1, 0, -1):
            p = top
            while comb(p, j) > rem:
                p -= 1
            bars.append(p)
            rem -= comb(p, j)
            top = p - 1
        bars = bars[::-1]
        out = np.empty(self.k, dtype=np.int64)
        prev = -1
        for j, p in enumerate(bars):
            out[j] = p - prev - 1
            prev = p
        out[-1] = self.N + self.k - 2 - prev
        return out

    def pure(self, site: int) -> int:
        """Index of the configuration with all N particles at ``site``."""
        eta = np.zeros(self.k, dtype=np.int64)
        eta[site] = self.N
        return self.rank(eta)

    def move_targets(self, x: int, y: int) -> np.ndarray:
        """Index of sigma^{xy} eta for every eta, or -1 where eta_x = 0."""
        src = self.counts[:, x] > 0
        moved = self.counts[src].copy()
        moved[:, x] -= 1
        moved[:, y] += 1
        out = np.full(self.size, -1, dtype=np.int64)
        out[src] = self.rank_many(moved)
        return out


def enumerate_space(N: int, S0, max_states: int = DEFAULT_MAX_STATES) -> ConfigSpace:
    """Enumerate E_{N,S0}; ``S0`` is a site count or a sequence of site labels."""
    sites = tuple(range(S0)) if isinstance(S0, (int, np.integer)) else tuple(S0)
    k = len(sites)
    if N < 0 or k < 1:
        raise ValueError("need N >= 0 and a nonempty site set")
    size = space_size(N, k)
    if size > max_states:
        raise SpaceTooLarge(f"E_N has {size} states (cap {max_states})")
    binom = _binomial_table(N + k, k)
    raw = _compositions(N, k)
    space = ConfigSpace(N=N, sites=sites, counts=raw, _binom=binom)
    order = np.empty(size, dtype=np.int64)
    order[space.rank_many(raw)] = np.arange(size)
    counts = raw[order]
    counts.setflags(write=False)
    return ConfigSpace(N=N, sites=sites, counts=counts, _binom=binom)


def apply_move(eta, x: int, y: int) -> np.ndarray:
    """sigma^{xy} eta: move one particle from x to y."""
    eta = np.asarray(eta, dtype=np.int64)
    if x == y:
        raise ValueError("x and y must differ")
    if eta[x] <= 0:
        raise EmptySource(f"site {x} is empty")
    out = eta.copy()
    out[x] -= 1
    out[y] += 1
    return out


def single_particle(k: int, x: int) -> np.ndarray:
    """The configuration with exactly one particle, at x."""
    out = np.zeros(k, dtype=np.int64)
    out[x] = 1
    return out


def pure_configuration(k: int, x: int, N: int) -> np.ndarray:
    """The configuration with N particles at x."""
    out = np.zeros(k, dtype=np.int64)
    out[x] = N
    return out
