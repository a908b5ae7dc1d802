"""Two-site profile and the tube lower comparator for capacities between wells."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateRange
from .graph import capacity_S
from .measure import MeasureTable, MetaPartition
from .model import ZrpModel


@dataclass(frozen=True)
class Profile:
    start: int
    G: np.ndarray = field(repr=False)
    Xi: float
    log_K: float
    weights: np.ndarray = field(repr=False)

    def form_value(self) -> float:
        """sum_i (G(i+1) - G(i))^2 / (a(i) a(N-1-k-i)) evaluated at the minimiser."""
        dG = np.diff(self.G)
        return float(np.sum(dG**2 / self.weights))


def profile_G_and_Xi(model: ZrpModel, N: int, k: int, ell_N: int) -> Profile:
    """Minimiser of sum_i (dG_i)^2 / (a(i) a(N-1-k-i)) over i in [ell_N - k, N - ell_N - 1]
    with G(ell_N - k) = 0 and G(N - ell_N) = 1, and its minimum value Xi_N."""
    if not (0 <= k <= ell_N and 2 * ell_N < N):
        raise DegenerateRange(f"need 0 <= k <= ell_N < N/2, got k={k}, ell_N={ell_N}, N={N}")
    i = np.arange(ell_N - k, N - ell_N)
    log_terms = model.log_a(i) + model.log_a(N - 1 - k - i)
    log_K = float(logsumexp(log_terms))
    steps = np.exp(log_terms - log_K)
    G = np.concatenate([[0.0], np.cumsum(steps)])
    G[-1] = 1.0
    return Profile(start=ell_N - k, G=G, Xi=float(np.exp(-log_K)), log_K=log_K,
                   weights=np.exp(log_terms))


def scaled_Xi(model: ZrpModel, N: int, k: int, ell_N: int) -> float:
    """N^{1+2 alpha} Xi_N, which tends to 1/I_alpha."""
    prof = profile_G_and_Xi(model, N, k, ell_N)
    return float(np.exp((1 + 2 * model.alpha) * np.log(N) - prof.log_K))


def _side_weights(model: ZrpModel, sites, k_max: int, caps: dict) -> np.ndarray:
    """W_k = sum over zeta on ``sites`` with |zeta| = k (and caps) of m_star^zeta / a(zeta)."""
    out = np.zeros(k_max + 1)
    out[0] = 1.0
    for z in sites:
        top = min(k_max, caps.get(z, k_max))
        j = np.arange(top + 1)
        seq = np.exp(j * np.log(model.star.m_star[z]) - model.log_a(j))
        out = np.convolve(out, seq)[: k_max + 1]
    return out


@dataclass(frozen=True)
class LowerComparator:
    value: float
    tube_ell: int
    tube_b: int | None
    pairs: dict


def tubes_overlap(S1, S2) -> bool:
    return len(S1) > 1 or len(S2) > 1


def lower_comparator(table: MeasureTable, partition: MetaPartition, S1_star,
                     ell: int | None = None, b: int | None = None) -> LowerComparator:
    """Tube lower bound for Cap_N(E_N(S1), E_N(S2)).

    (1/M_star) sum_{x,y} Cap_S(x,y) (N^alpha / Z_{N,S}) sum_{k<=ell} Xi_N(k) W_k(x,y)

    When several tubes share a well the tube depth defaults to
    (ell_N - 1) // 2 so that bonds counted twice lie inside a well.
    """
    model = table.model
    star = model.star
    N = table.N
    s1 = [model.graph.index(x) for x in S1_star]
    s2 = [x for x in star.S_star if x not in s1]
    overlap = tubes_overlap(s1, s2)
    ell_N = partition.ell_N
    b_min = min(partition.b_N.values()) if partition.b_N else None
    if ell is None:
        ell = (ell_N - 1) // 2 if overlap else ell_N
    if b is None and b_min is not None:
        b = b_min - 1 if overlap else b_min
    ell = min(ell, ell_N)
    caps = {z: b - 1 for z in range(model.kappa) if z not in star.S_star} if b is not None else {}
    log_pref = model.alpha * np.log(N) - table.logZ
    pairs = {}
    total = 0.0
    for x in s1:
        for y in s2:
            rest = [z for z in range(model.kappa) if z not in (x, y)]
            W = _side_weights(model, rest, ell, caps)
            acc = 0.0
            for k in range(ell + 1):
                if W[k] > 0:
                    acc += W[k] * profile_G_and_Xi(model, N, k, ell_N).Xi
            term = capacity_S(model.graph, [x], [y]) / star.M_star * np.exp(log_pref) * acc
            pairs[(x, y)] = term
            total += term
    return LowerComparator(value=float(total), tube_ell=int(ell), tube_b=b, pairs=pairs)
