"""Potential theory of the zero-range chain on E_N.

Capacities are computed from the equilibrium potential, the solution of the
harmonic problem ``L_N h = 0`` off ``A u B`` with ``h = 1`` on ``A`` and
``h = 0`` on ``B``.  Restricted to the interior, the conductance Laplacian is
symmetric positive definite; small systems are solved densely, mid-sized ones
by sparse LU and the largest by Jacobi-preconditioned conjugate gradients.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InsufficientWells, OverlappingSets, SolverDiverged, SpaceTooLarge
from .measure import MeasureTable, MetaPartition

logger = logging.getLogger(__name__)

DENSE_LIMIT = 2000
SPLU_LIMIT = 200_000
CG_RTOL = 1e-11
CG_MAXITER = 100_000
CG_ROUNDS = 30
WALK_RTOL = 1e-14
MAX_TRACE_ENTRIES = 50_000_000


@dataclass(frozen=True, eq=False)
class HarmonicSolution:
    values: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    residual: float
    method: str
    iterations: int
    capacity: float


def _as_index(table: MeasureTable, S) -> np.ndarray:
    idx = np.asarray(S)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    return np.unique(idx.astype(np.int64))


def dirichlet_form_N(table: MeasureTable, F, mask=None) -> float:
    """D_N(F) = 1/2 sum_{x != y} sum_eta mu(eta) g(eta_x) r(x,y) (F(sigma^{xy} eta) - F(eta))^2."""
    F = np.asarray(F, dtype=float)
    t = table.targets
    valid = t >= 0
    diff = np.where(valid, F[np.where(valid, t, 0)] - F[None, :], 0.0)
    terms = table.conductances() * diff**2
    if mask is not None:
        terms = terms[:, mask]
    return 0.5 * float(terms.sum())


def restricted_dirichlet(table: MeasureTable, F, A) -> float:
    """D_N(F; A): the same sum with eta restricted to A."""
    mask = np.zeros(table.space.size, dtype=bool)
    mask[_as_index(table, A)] = True
    return dirichlet_form_N(table, F, mask)


def conductance_matrix(table: MeasureTable) -> sp.csr_matrix:
    """Symmetric sparse matrix of edge conductances mu(eta) g(eta_x) r(x, y)."""
    return _conductance_matrix(table)


@lru_cache(maxsize=8)
def _conductance_matrix(table: MeasureTable) -> sp.csr_matrix:
    t = table.targets
    valid = t >= 0
    rows = np.broadcast_to(np.arange(table.space.size), t.shape)[valid]
    W = sp.coo_matrix((table.conductances()[valid], (rows, t[valid])),
                      shape=(table.space.size,) * 2).tocsr()
    return ((W + W.T) * 0.5).tocsr()


def generator_matrix(table: MeasureTable) -> sp.csr_matrix:
    """Sparse generator Q with Q(eta, sigma^{xy} eta) = g(eta_x) r(x, y)."""
    t = table.targets
    valid = t >= 0
    rows = np.broadcast_to(np.arange(table.space.size), t.shape)[valid]
    Q = sp.coo_matrix((table.rates[valid], (rows, t[valid])), shape=(table.space.size,) * 2).tocsr()
    return (Q - sp.diags(np.asarray(Q.sum(axis=1)).ravel())).tocsr()


def _refined_cg(M: sp.csr_matrix, rhs: np.ndarray, x0=None) -> tuple[np.ndarray, int]:
    """Jacobi-preconditioned CG with iterative refinement.

    Stationary weights can span many orders of magnitude, so a 2-norm stopping
    rule only resolves the heavy rows.  Each row of ``M`` carries its own scale
    and is evaluated to full relative precision, so restarting CG on the
    current residual resolves successively lighter rows.  Rounds stop once the
    random-walk residual ``max |r_i| / M_ii`` is below ``WALK_RTOL`` (relative
    to that of the right-hand side) or stalls.
    """
    diag = M.diagonal()
    precond = spla.LinearOperator(M.shape, matvec=lambda v: v / diag, dtype=float)
    count = [0]

    def _cb(_):
        count[0] += 1

    x = np.zeros_like(rhs) if x0 is None else np.asarray(x0, dtype=float).copy()
    scale = float(np.max(np.abs(rhs / diag))) or 1.0
    best, best_x, stalled = np.inf, x, 0
    for _ in range(CG_ROUNDS):
        r = rhs - M @ x
        walk = float(np.max(np.abs(r / diag))) / scale
        if walk < best:
            best, best_x, stalled = walk, x, 0
        else:
            stalled += 1
        if walk <= WALK_RTOL or stalled >= 3:
            break
        dx, _info = spla.cg(M, r, rtol=CG_RTOL, atol=0.0, maxiter=CG_MAXITER, M=precond, callback=_cb)
        x = x + dx
    logger.debug("refined CG: walk residual %.3e after %d iterations", best, count[0])
    return best_x, count[0]


def _solve_spd(M: sp.csr_matrix, rhs: np.ndarray, method: str, x0=None):
    n = M.shape[0]
    if method == "auto":
        method = "dense" if n < DENSE_LIMIT else "splu" if n <= SPLU_LIMIT else "cg"
    if method == "dense":
        x = scipy.linalg.solve(M.toarray(), rhs, assume_a="pos")
        iters = 0
    elif method == "splu":
        x = spla.splu(M.tocsc()).solve(rhs)
        iters = 0
    elif method == "cg":
        x, iters = _refined_cg(M, rhs, x0)
    else:
        raise ValueError(f"unknown method {method!r}")
    norm = np.linalg.norm(rhs)
    res = float(np.linalg.norm(rhs - M @ x) / norm) if norm > 0 else 0.0
    if method == "cg" and not res <= 10 * CG_RTOL:
        raise SolverDiverged(f"CG stopped at relative residual {res:.3e} after {iters} iterations")
    return x, res, method, iters


def equilibrium_potential(table: MeasureTable, A, B, method: str = "auto") -> HarmonicSolution:
    """h = P_eta[T_A < T_B] and Cap_N(A, B) = D_N(h)."""
    a, b = _as_index(table, A), _as_index(table, B)
    if a.size == 0 or b.size == 0:
        raise ValueError("A and B must be nonempty")
    if np.intersect1d(a, b).size:
        raise OverlappingSets("A and B intersect")
    n = table.space.size
    h = np.zeros(n)
    h[a] = 1.0
    interior = np.ones(n, dtype=bool)
    interior[a] = False
    interior[b] = False
    inner = np.flatnonzero(interior)
    res, used, iters = 0.0, "none", 0
    if inner.size:
        W = conductance_matrix(table)
        deg = np.asarray(W.sum(axis=1)).ravel()
        W_in = W[inner]
        L_ii = (sp.diags(deg[inner]) - W_in[:, inner]).tocsr()
        rhs = np.asarray(W_in[:, a].sum(axis=1)).ravel()
        x, res, used, iters = _solve_spd(L_ii, rhs, method)
        h[inner] = x
    cap = dirichlet_form_N(table, h)
    return HarmonicSolution(values=h, A=a, B=b, residual=res, method=used, iterations=iters, capacity=cap)


def capacity_N(table: MeasureTable, A, B, method: str = "auto") -> float:
    return equilibrium_potential(table, A, B, method=method).capacity


def point_capacities(table: MeasureTable, sources, target: int) -> np.ndarray:
    """Cap_N({eta}, {target}) for every eta in ``sources``.

    With the target grounded, Cap({eta}, {target}) is the reciprocal of the
    diagonal entry of the inverse reduced Laplacian, so one factorisation
    serves every source.
    """
    src = np.asarray(sources, dtype=np.int64)
    if np.any(src == target):
        raise OverlappingSets("a source coincides with the target")
    n = table.space.size
    keep = np.flatnonzero(np.arange(n) != target)
    W = conductance_matrix(table)
    deg = np.asarray(W.sum(axis=1)).ravel()
    L = (sp.diags(deg) - W).tocsr()[keep][:, keep].tocsc()
    pos = np.searchsorted(keep, src)
    lu = spla.splu(L)
    out = np.empty(src.size)
    for start in range(0, src.size, 256):
        cols = pos[start:start + 256]
        E = np.zeros((keep.size, cols.size))
        E[cols, np.arange(cols.size)] = 1.0
        X = lu.solve(E)
        out[start:start + 256] = 1.0 / X[cols, np.arange(cols.size)]
    return out


def hitting_probability_dense(table: MeasureTable, A, B) -> np.ndarray:
    """P_eta[T_A < T_B] from the embedded jump chain, by a dense absorbing-chain solve.

    Deliberately independent of the conductance formulation used by
    :func:`equilibrium_potential`.
    """
    a, b = _as_index(table, A), _as_index(table, B)
    n = table.space.size
    P = np.zeros((n, n))
    t = table.targets
    for e in range(t.shape[0]):
        ok = t[e] >= 0
        P[np.flatnonzero(ok), t[e][ok]] += table.rates[e][ok]
    P /= P.sum(axis=1, keepdims=True)
    h = np.zeros(n)
    h[a] = 1.0
    inner = np.setdiff1d(np.arange(n), np.union1d(a, b))
    if inner.size:
        M = np.eye(inner.size) - P[np.ix_(inner, inner)]
        h[inner] = np.linalg.solve(M, P[np.ix_(inner, a)].sum(axis=1))
    return h


def trace_rates_exact(table: MeasureTable, A) -> tuple[np.ndarray, np.ndarray]:
    """Jump rates of the trace of the chain on A.

    Returns ``(indices, R)`` with ``R[i, j]`` the rate from ``indices[i]`` to
    ``indices[j]``: the Schur complement ``Q_AA + Q_AB (-Q_BB)^{-1} Q_BA`` with
    its diagonal (censored returns) removed.
    """
    a = _as_index(table, A)
    n = table.space.size
    rest = np.setdiff1d(np.arange(n), a)
    if a.size * max(rest.size, 1) > MAX_TRACE_ENTRIES:
        raise SpaceTooLarge(f"trace on {a.size} states with {rest.size} excised is too large")
    Q = generator_matrix(table)
    R = Q[a][:, a].toarray()
    if rest.size:
        Q_br = Q[rest]
        Q_ba = Q_br[:, a].toarray()
        Q_bb = Q_br[:, rest].tocsc()
        X = spla.splu(-Q_bb).solve(Q_ba)
        R += Q[a][:, rest] @ X
    np.fill_diagonal(R, 0.0)
    return a, np.maximum(R, 0.0)


@dataclass(frozen=True)
class Lemma68Result:
    sites: tuple[int, ...]
    well_mass: np.ndarray
    rates_trace: np.ndarray
    rates_capacity: np.ndarray
    max_rel_diff: float
    tolerance: float = 1e-8

    @property
    def agree(self) -> bool:
        return self.max_rel_diff <= self.tolerance


def lemma68_rates(table: MeasureTable, partition: MetaPartition, method: str = "auto",
                  with_trace: bool = True) -> Lemma68Result:
    """Mean well-to-well rates r_N(x, y) of the trace on the wells, two ways.

    (i) mu-average of :func:`trace_rates_exact` over E^x_N x E^y_N;
    (ii) mu(E^x) r_N(x, y) = 1/2 [Cap(E^x, E^x') + Cap(E^y, E^y') - Cap(E^{xy}, E^{rest})],
    with the two-well case reducing to Cap(E^x, E^y).
    """
    star = partition.star
    k = len(star)
    if k < 2:
        raise InsufficientWells("need at least two maximal sites")
    wells = partition.wells
    mass = np.array([table.mass(wells[x]) for x in star])

    via_cap = np.zeros((k, k))
    if k == 2:
        c = capacity_N(table, wells[star[0]], wells[star[1]], method=method)
        via_cap[0, 1], via_cap[1, 0] = c / mass[0], c / mass[1]
    else:
        single = [capacity_N(table, wells[x], partition.others(x), method=method) for x in star]
        for i in range(k):
            for j in range(i + 1, k):
                pair = [star[i], star[j]]
                rest = [z for z in star if z not in pair]
                c_pair = capacity_N(table, partition.union(pair), partition.union(rest), method=method)
                flux = 0.5 * (single[i] + single[j] - c_pair)
                via_cap[i, j], via_cap[j, i] = flux / mass[i], flux / mass[j]

    via_trace = np.full((k, k), np.nan)
    if with_trace:
        idx, R = trace_rates_exact(table, partition.all_wells())
        lab = partition.labels[idx]
        w = table.weights[idx]
        via_trace = np.zeros((k, k))
        for i, x in enumerate(star):
            rows = lab == x
            for j, y in enumerate(star):
                if i != j:
                    via_trace[i, j] = float(w[rows] @ R[np.ix_(rows, lab == y)].sum(axis=1)) / mass[i]
        off = ~np.eye(k, dtype=bool)
        rel = np.abs(via_trace[off] - via_cap[off]) / np.abs(via_cap[off])
        diff = float(rel.max())
    else:
        diff = float("nan")
    return Lemma68Result(sites=tuple(star), well_mass=mass, rates_trace=via_trace,
                         rates_capacity=via_cap, max_rel_diff=diff)
