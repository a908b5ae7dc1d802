"""Continuous-time simulation of the zero-range chain and condensate tracking.

Simulation runs on the enumerated state space: every state carries its
cumulative move rates and the index reached by each move, so one Gillespie
step is a table lookup.  Random numbers are drawn in chunks from a Philox
stream keyed by ``(master_seed, replica)`` and fed to numba kernels, which
makes every run reproducible regardless of chunking or scheduling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import stats

from .errors import (HorizonZero, NeverInA, NeverInWells, NotHitWithinHorizon,
                     TooFewTransitions)
from .measure import MeasureTable, MetaPartition

DEFAULT_EVENT_CAP = 10_000_000
CHUNK = 1 << 16


def replica_rng(master_seed: int, replica: int = 0) -> np.random.Generator:
    """Independent, reproducible stream for replica ``replica``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(replica),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class JumpTables:
    targets: np.ndarray
    cumrates: np.ndarray
    total: np.ndarray

    @classmethod
    def from_table(cls, table: MeasureTable) -> "JumpTables":
        t = np.ascontiguousarray(table.targets.T)
        r = np.ascontiguousarray(table.rates.T)
        return cls(targets=t, cumrates=np.cumsum(r, axis=1), total=r.sum(axis=1))


@numba.njit(cache=True)
def _step(s, u, targets, cumrates, total):
    x = u * total[s]
    row = cumrates[s]
    for e in range(row.shape[0]):
        if x < row[e] and targets[s, e] >= 0:
            return targets[s, e]
    for e in range(row.shape[0] - 1, -1, -1):
        if targets[s, e] >= 0:
            return targets[s, e]
    return s


@numba.njit(cache=True)
def _record(s, t, t_max, n_max, exps, unifs, targets, cumrates, total, out_s, out_t, start):
    """Advance up to len(exps) jumps, stopping past t_max or after n_max recorded events."""
    k = start
    for i in range(exps.shape[0]):
        if k >= n_max:
            return s, t, k, i, True
        hold = exps[i] / total[s]
        if t + hold > t_max:
            return s, t, k, i, True
        t += hold
        s = _step(s, unifs[i], targets, cumrates, total)
        out_s[k] = s
        out_t[k] = t
        k += 1
    return s, t, k, exps.shape[0], False


@numba.njit(cache=True)
def _hit(s, t, t_max, mask, exps, unifs, targets, cumrates, total):
    """Run until a state with mask[s] is entered; returns (state, time, done, consumed)."""
    if mask[s]:
        return s, t, True, 0
    for i in range(exps.shape[0]):
        hold = exps[i] / total[s]
        if t + hold > t_max:
            return s, t_max, True, i
        t += hold
        s = _step(s, unifs[i], targets, cumrates, total)
        if mask[s]:
            return s, t, True, i + 1
    return s, t, False, exps.shape[0]


@numba.njit(cache=True)
def _occupy(s, t, t_max, mask, acc, exps, unifs, targets, cumrates, total):
    """Accumulate time spent in mask up to t_max."""
    for i in range(exps.shape[0]):
        hold = exps[i] / total[s]
        if t + hold >= t_max:
            if mask[s]:
                acc += t_max - t
            return s, t_max, acc, True
        if mask[s]:
            acc += hold
        t += hold
        s = _step(s, unifs[i], targets, cumrates, total)
    return s, t, acc, False


@numba.njit(cache=True)
def _wells(s, t, cur, sojourn, labels, time_at, counts, soj_out, soj_from, n_soj, n_target,
           exps, unifs, targets, cumrates, total):
    """Track the trace of the chain on the wells.

    ``cur`` is the last well visited (-1 before the first); ``sojourn`` the
    trace time accumulated in it since arriving.  Stops once ``n_target``
    well-to-well transitions have been recorded.
    """
    for i in range(exps.shape[0]):
        hold = exps[i] / total[s]
        lab = labels[s]
        if lab >= 0:
            time_at[lab] += hold
            sojourn += hold
        t += hold
        s = _step(s, unifs[i], targets, cumrates, total)
        new = labels[s]
        if new >= 0:
            if cur < 0:
                cur = new
                sojourn = 0.0
            elif new != cur:
                counts[cur, new] += 1
                soj_out[n_soj] = sojourn
                soj_from[n_soj] = cur
                n_soj += 1
                cur = new
                sojourn = 0.0
                if n_soj >= n_target:
                    return s, t, cur, sojourn, n_soj, i + 1, True
    return s, t, cur, sojourn, n_soj, exps.shape[0], False


@numba.njit(cache=True)
def _max_tracker(counts_at, start_site):
    n = counts_at.shape[0]
    out = np.empty(n, dtype=np.int64)
    cur = start_site
    for i in range(n):
        row = counts_at[i]
        best = cur
        for z in range(row.shape[0]):
            if row[z] > row[best]:
                best = z
        cur = best
        out[i] = cur
    return out


class _Stream:
    """Chunked exponential/uniform draws from one Philox stream."""

    def __init__(self, rng: np.random.Generator, chunk: int = CHUNK):
        self.rng = rng
        self.chunk = chunk

    def next(self):
        n = self.chunk
        self.chunk = min(self.chunk * 2, 1 << 20)
        return self.rng.standard_exponential(n), self.rng.random(n)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    seed: int
    total_time: float

    def __len__(self) -> int:
        return len(self.times)

    def durations(self) -> np.ndarray:
        return np.diff(np.append(self.times, self.total_time))


def simulate(table: MeasureTable, eta0: int, *, horizon_time: float | None = None,
             horizon_jumps: int | None = None, seed: int = 0, replica: int = 0,
             event_cap: int = DEFAULT_EVENT_CAP, tables: JumpTables | None = None) -> Trajectory:
    """Exact Gillespie path from configuration index ``eta0``.

    The run stops at ``horizon_time`` (the last state is held until then),
    after ``horizon_jumps`` jumps, or at ``event_cap`` stored events.
    """
    if horizon_time is None and horizon_jumps is None:
        raise HorizonZero("give a time or jump horizon")
    if (horizon_time is not None and horizon_time <= 0) or (horizon_jumps is not None and horizon_jumps <= 0):
        raise HorizonZero("horizon must be positive")
    jt = tables or JumpTables.from_table(table)
    n_max = min(horizon_jumps if horizon_jumps is not None else event_cap, event_cap)
    t_max = horizon_time if horizon_time is not None else math.inf
    out_s = np.empty(n_max + 1, dtype=np.int64)
    out_t = np.empty(n_max + 1)
    out_s[0], out_t[0] = eta0, 0.0
    s, t, k = int(eta0), 0.0, 1
    stream = _Stream(replica_rng(seed, replica))
    done = False
    while not done:
        exps, unifs = stream.next()
        s, t, k, _, done = _record(s, t, t_max, n_max + 1, exps, unifs, jt.targets, jt.cumrates,
                                   jt.total, out_s, out_t, k)
    total = horizon_time if horizon_time is not None else float(out_t[k - 1])
    return Trajectory(times=out_t[:k].copy(), states=out_s[:k].copy(), seed=seed, total_time=total)


def _mask(table: MeasureTable, A) -> np.ndarray:
    A = np.asarray(A)
    if A.dtype == bool:
        return A
    m = np.zeros(table.space.size, dtype=bool)
    m[A.astype(np.int64)] = True
    return m


def hitting_time(traj: Trajectory, A) -> float:
    """First time the recorded path is in A (0 if it starts there)."""
    A = np.asarray(A)
    inside = A[traj.states] if A.dtype == bool else np.isin(traj.states, A)
    hits = np.flatnonzero(inside)
    if hits.size == 0:
        raise NotHitWithinHorizon("path never enters A")
    return float(traj.times[hits[0]])


def hitting_times(table: MeasureTable, eta0: int, A, replicas: int, seed: int,
                  max_time: float = math.inf) -> np.ndarray:
    """Online first-entry times of A over independent replicas (nan if not hit by max_time)."""
    mask = _mask(table, A)
    jt = JumpTables.from_table(table)
    out = np.empty(replicas)
    for r in range(replicas):
        stream = _Stream(replica_rng(seed, r), chunk=256)
        s, t, done = int(eta0), 0.0, False
        while not done:
            exps, unifs = stream.next()
            s, t, done, _ = _hit(s, t, max_time, mask, exps, unifs, jt.targets, jt.cumrates, jt.total)
        out[r] = t if mask[s] else np.nan
    return out


def mean_hitting_time_exact(table: MeasureTable, A) -> np.ndarray:
    """E_eta[T_A] for every eta from the linear system (-Q) u = 1 off A."""
    import scipy.sparse.linalg as spla

    from .potential import generator_matrix

    mask = _mask(table, A)
    rest = np.flatnonzero(~mask)
    u = np.zeros(table.space.size)
    if rest.size:
        Q = generator_matrix(table)[rest][:, rest].tocsc()
        u[rest] = spla.splu(-Q).solve(np.ones(rest.size))
    return u


def trace_path(traj: Trajectory, A) -> Trajectory:
    """Trace of the path on A: time outside A is cut out and the gaps closed."""
    A = np.asarray(A)
    inside = A[traj.states] if A.dtype == bool else np.isin(traj.states, A)
    if not inside.any():
        raise NeverInA("trajectory never visits A")
    dur = traj.durations()[inside]
    states = traj.states[inside]
    starts = np.concatenate([[0.0], np.cumsum(dur)[:-1]])
    keep = np.concatenate([[True], states[1:] != states[:-1]])
    return Trajectory(times=starts[keep], states=states[keep], seed=traj.seed, total_time=float(dur.sum()))


@dataclass(frozen=True, eq=False)
class CondensatePath:
    times: np.ndarray = field(repr=False)
    sites: np.ndarray = field(repr=False)
    total_time: float
    mode: str
    scale: float

    def sojourns(self) -> tuple[np.ndarray, np.ndarray]:
        """Completed sojourns (site, duration); the final censored one is dropped."""
        d = np.diff(self.times)
        return self.sites[:-1], d


def condensate_path(traj: Trajectory, table: MeasureTable, partition: MetaPartition,
                    mode: str = "trace", rescale: bool = True) -> CondensatePath:
    """Position of the condensate along a path.

    ``trace``: Psi_N applied to the trace of the path on the wells.
    ``max``: the most occupied site, which only changes when another site
    becomes strictly larger.
    """
    N = table.N
    scale = float(N ** (1.0 + table.model.alpha)) if rescale else 1.0
    if mode == "trace":
        wells = partition.labels >= 0
        if not wells[traj.states].any():
            raise NeverInWells("trajectory never visits a well")
        tr = trace_path(traj, wells)
        labels = partition.labels[tr.states]
        keep = np.concatenate([[True], labels[1:] != labels[:-1]])
        return CondensatePath(times=tr.times[keep] / scale, sites=labels[keep],
                              total_time=tr.total_time / scale, mode=mode, scale=scale)
    if mode == "max":
        counts = table.space.counts[traj.states]
        first = int(np.argmax(counts[0]))
        sites = _max_tracker(np.ascontiguousarray(counts), first)
        keep = np.concatenate([[True], sites[1:] != sites[:-1]])
        return CondensatePath(times=traj.times[keep] / scale, sites=sites[keep],
                              total_time=traj.total_time / scale, mode=mode, scale=scale)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class RateEstimate:
    sites: tuple
    rates: np.ndarray
    counts: np.ndarray
    time_at: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def stderr(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.counts > 0, self.rates / np.sqrt(self.counts), np.nan)


def rate_estimate(counts: np.ndarray, time_at: np.ndarray, sites, level: float = 0.95) -> RateEstimate:
    """rate(x, y) = #(x -> y) / time at x with exact Poisson (chi-square) intervals."""
    counts = np.asarray(counts, dtype=float)
    time_at = np.asarray(time_at, dtype=float)
    a = 1.0 - level
    with np.errstate(divide="ignore", invalid="ignore"):
        T = time_at[:, None]
        rates = np.where(T > 0, counts / T, np.nan)
        lo = np.where(counts > 0, stats.chi2.ppf(a / 2, 2 * counts) / (2 * T), 0.0)
        hi = stats.chi2.ppf(1 - a / 2, 2 * counts + 2) / (2 * T)
    np.fill_diagonal(rates, 0.0)
    return RateEstimate(sites=tuple(sites), rates=rates, counts=counts, time_at=time_at, lower=lo, upper=hi)


def empirical_generator(path: CondensatePath, sites=None, level: float = 0.95) -> RateEstimate:
    if len(path.sites) < 3:
        raise TooFewTransitions(f"{len(path.sites) - 1} transitions observed, need at least 2")
    sites = tuple(sorted(set(path.sites.tolist()))) if sites is None else tuple(sites)
    pos = {s: i for i, s in enumerate(sites)}
    k = len(sites)
    counts = np.zeros((k, k))
    time_at = np.zeros(k)
    ends = np.append(path.times[1:], path.total_time)
    for s, t0, t1 in zip(path.sites, path.times, ends):
        time_at[pos[int(s)]] += t1 - t0
    for a, b in zip(path.sites[:-1], path.sites[1:]):
        counts[pos[int(a)], pos[int(b)]] += 1
    return rate_estimate(counts, time_at, sites, level)


@dataclass(frozen=True)
class TunnelingRun:
    sites: tuple
    counts: np.ndarray
    time_at: np.ndarray
    sojourns: np.ndarray
    sojourn_from: np.ndarray
    jumps: int
    raw_time: float
    scale: float
    seed: int

    def estimate(self, level: float = 0.95) -> RateEstimate:
        return rate_estimate(self.counts, self.time_at / self.scale, self.sites, level)


def tunneling_run(table: MeasureTable, partition: MetaPartition, eta0: int, transitions: int,
                  seed: int, replica: int = 0, max_jumps: int = 10**10) -> TunnelingRun:
    """Stream a path and record the well-to-well motion of its trace on the wells."""
    star = partition.star
    pos = {x: i for i, x in enumerate(star)}
    labels = np.array([pos.get(int(l), -1) for l in partition.labels], dtype=np.int64)
    jt = JumpTables.from_table(table)
    k = len(star)
    time_at = np.zeros(k)
    counts = np.zeros((k, k), dtype=np.int64)
    soj = np.empty(transitions)
    soj_from = np.empty(transitions, dtype=np.int64)
    stream = _Stream(replica_rng(seed, replica), chunk=1 << 20)
    s, t = int(eta0), 0.0
    cur = int(labels[s])
    sojourn, n_soj, jumps = 0.0, 0, 0
    done = False
    while not done and jumps < max_jumps:
        exps, unifs = stream.next()
        s, t, cur, sojourn, n_soj, used, done = _wells(
            s, t, cur, sojourn, labels, time_at, counts, soj, soj_from, n_soj, transitions,
            exps, unifs, jt.targets, jt.cumrates, jt.total)
        jumps += used
    scale = float(table.N ** (1.0 + table.model.alpha))
    return TunnelingRun(sites=tuple(star), counts=counts, time_at=time_at, sojourns=soj[:n_soj] / scale,
                        sojourn_from=soj_from[:n_soj], jumps=jumps, raw_time=t, scale=scale, seed=seed)


def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class M1Result:
    x: int
    minimum: float
    worst_pair: tuple
    method: str
    intervals: dict = field(default_factory=dict)


def check_M1(table: MeasureTable, partition: MetaPartition, x: int, pairs=None, *,
             exact: bool | None = None, replicas: int = 1000, seed: int = 0) -> M1Result:
    """inf over (eta, xi) in E^x_N of P_eta[T_{xi} < T_{E_N(S_star minus x)}].

    Exact (one harmonic solve per target xi) for small spaces, otherwise a
    Monte Carlo estimate with Wilson intervals over the given pairs.
    """
    from .potential import equilibrium_potential

    well = partition.wells[x]
    avoid = partition.others(x)
    if exact is None:
        exact = table.space.size <= 20_000
    if exact:
        targets = well if pairs is None else np.unique([p[1] for p in pairs])
        best, worst = 1.0, None
        for xi in targets:
            h = equilibrium_potential(table, [xi], avoid).values
            starts = well if pairs is None else np.array([p[0] for p in pairs if p[1] == xi])
            i = int(np.argmin(h[starts]))
            if h[starts[i]] < best or worst is None:
                best, worst = min(best, float(h[starts[i]])), (int(starts[i]), int(xi))
        return M1Result(x=x, minimum=best, worst_pair=worst, method="exact")
    if pairs is None:
        raise ValueError("Monte Carlo mode needs explicit (eta, xi) pairs")
    jt = JumpTables.from_table(table)
    best, worst, intervals = 1.0, None, {}
    for p_i, (eta, xi) in enumerate(pairs):
        mask = np.zeros(table.space.size, dtype=bool)
        mask[avoid] = True
        mask[xi] = True
        wins = 0
        for r in range(replicas):
            stream = _Stream(replica_rng(seed, p_i * replicas + r), chunk=256)
            s, t, done = int(eta), 0.0, False
            while not done:
                exps, unifs = stream.next()
                s, t, done, _ = _hit(s, t, math.inf, mask, exps, unifs, jt.targets, jt.cumrates, jt.total)
            wins += int(s == xi)
        est = wins / replicas
        intervals[(int(eta), int(xi))] = wilson_interval(wins, replicas)
        if worst is None or est < best:
            best, worst = est, (int(eta), int(xi))
    return M1Result(x=x, minimum=best, worst_pair=worst, method="monte-carlo", intervals=intervals)


@dataclass(frozen=True)
class M3Result:
    T: float
    starts: np.ndarray
    means: np.ndarray
    stderr: np.ndarray
    stationary_bound: np.ndarray

    @property
    def estimate(self) -> float:
        return float(self.means.max()) if self.means.size else 0.0


def check_M3(table: MeasureTable, partition: MetaPartition, T: float, replicas: int, seed: int,
             starts=None) -> M3Result:
    """E_eta[int_0^T 1{eta(s N^{1+alpha}) in Delta_N} ds] for starting wells configurations.

    ``stationary_bound`` is T mu(Delta)/mu(eta), an upper bound from stationarity.
    """
    if T <= 0:
        raise HorizonZero("T must be positive")
    if starts is None:
        starts = np.array([table.space.pure(x) for x in partition.star])
    starts = np.asarray(starts, dtype=np.int64)
    delta = partition.delta
    mu_delta = table.mass(delta)
    if delta.size == 0:
        z = np.zeros(len(starts))
        return M3Result(T=T, starts=starts, means=z, stderr=z, stationary_bound=z)
    mask = _mask(table, delta)
    scale = float(table.N ** (1.0 + table.model.alpha))
    t_max = T * scale
    jt = JumpTables.from_table(table)
    means, ses = np.empty(len(starts)), np.empty(len(starts))
    for j, eta in enumerate(starts):
        acc = np.empty(replicas)
        for r in range(replicas):
            stream = _Stream(replica_rng(seed, j * replicas + r))
            s, t, a, done = int(eta), 0.0, 0.0, False
            while not done:
                exps, unifs = stream.next()
                s, t, a, done = _occupy(s, t, t_max, mask, a, exps, unifs, jt.targets, jt.cumrates, jt.total)
            acc[r] = a / scale
        means[j] = acc.mean()
        ses[j] = acc.std(ddof=1) / math.sqrt(replicas) if replicas > 1 else np.nan
    bound = T * mu_delta / table.weights[starts]
    return M3Result(T=T, starts=starts, means=means, stderr=ses, stationary_bound=bound)
