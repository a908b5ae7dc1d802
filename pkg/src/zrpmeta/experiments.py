"""Experiment drivers: configuration, finite-N sweeps and report assembly.

Every driver returns an :class:`ExperimentReport` holding the resolved
configuration (with the well scales actually used at each N), one tidy row per
measurement and a summary.  ``hard_failures`` lists violated hard assertions;
the CLI exits nonzero iff it is nonempty.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import simulation as sim
from .bounds import lower_comparator
from .errors import DegenerateScale
from .extrapolate import convergence_report
from .io import capacity_record, resolve_graph, write_csv, write_json
from .measure import (MetaPartition, conditional_vs_grand_canonical, meta_partition,
                      stationary_measure, tail_masses)
from .model import ZrpModel, capacity_limit, default_scales, tunneling_rates
from .potential import equilibrium_potential, lemma68_rates, point_capacities
from .space import DEFAULT_MAX_STATES
from .testfunction import DEFAULT_EPSILON, build_test_spec, upper_bound_estimate

logger = logging.getLogger(__name__)

SANDWICH_RTOL = 1e-9


@dataclass
class ExperimentConfig:
    """Resolved settings of one experiment.

    ``scales`` is ``"default"``, ``"m1"`` (largest ell_N not above the default
    whose exact (M1) probability reaches ``m1_threshold``) or a mapping with
    ``ell`` (an int or a per-N mapping) and optional ``b``.
    """

    graph: object = "complete:2"
    alpha: float = 2.0
    Ns: list = field(default_factory=lambda: [50, 100, 200, 400])
    scales: object = "default"
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0
    replicas: int = 100
    transitions: int = 1000
    horizon_time: float = 0.1
    horizon_jumps: int | None = None
    out: str = "results"
    tolerance: float | None = None
    S1_star: list | None = None
    method: str = "auto"
    m1_threshold: float = 0.95
    h1_exact_limit: int = 5000
    h1_samples: int = 500
    fit_points: int | None = None
    max_states: int = DEFAULT_MAX_STATES

    def __post_init__(self):
        self.Ns = [int(n) for n in self.Ns]
        if any(b <= a for a, b in zip(self.Ns, self.Ns[1:])):
            raise ValueError("N schedule must be strictly increasing")
        if not self.Ns:
            raise ValueError("N schedule is empty")

    def model(self) -> ZrpModel:
        return ZrpModel(float(self.alpha), resolve_graph(self.graph))

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if not isinstance(d["graph"], (str, dict)):
            d["graph"] = self.model().graph.to_spec()
        return d

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


@dataclass
class ExperimentReport:
    name: str
    config: dict
    rows: list
    summary: dict
    hard_failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.hard_failures

    def as_dict(self) -> dict:
        return {"experiment": self.name, "config": self.config, "summary": self.summary,
                "hard_failures": self.hard_failures, "passed": self.passed, "rows": self.rows}

    def write(self, out_dir=None) -> tuple[Path, Path]:
        out = Path(out_dir if out_dir is not None else self.config.get("out", "results"))
        return (write_json(out / f"{self.name}.json", self.as_dict()),
                write_csv(out / f"{self.name}.csv", self.rows))


def resolve_scales(config: ExperimentConfig, model: ZrpModel, N: int, table=None) -> tuple[int, dict]:
    """ell_N and b_N(z) for one N under the configured policy."""
    pol = config.scales
    ell, b = default_scales(N, model)
    if pol == "default":
        return ell, b
    if pol == "m1":
        table = table or stationary_measure(model, N, config.max_states)
        for cand in range(ell, 0, -1):
            part = meta_partition(model, N, cand, b, table.space)
            worst = min(sim.check_M1(table, part, x, exact=True).minimum for x in part.star)
            if worst >= config.m1_threshold:
                return cand, b
        raise DegenerateScale(f"no ell_N reaches M1 >= {config.m1_threshold} at N = {N}")
    if isinstance(pol, dict):
        e = pol.get("ell", ell)
        if isinstance(e, dict):
            e = e.get(str(N), e.get(N, ell))
        bb = {int(k): int(v) for k, v in pol.get("b", b).items()}
        if 2 * int(e) >= N:
            raise DegenerateScale(f"ell_N = {e} is not below N/2 for N = {N}")
        return int(e), bb
    raise ValueError(f"unknown scale policy {pol!r}")


def _setup(config: ExperimentConfig, N: int):
    model = config.model()
    table = stationary_measure(model, N, config.max_states)
    ell, b = resolve_scales(config, model, N, table)
    part = meta_partition(model, N, ell, b, table.space)
    return model, table, part


def _resolved(config: ExperimentConfig, scales: dict) -> dict:
    d = config.as_dict()
    d["resolved_scales"] = scales
    return d


def _monotone(values, decreasing: bool = True) -> bool:
    v = np.asarray(values, dtype=float)
    d = np.diff(v)
    return bool(np.all(d < 0) if decreasing else np.all(d > 0))


def run_zk(config: ExperimentConfig) -> ExperimentReport:
    """Partition functions Z_{N,S} against their limit Z_S."""
    model = config.model()
    target = model.limits.Z_S
    rows = []
    for N in config.Ns:
        t0 = time.perf_counter()
        table = stationary_measure(model, N, config.max_states)
        rows.append({"N": N, "states": table.space.size, "Z_NS": table.Z_NS,
                     "seconds": time.perf_counter() - t0})
    rep = convergence_report(config.Ns, [r["Z_NS"] for r in rows], target,
                             config.tolerance if config.tolerance is not None else 0.01, config.fit_points)
    return ExperimentReport("zk", _resolved(config, {}), rows,
                            {"target": target, "convergence": rep.as_dict()})


def run_mt1(config: ExperimentConfig, S1_star=None) -> ExperimentReport:
    """N^{1+alpha} Cap_N(E_N(S1), E_N(S2)) with its lower comparator and upper test-function bound."""
    model = config.model()
    star = model.star
    S1 = list(S1_star if S1_star is not None else (config.S1_star or [star.S_star[0]]))
    s1 = [model.graph.index(x) for x in S1]
    if star.kappa_star < 2 or not set(s1) < set(star.S_star):
        raise ValueError("S1_star must be a nonempty proper subset of S_star")
    target = capacity_limit(model, s1)
    spec = build_test_spec(model, config.epsilon)
    rows, records, scales, failures = [], [], {}, []
    for N in config.Ns:
        t0 = time.perf_counter()
        _, table, part = _setup(config, N)
        A = part.union(s1)
        B = part.union([y for y in star.S_star if y not in s1])
        sol = equilibrium_potential(table, A, B, method=config.method)
        solve_s = time.perf_counter() - t0
        lower = lower_comparator(table, part, s1)
        upper = upper_bound_estimate(table, spec, s1, part)
        f = N ** (1.0 + model.alpha)
        ok_low = lower.value <= sol.capacity * (1 + SANDWICH_RTOL)
        ok_up = sol.capacity <= upper.bounded * (1 + SANDWICH_RTOL)
        if not (ok_low and ok_up):
            failures.append(f"sandwich violated at N={N}: {lower.value!r} <= {sol.capacity!r} <= {upper.bounded!r}")
        scales[N] = part.resolved()
        records.append(capacity_record(N, model, A, B, sol.capacity, sol.residual, solve_s))
        rows.append({"N": N, "ell_N": part.ell_N, "states": table.space.size, "method": sol.method,
                     "residual": sol.residual, "scaled_cap": f * sol.capacity,
                     "scaled_lower": f * lower.value, "scaled_upper": f * upper.bounded,
                     "scaled_upper_unconstrained": f * upper.total, "admissible": upper.admissible,
                     "sandwich": bool(ok_low and ok_up), "seconds": time.perf_counter() - t0})
    rep = convergence_report(config.Ns, [r["scaled_cap"] for r in rows], target,
                             config.tolerance if config.tolerance is not None else 0.05, config.fit_points)
    summary = {"target": target, "S1_star": s1, "convergence": rep.as_dict(),
               "sandwich_ok": not failures, "capacity_records": records}
    return ExperimentReport("mt1", _resolved(config, scales), rows, summary, failures)


def _h1_ratio(config, table, part, x, rng) -> tuple[float, bool]:
    well = part.wells[x]
    xi = table.space.pure(x)
    sources = well[well != xi]
    sampled = sources.size > config.h1_exact_limit
    if sampled:
        sources = rng.choice(sources, size=config.h1_samples, replace=False)
    num = equilibrium_potential(table, well, part.others(x), method=config.method).capacity
    den = float(point_capacities(table, sources, xi).min())
    return num / den, bool(sampled)


def run_h_conditions(config: ExperimentConfig) -> ExperimentReport:
    """(H2) mass ratio, (H1) capacity ratio and (H0) rescaled mean rates along the schedule."""
    model = config.model()
    star = model.star.S_star
    target = tunneling_rates(model)
    rows, scales = [], {}
    rng = sim.replica_rng(config.seed, 0)
    for N in config.Ns:
        t0 = time.perf_counter()
        _, table, part = _setup(config, N)
        scales[N] = part.resolved()
        mu_delta = table.mass(part.delta)
        h2 = max(mu_delta / table.mass(part.wells[x]) for x in star)
        h1s = [_h1_ratio(config, table, part, x, rng) for x in star]
        lem = lemma68_rates(table, part, method=config.method, with_trace=False)
        scaled = lem.rates_capacity * N ** (1.0 + model.alpha)
        off = ~np.eye(len(star), dtype=bool)
        gap = float(np.max(np.abs(scaled[off] - target[off]) / target[off]))
        rows.append({"N": N, "ell_N": part.ell_N, "states": table.space.size, "H2": h2,
                     "H1": max(h for h, _ in h1s), "H1_sampled": any(s for _, s in h1s),
                     "H0_min": float(scaled[off].min()), "H0_max": float(scaled[off].max()),
                     "H0_gap": gap, "seconds": time.perf_counter() - t0})
    summary = {
        "H0_target": target,
        "H2_decreasing": _monotone([r["H2"] for r in rows]),
        "H1_decreasing": _monotone([r["H1"] for r in rows]),
        "H0_gap_decreasing": _monotone([r["H0_gap"] for r in rows]),
        "H2_final": rows[-1]["H2"],
        "H1_final": rows[-1]["H1"],
    }
    if len(rows) >= 3 and len(star) == 2:
        rep = convergence_report(config.Ns, [r["H0_max"] for r in rows], float(target[0, 1]),
                                 config.tolerance if config.tolerance is not None else 0.05, config.fit_points)
        summary["H0_convergence"] = rep.as_dict()
    return ExperimentReport("hcond", _resolved(config, scales), rows, summary)


def run_tunneling(config: ExperimentConfig) -> ExperimentReport:
    """Simulated well-to-well motion against the exact trace rates, plus (M1) and (M3)."""
    model = config.model()
    star = model.star.S_star
    rows, scales, per_N = [], {}, []
    for i, N in enumerate(config.Ns):
        t0 = time.perf_counter()
        _, table, part = _setup(config, N)
        scales[N] = part.resolved()
        f = N ** (1.0 + model.alpha)
        lem = lemma68_rates(table, part, method=config.method, with_trace=table.space.size <= 20_000)
        exact = lem.rates_capacity * f
        start = table.space.pure(star[0])
        run = sim.tunneling_run(table, part, start, config.transitions, seed=config.seed, replica=i)
        est = run.estimate()
        worst_z = 0.0
        for a, x in enumerate(star):
            for b, y in enumerate(star):
                if a != b:
                    se = est.stderr[a, b]
                    z = abs(est.rates[a, b] - exact[a, b]) / se if se > 0 else math.inf
                    worst_z = max(worst_z, z)
                    rows.append({"N": N, "kind": "rate", "from": x, "to": y, "estimate": est.rates[a, b],
                                 "stderr": se, "lower": est.lower[a, b], "upper": est.upper[a, b],
                                 "exact": exact[a, b], "z": z, "transitions": int(est.counts[a, b])})
        ks = {}
        for a, x in enumerate(star):
            soj = run.sojourns[run.sojourn_from == a]
            if soj.size >= 2:
                res = stats.kstest(soj, "expon", args=(0.0, 1.0 / exact[a].sum()))
                ks[x] = float(res.pvalue)
                rows.append({"N": N, "kind": "ks", "from": x, "estimate": float(res.statistic),
                             "p_value": float(res.pvalue), "transitions": int(soj.size)})
        m1 = min(sim.check_M1(table, part, x, exact=True).minimum for x in star) \
            if table.space.size <= 20_000 else float("nan")
        m3 = sim.check_M3(table, part, config.horizon_time, config.replicas, seed=config.seed + 1 + i)
        rows.append({"N": N, "kind": "M1", "estimate": m1})
        rows.append({"N": N, "kind": "M3", "estimate": m3.estimate, "stderr": float(m3.stderr.max()),
                     "stationary_bound": float(m3.stationary_bound.min())})
        per_N.append({"N": N, "ell_N": part.ell_N, "max_z": worst_z, "ks_p": ks, "M1": m1,
                      "M3": m3.estimate, "jumps": run.jumps, "transitions": int(run.counts.sum()),
                      "trace_identity_rel_diff": lem.max_rel_diff, "seconds": time.perf_counter() - t0})
    summary = {"per_N": per_N, "limit_rates": tunneling_rates(model),
               "rates_within_3se": all(p["max_z"] <= 3 for p in per_N),
               "ks_pass_1pct": all(v >= 0.01 for p in per_N for v in p["ks_p"].values()),
               "M3_decreasing": _monotone([p["M3"] for p in per_N]) if len(per_N) > 1 else None}
    return ExperimentReport("tunnel", _resolved(config, scales), rows, summary)


def run_condensation_remark(config: ExperimentConfig) -> ExperimentReport:
    """Well masses against 1/kappa_star and the conditional law against the grand-canonical one."""
    model = config.model()
    star = model.star.S_star
    k_star = len(star)
    rows, scales = [], {}
    for N in config.Ns:
        t0 = time.perf_counter()
        _, table, part = _setup(config, N)
        scales[N] = part.resolved()
        tm = tail_masses(table, part.ell_N)
        masses = tm.per_site[list(star)]
        tv = [conditional_vs_grand_canonical(table, x, part.ell_N) for x in star]
        rows.append({"N": N, "ell_N": part.ell_N, "states": table.space.size,
                     "well_mass_min": float(masses.min()), "well_mass_max": float(masses.max()),
                     "target": 1.0 / k_star, "rel_gap": float(np.max(np.abs(masses * k_star - 1.0))),
                     "rest_mass": float(1.0 - tm.per_site[list(star)].sum()),
                     "tv_max": float(max(tv)), "seconds": time.perf_counter() - t0})
    summary = {"final_rel_gap": rows[-1]["rel_gap"], "final_tv": rows[-1]["tv_max"],
               "rel_gap_decreasing": _monotone([r["rel_gap"] for r in rows]),
               "tv_decreasing": _monotone([r["tv_max"] for r in rows])}
    return ExperimentReport("remark", _resolved(config, scales), rows, summary)


RUNNERS = {"zk": run_zk, "mt1": run_mt1, "hcond": run_h_conditions,
           "tunnel": run_tunneling, "remark": run_condensation_remark}
