"""Explicit test functions giving upper bounds for capacities between wells.

The construction glues, for every pair of sites, a smoothed two-site profile
``H`` along the ordering of ``S`` by the equilibrium potential of the
underlying walk, and blends the pairs with a partition of unity on the
simplex of particle densities.  Concrete choices made here:

* ``phi`` integrates a flat-topped C-infinity bump supported on
  ``(3 eps, 1 - 3 eps)``; the ramps have the largest width keeping
  ``phi' <= 1 + sqrt(eps)``.
* the partition of unity uses the cutoff ``chi(d / (eps/3))`` of the
  constraint violation ``d`` of each set ``K^x_y``; those supports are
  pairwise disjoint, so ``Theta^x_y = 1`` on ``K^x_y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import betainc

from .errors import ConstraintViolated, EpsilonOutOfRange
from .graph import equilibrium_potential_S
from .measure import MeasureTable, MetaPartition
from .model import ZrpModel
from .potential import dirichlet_form_N, restricted_dirichlet

DEFAULT_EPSILON = 0.01
GRID_STEP = 1e-4

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(80)


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, and s(t) + s(1 - t) = 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def smooth_step_integral(x):
    """int_0^x smooth_step, for x in [0, 1] (Gauss-Legendre)."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    nodes = 0.5 * (_GL_NODES + 1.0)
    vals = smooth_step(x[..., None] * nodes)
    return 0.5 * x * (vals @ _GL_WEIGHTS)


def cutoff(t):
    """chi: 1 on [0, 1/2], 0 on [1, inf), smooth in between."""
    return 1.0 - smooth_step(2.0 * np.asarray(t, dtype=float) - 1.0)


def _slack(eps: float) -> float:
    return (1.0 - 6.0 * eps) - 1.0 / (1.0 + math.sqrt(eps))


def epsilon_max() -> float:
    """Largest eps (below 1/6 - 1e-3) for which the slope bound on phi is attainable."""
    root = optimize.brentq(_slack, 1e-3, 1.0 / 6.0 - 1e-3, xtol=1e-15)
    return root * (1.0 - 1e-6)


@dataclass(frozen=True, eq=False)
class TestFunctionSpec:
    epsilon: float
    alpha: float
    kappa: int
    ramp: float
    slope: float
    potentials: dict = field(repr=False)
    enumerations: dict = field(repr=False)

    __test__ = False  # not a pytest class

    @property
    def lo(self) -> float:
        return 3.0 * self.epsilon

    @property
    def hi(self) -> float:
        return 1.0 - 3.0 * self.epsilon

    def _phi_raw(self, t):
        t = np.asarray(t, dtype=float)
        a, b, w = self.lo, self.hi, self.ramp
        up = w * smooth_step_integral((t - a) / w)
        mid = 0.5 * w + (t - a - w)
        down = 0.5 * w + (b - a - 2 * w) + w * (0.5 - smooth_step_integral((b - t) / w))
        total = b - a - w
        out = np.where(t <= a, 0.0,
              np.where(t < a + w, up,
              np.where(t <= b - w, mid,
              np.where(t < b, down, total))))
        return out * self.slope

    def phi(self, t):
        """Nondecreasing ramp from 0 (on [0, 3 eps]) to 1 (on [1 - 3 eps, 1]), phi(t) + phi(1-t) = 1."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        val = np.clip(0.5 * (self._phi_raw(t) + 1.0 - self._phi_raw(1.0 - t)), 0.0, 1.0)
        # the flat pieces are exact; slope * length is 1 only up to rounding
        return np.where(t <= self.lo, 0.0, np.where(t >= self.hi, 1.0, val))

    def dphi(self, t):
        t = np.asarray(t, dtype=float)
        a, b, w = self.lo, self.hi, self.ramp
        bump = np.where(t < a + w, smooth_step((t - a) / w),
                        np.where(t > b - w, smooth_step((b - t) / w), 1.0))
        return self.slope * np.where((t <= a) | (t >= b), 0.0, bump)

    def H(self, t):
        """(1/I_alpha) int_0^{phi(t)} u^alpha (1-u)^alpha du."""
        return betainc(self.alpha + 1.0, self.alpha + 1.0, self.phi(t))

    def theta(self, x: int, u: np.ndarray) -> np.ndarray:
        """Partition of unity Theta^x_y(u), y != x, at rows of density vectors u.

        Returns an array of shape (len(u), kappa) with a zero column at x.
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        eps = self.epsilon
        delta = eps / 3.0
        out = np.zeros((u.shape[0], self.kappa))
        others = [y for y in range(self.kappa) if y != x]
        if len(others) == 1:
            out[:, others[0]] = 1.0
            return out
        w = np.zeros((u.shape[0], len(others)))
        for j, y in enumerate(others):
            d = np.maximum.reduce([np.zeros(u.shape[0]),
                                   (1.0 - eps) - (u[:, x] + u[:, y]),
                                   u[:, x] - (1.0 - 3.0 * eps)])
            w[:, j] = cutoff(d / delta)
        fill = (1.0 - w.sum(axis=1, keepdims=True)) / len(others)
        out[:, others] = w + fill
        return out

    def in_K(self, x: int, y: int, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        eps = self.epsilon
        return (u[:, x] + u[:, y] >= 1.0 - eps) & (u[:, x] <= 1.0 - 3.0 * eps)

    def check_grid(self, step: float = GRID_STEP) -> dict:
        """Machine-check the constraints on phi and H on a uniform grid."""
        t = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
        phi = self.phi(t)
        H = self.H(t)
        eps = self.epsilon
        bound = 1.0 + math.sqrt(eps)
        tail = t >= 2 * eps
        checks = {
            "phi_endpoints": phi[0] == 0.0 and phi[-1] == 1.0,
            "phi_monotone": bool(np.all(np.diff(phi) >= -1e-15)),
            "phi_symmetric": float(np.max(np.abs(phi + phi[::-1] - 1.0))) <= 1e-12,
            "phi_flat_low": bool(np.all(phi[t <= 3 * eps] == 0.0)),
            "slope_bound": float(np.max(self.dphi(t))) <= bound,
            "ratio_bound": bool(np.all(phi[tail] <= bound * (t[tail] - eps) + 1e-15)),
            "H_symmetric": float(np.max(np.abs(H + H[::-1] - 1.0))) <= 1e-12,
            "H_flat": bool(np.all(H[t <= 3 * eps] == 0.0) and np.all(H[t >= 1 - 3 * eps] >= 1.0 - 1e-15)),
        }
        return checks


def _enumeration(f: np.ndarray, x: int, y: int) -> tuple[int, ...]:
    k = len(f)
    middle = sorted((z for z in range(k) if z not in (x, y)), key=lambda z: (-f[z], z))
    return (x, *middle, y)


def build_test_spec(model: ZrpModel, epsilon: float = DEFAULT_EPSILON) -> TestFunctionSpec:
    if not 0.0 < epsilon < 1.0 / 6.0:
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 1/6), got {epsilon}")
    eps0 = epsilon_max()
    if epsilon > eps0:
        raise EpsilonOutOfRange(f"epsilon {epsilon} exceeds the feasible maximum {eps0:.6f}")
    slack = _slack(epsilon)
    ramp = min(0.5 * slack, 0.25 * (1.0 - 6.0 * epsilon))
    slope = 1.0 / ((1.0 - 6.0 * epsilon) - ramp)
    k = model.kappa
    potentials, enums = {}, {}
    for x in range(k):
        for y in range(x + 1, k):
            f = equilibrium_potential_S(model.graph, [x], [y])
            potentials[(x, y)] = f
            potentials[(y, x)] = 1.0 - f
            order = _enumeration(f, x, y)
            enums[(x, y)] = order
            enums[(y, x)] = order[::-1]
    spec = TestFunctionSpec(epsilon=epsilon, alpha=model.alpha, kappa=k, ramp=ramp, slope=slope,
                            potentials=potentials, enumerations=enums)
    failed = [name for name, ok in spec.check_grid().items() if not ok]
    if failed:
        raise ConstraintViolated(f"grid check failed: {failed}")
    return spec


def pair_function(spec: TestFunctionSpec, counts: np.ndarray, N: int, x: int, y: int) -> np.ndarray:
    """F_xy = sum_j (f(z_j) - f(z_{j+1})) F^j_xy, with
    F^j_xy = H(eta_x/N + min(sum_{i=2..j} eta_{z_i}/N, eps))."""
    f = spec.potentials[(x, y)]
    z = spec.enumerations[(x, y)]
    base = counts[:, x] / N
    partial = np.zeros(len(counts))
    out = np.zeros(len(counts))
    for j in range(1, spec.kappa):
        if j >= 2:
            partial = partial + counts[:, z[j - 1]] / N
        coeff = f[z[j - 1]] - f[z[j]]
        if coeff != 0.0:
            out += coeff * spec.H(base + np.minimum(partial, spec.epsilon))
    return out


def site_function(spec: TestFunctionSpec, counts: np.ndarray, N: int, x: int,
                  pairs: dict | None = None) -> np.ndarray:
    """F_x = sum_{y != x} Theta^x_y(eta/N) F_xy."""
    theta = spec.theta(x, counts / N)
    out = np.zeros(len(counts))
    for y in range(spec.kappa):
        if y != x:
            F_xy = pairs[(x, y)] if pairs is not None else pair_function(spec, counts, N, x, y)
            out += theta[:, y] * F_xy
    return out


def build_test_function(spec: TestFunctionSpec, model: ZrpModel, N: int, S1, counts=None) -> np.ndarray:
    """F_{S1} = sum_{x in S1} F_x on every configuration of E_N (enumeration order)."""
    s1 = [model.graph.index(x) for x in S1]
    if not s1 or len(s1) >= model.kappa:
        raise ValueError("S1 must be a nonempty proper subset of S")
    if counts is None:
        from .space import enumerate_space
        counts = enumerate_space(N, model.kappa).counts
    return sum(site_function(spec, counts, N, x) for x in s1)


def tube_mask(counts: np.ndarray, N: int, ell: int, x: int, y: int) -> np.ndarray:
    """I^{xy}_N = {eta_x + eta_y >= N - ell}."""
    return counts[:, x] + counts[:, y] >= N - ell


@dataclass(frozen=True)
class UpperBound:
    total: float
    tubes: dict
    exterior: float
    admissible: bool
    bounded: float
    lipschitz: float
    F: np.ndarray = field(repr=False)


def upper_bound_estimate(table: MeasureTable, spec: TestFunctionSpec, S1,
                         partition: MetaPartition) -> UpperBound:
    """Dirichlet energy of F_{S1} and its decomposition over the tubes I^{xy}_N.

    ``bounded`` is D_N of F_{S1} with the boundary values 1 on E_N(S1 & S_star)
    and 0 on E_N(S_star minus S1) imposed, hence always >= the capacity;
    ``admissible`` records whether imposing them changed anything.
    """
    model = table.model
    N = table.N
    counts = table.space.counts
    k = model.kappa
    s1 = [model.graph.index(x) for x in S1]
    s2 = [z for z in range(k) if z not in s1]
    star = model.star.S_star
    s1_star = [x for x in s1 if x in star]
    s2_star = [y for y in s2 if y in star]
    if not s1_star or not s2_star:
        raise ValueError("S1 must split S_star into two nonempty parts")
    ell = partition.ell_N

    pairs = {(x, y): pair_function(spec, counts, N, x, y) for x in s1 for y in range(k) if y != x}
    site = {x: site_function(spec, counts, N, x, pairs) for x in s1}
    F = sum(site.values())

    tubes = {}
    for x in s1:
        for y in s2:
            tubes[(x, y)] = restricted_dirichlet(table, pairs[(x, y)], tube_mask(counts, N, ell, x, y))
    inside = np.zeros(len(counts), dtype=bool)
    for x in s1:
        for y in range(k):
            if y != x:
                inside |= tube_mask(counts, N, ell, x, y)
    exterior = dirichlet_form_N(table, F, ~inside)

    A = partition.union(s1_star)
    B = partition.union(s2_star)
    G = F.copy()
    G[A] = 1.0
    G[B] = 0.0
    admissible = bool(np.allclose(G, F, atol=1e-12, rtol=0.0))

    t = table.targets
    valid = t >= 0
    lip = 0.0
    for Fx in site.values():
        jumps = np.abs(np.where(valid, Fx[np.where(valid, t, 0)], 0.0) - Fx[None, :])
        lip = max(lip, float(np.max(np.where(valid, jumps, 0.0))) * N)
    return UpperBound(total=dirichlet_form_N(table, F), tubes=tubes, exterior=exterior,
                      admissible=admissible, bounded=dirichlet_form_N(table, G), lipschitz=lip, F=F)
