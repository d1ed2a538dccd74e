"""Localized variations, the pathwise Hamilton-Pontryagin action and checks on it.

A variation field is ``delta_j = g(t_j) * h(q_j) * mask_j * direction`` where
``g`` is a time bump supported in (0, T), ``h`` a spatial bump that is 1 on
the inner 80% of a region K and 0 on its boundary, and ``mask`` selects the
nodes strictly inside the first hit-exit window of q in K. Deformations are
Euclidean shifts ``path + eps * delta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .calculus import integral_over_window, strat_terms
from .errors import InvalidArgument
from .integrators import PontryaginPath
from .mechanics import LagrangianSystem, pullback
from .paths import INF, Ball, SamplePath, StoppingTimes, TimeGrid, hit_exit_window

G_KINDS = ("poly-bump", "sine", "indicator-smoothed")
INNER_FRACTION = 0.8


def smoothstep(x):
    """Quintic 6x^5 - 15x^4 + 10x^3 clamped to [0, 1]; C^2 at both ends."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0)


@dataclass(frozen=True, eq=False)
class VariationField:
    T: float
    g_kind: str
    direction: np.ndarray
    region: object = None
    g_params: tuple = ()

    def __post_init__(self):
        if self.g_kind not in G_KINDS:
            raise InvalidArgument(f"unknown time bump {self.g_kind!r}; expected one of {G_KINDS}")
        if not self.T > 0:
            raise InvalidArgument("T must be positive")
        d = np.array(self.direction, dtype=float).ravel()
        if d.size % 3:
            raise InvalidArgument("direction must have 3n entries (q, v, p blocks)")
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)
        if self.g_kind == "indicator-smoothed":
            a, b, w = self.g_params
            if not (0.0 <= a and b <= self.T and 0 < 2 * w <= b - a):
                raise InvalidArgument("indicator-smoothed needs 0 <= a, b <= T, 0 < 2w <= b - a")

    @property
    def n(self) -> int:
        return self.direction.size // 3

    def time_bump(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        T = self.T
        if self.g_kind == "poly-bump":
            g = 16.0 * (t * (T - t) / T**2) ** 2
        elif self.g_kind == "sine":
            g = np.sin(np.pi * t / T)
        else:
            a, b, w = self.g_params
            g = smoothstep((t - a) / w) * smoothstep((b - t) / w)
        return np.where((t > 0.0) & (t < T), g, 0.0)

    def spatial_bump(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.region is None:
            return np.ones(q.shape[:-1])
        rho = self.region.normalized(q)
        return smoothstep((1.0 - rho) / (1.0 - INNER_FRACTION))

    def window(self, path: PontryaginPath) -> StoppingTimes:
        if self.region is None:
            return StoppingTimes(0, INF)
        return hit_exit_window(SamplePath(path.grid, path.q), self.region)

    def weights(self, path: PontryaginPath) -> np.ndarray:
        """Scalar factor g * h * mask at each node."""
        w = self.time_bump(path.grid.nodes)
        if self.region is not None:
            mask = self.window(path).interior_mask(len(path.grid))
            w = np.where(mask, w * self.spatial_bump(path.q), 0.0)
        return w

    def evaluate(self, path: PontryaginPath) -> SamplePath:
        if path.n != self.n:
            raise InvalidArgument("field and path have different configuration dimensions")
        if self.T > path.grid.horizon * (1 + 1e-12):
            raise InvalidArgument("field horizon T lies beyond the path's grid")
        return SamplePath(path.grid, np.outer(self.weights(path), self.direction))

    def negated(self) -> "VariationField":
        return VariationField(self.T, self.g_kind, -self.direction, self.region, self.g_params)

    def describe(self) -> dict:
        return {
            "g_kind": self.g_kind,
            "direction": " ".join(f"{x:.6g}" for x in self.direction),
            "K_kind": "none" if self.region is None else type(self.region).__name__.lower(),
        }


@dataclass(frozen=True, eq=False)
class CombinedField:
    """Linear combination sum_i c_i * field_i, evaluated node by node."""

    fields: tuple
    coeffs: tuple

    @property
    def T(self):
        return max(f.T for f in self.fields)

    def evaluate(self, path: PontryaginPath) -> SamplePath:
        total = sum(c * f.evaluate(path).values for f, c in zip(self.fields, self.coeffs))
        return SamplePath(path.grid, total)


def build_variation(T, g_kind, region=None, direction=None, grid: TimeGrid | None = None, g_params=()):
    """A (K, T)-variation field; ``region=None`` means K is the whole space.

    ``direction`` is a 3n vector over the (q, v, p) blocks. For the
    ``indicator-smoothed`` bump ``g_params = (a, b, w)`` gives the support
    [a, b] and ramp width w. With ``grid`` given, T must lie in (0, horizon].
    """
    if direction is None:
        raise InvalidArgument("a direction vector is required")
    if grid is not None and not (0 < T <= grid.horizon * (1 + 1e-12)):
        raise InvalidArgument(f"T = {T} lies outside the grid (0, {grid.horizon}]")
    return VariationField(float(T), g_kind, direction, region, tuple(g_params))


def _delta(path: PontryaginPath, variation) -> np.ndarray:
    if isinstance(variation, SamplePath):
        if variation.grid != path.grid or variation.d != 3 * path.n:
            raise InvalidArgument("variation does not match the path")
        return variation.values
    return variation.evaluate(path).values


def deform(path: PontryaginPath, variation, eps: float) -> PontryaginPath:
    if eps == 0:
        return path
    shifted = path.stacked() + eps * _delta(path, variation)
    return PontryaginPath.from_stacked(path.grid, shifted, path.noise)


# -- action ------------------------------------------------------------------


def _prepare(sys: LagrangianSystem, noise: SamplePath, path: PontryaginPath, T):
    if noise.grid != path.grid:
        raise InvalidArgument("noise and path live on different grids")
    if noise.d != sys.k + 1:
        raise InvalidArgument("noise must have k + 1 components")
    if path.n != sys.n:
        raise InvalidArgument("path dimension does not match the system")
    m = len(path.grid) - 1 if T is None else path.grid.index_of(T)
    s = slice(0, m + 1)
    return path.q[s], path.v[s], path.p[s], noise.values[s]


def _sum(terms) -> float:
    return float(np.sum(terms))


def evaluate_action_local(sys, noise, path, T=None) -> float:
    """Midpoint-rule Hamilton-Pontryagin action on [0, T] in local coordinates.

    int L o dX^0 + sum_i int L_i o dX^i + int <p, o dq - v o dX^0 - sum_i V_i o dX^i>
    """
    q, v, p, X = _prepare(sys, noise, path, T)
    total = _sum(strat_terms(sys.lagrangian(q, v), X[:, 0]))
    total += _sum(strat_terms(p, q))
    total -= _sum(strat_terms((p * v).sum(-1), X[:, 0]))
    for i, ch in enumerate(sys.channels, start=1):
        total += _sum(strat_terms(ch.potential(q), X[:, i]))
        total -= _sum(strat_terms((p * ch.field(q)).sum(-1), X[:, i]))
    return total


def evaluate_action_intrinsic(sys, noise, path, T=None) -> float:
    """int <p, o dq> - sum_j int E_j o dX^j on [0, T], same discretization."""
    q, v, p, X = _prepare(sys, noise, path, T)
    total = _sum(strat_terms(p, q))
    total -= _sum(strat_terms((p * v).sum(-1) - sys.lagrangian(q, v), X[:, 0]))
    for i, ch in enumerate(sys.channels, start=1):
        total -= _sum(strat_terms((p * ch.field(q)).sum(-1) - ch.potential(q), X[:, i]))
    return total


def action_derivative(sys, noise, path, variation, eps0: float = 1e-2, T=None) -> float:
    """Richardson-extrapolated central difference of the action along a variation.

    ``variation`` is a field or an evaluated delta path. T defaults to the
    field's own T, else to the grid horizon.
    """
    if T is None:
        T = getattr(variation, "T", None)
    delta = SamplePath(path.grid, _delta(path, variation))

    def central(eps):
        up = evaluate_action_local(sys, noise, deform(path, delta, eps), T)
        down = evaluate_action_local(sys, noise, deform(path, delta, -eps), T)
        return (up - down) / (2 * eps)

    return (4.0 * central(eps0 / 2) - central(eps0)) / 3.0


# -- random variation families -----------------------------------------------


def random_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    """Unit vector supported on one randomly chosen block (q, v or p) or on all three."""
    block = rng.integers(4)
    d = np.zeros(3 * n)
    if block == 3:
        d[:] = rng.standard_normal(3 * n)
    else:
        d[block * n : (block + 1) * n] = rng.standard_normal(n)
    return d / np.linalg.norm(d)


def random_variation(rng: np.random.Generator, n: int, T: float, region=None) -> VariationField:
    g_kind = G_KINDS[rng.integers(len(G_KINDS))]
    g_params = ()
    if g_kind == "indicator-smoothed":
        a = rng.uniform(0.0, 0.7 * T)
        b = rng.uniform(a + 0.15 * T, T)
        g_params = (a, b, 0.25 * (b - a))
    return VariationField(T, g_kind, random_direction(rng, n), region, g_params)


def _random_ball(rng, path: PontryaginPath, T):
    """Ball centred on the path at a random node before T."""
    m = path.grid.index_of(T) if T < path.grid.horizon else len(path.grid) - 1
    j = rng.integers(1, max(m, 2))
    spread = float(np.max(np.ptp(path.q[: m + 1], axis=0)))
    radius = rng.uniform(0.3, 1.0) * max(spread, 1e-3)
    return Ball(path.q[j].copy(), radius)


@dataclass
class StationarityReport:
    derivatives: np.ndarray
    fields: list

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.derivatives)))

    def rows(self):
        for i, (f, d) in enumerate(zip(self.fields, self.derivatives)):
            yield {"field_id": i, **f.describe(), "derivative": float(d)}


def stationarity_test(
    sys, noise, path, n_fields: int, seed: int, T=None, ball_probability: float = 0.5, eps0: float = 1e-2
) -> StationarityReport:
    """Action derivatives along ``n_fields`` random admissible variations.

    Field i draws from its own stream ``SeedSequence(seed).spawn(n_fields)[i]``.
    Every field vanishes at t = 0 and for t >= T, so delta q is pinned at both
    ends while delta v and delta p are free in between.
    """
    if n_fields < 1:
        raise InvalidArgument("n_fields must be >= 1")
    T = path.grid.horizon if T is None else float(T)
    fields = []
    for child in np.random.SeedSequence(seed).spawn(n_fields):
        rng = np.random.default_rng(child)
        region = _random_ball(rng, path, T) if rng.random() < ball_probability else None
        fields.append(random_variation(rng, path.n, T, region))
    derivs = np.array([action_derivative(sys, noise, path, f, eps0, T) for f in fields])
    return StationarityReport(derivs, fields)


# -- Noether -----------------------------------------------------------------


def noether_charge(sys, path: PontryaginPath, generator: Callable[[np.ndarray], np.ndarray]) -> SamplePath:
    """<p_t, xi(q_t)> at each node, for an infinitesimal symmetry xi on Q."""
    xi = np.asarray(generator(path.q), dtype=float)
    return SamplePath(path.grid, (path.p * xi).sum(-1))


def rotation_generator(q):
    q = np.asarray(q, dtype=float)
    return np.stack([-q[..., 1], q[..., 0]], axis=-1)


def charge_drift(charge: SamplePath) -> float:
    c = charge.values[:, 0]
    return float(np.max(np.abs(c - c[0])))


# -- fundamental lemma harness -------------------------------------------------


@dataclass
class FundamentalLemmaReport:
    window: StoppingTimes
    index_window: Optional[tuple]
    pairings: np.ndarray
    max_increment: float
    vacuous: bool
    fields: list = field(default_factory=list)

    @property
    def max_pairing(self) -> float:
        return float(np.max(np.abs(self.pairings))) if self.pairings.size else 0.0


def fundamental_lemma_test(
    xi_path: SamplePath,
    base: PontryaginPath,
    region,
    T: float,
    n_fields: int = 0,
    seed: int = 0,
    fields: Sequence[VariationField] | None = None,
) -> FundamentalLemmaReport:
    """Pair (U, T)-variations of ``base`` against o dXi over the hit-exit window.

    Uses the given ``fields`` plus ``n_fields`` random ones (each localized to
    ``region``). The report also carries the largest |Xi increment| inside the
    window up to T, which is the ground truth for o dXi = 0 there.
    """
    if xi_path.grid != base.grid:
        raise InvalidArgument("Xi and the base path live on different grids")
    if xi_path.d != 3 * base.n:
        raise InvalidArgument("Xi must take values in R^{3n}")
    grid = base.grid
    if region is None:
        window = StoppingTimes(0, INF)
    else:
        window = hit_exit_window(SamplePath(grid, base.q), region)
    iw = window.index_window(len(grid))
    m = grid.index_of(T) if T < grid.horizon else len(grid) - 1
    if iw is None or min(iw[1], m) <= iw[0]:
        return FundamentalLemmaReport(window, None, np.zeros(0), 0.0, True, [])
    a, b = iw[0], min(iw[1], m)
    all_fields = list(fields or [])
    for child in np.random.SeedSequence(seed).spawn(n_fields):
        rng = np.random.default_rng(child)
        all_fields.append(random_variation(rng, base.n, T, region))
    pairings = np.array(
        [integral_over_window(f.evaluate(base), xi_path, (a, b)) for f in all_fields]
    )
    incr = np.abs(np.diff(xi_path.values[a : b + 1], axis=0)).max()
    return FundamentalLemmaReport(window, (a, b), pairings, float(incr), False, all_fields)


def el_residual_process(sys, noise: SamplePath, path: PontryaginPath) -> SamplePath:
    """R^{3n} process whose Stratonovich differential vanishes on solutions.

    Blocks, each integrated from 0 with the midpoint rule:
      d/dq (L o dX^0 + sum_i (L_i - <p, V_i>) o dX^i) - o dp,
      (p - dL/dv) o dX^0,
      o dq - v o dX^0 - sum_i V_i o dX^i.
    """
    if noise.grid != path.grid:
        raise InvalidArgument("noise and path live on different grids")
    q, v, p, X = path.q, path.v, path.p, noise.values
    x0 = X[:, :1]
    force = strat_terms(sys.grad_q(q, v), x0) - np.diff(p, axis=0)
    legendre_gap = strat_terms(p - sys.grad_v(q, v), x0)
    kinematic = np.diff(q, axis=0) - strat_terms(v, x0)
    for i, ch in enumerate(sys.channels, start=1):
        xi = X[:, i : i + 1]
        dq_term = ch.grad_potential(q) - pullback(p, ch.jacobian(q))
        force = force + strat_terms(dq_term, xi)
        kinematic = kinematic - strat_terms(ch.field(q), xi)
    incr = np.hstack([force, legendre_gap, kinematic])
    values = np.zeros((len(path.grid), 3 * path.n))
    np.cumsum(incr, axis=0, out=values[1:])
    return SamplePath(path.grid, values)


def bump_perturbed(path: PontryaginPath, amplitude: float = 0.1, component: int = 0) -> PontryaginPath:
    """Control path: q_component += amplitude * sin(pi t / horizon), v and p untouched."""
    q = np.array(path.q)
    q[:, component] += amplitude * np.sin(np.pi * path.grid.nodes / path.grid.horizon)
    return PontryaginPath(path.grid, q, path.v, path.p, path.noise)
