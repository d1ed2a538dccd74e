"""Sampled semimartingale paths, driving noise, regions and stopping times.

Paths live on a fixed time grid and are immutable. Stopping times are
resolved at grid nodes only, so a first passage is reported at the first
node past the threshold rather than the exact crossing time; downstream
tolerances absorb the resulting O(dt) bias.

Times that never occur are reported as ``INF``, which compares greater than
every grid index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import InvalidArgument

INF = math.inf

_UNIFORM_RTOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeGrid:
    nodes: np.ndarray
    step: float | None = field(default=None)

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        if nodes.ndim != 1 or nodes.size < 3:
            raise InvalidArgument("a grid needs at least 3 nodes (N >= 2)")
        if not np.all(np.isfinite(nodes)):
            raise InvalidArgument("grid nodes must be finite")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidArgument("grid nodes must be strictly increasing")
        if nodes[0] != 0.0:
            raise InvalidArgument("grids start at t = 0")
        object.__setattr__(self, "nodes", nodes)
        if self.step is None:
            gaps = np.diff(nodes)
            dt = (nodes[-1] - nodes[0]) / (nodes.size - 1)
            if np.all(np.abs(gaps - dt) <= _UNIFORM_RTOL * max(dt, abs(nodes[-1]))):
                object.__setattr__(self, "step", float(dt))

    @property
    def n_steps(self) -> int:
        return self.nodes.size - 1

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    @property
    def uniform(self) -> bool:
        return self.step is not None

    def __len__(self):
        return self.nodes.size

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.nodes, other.nodes)

    __hash__ = None

    def index_of(self, t: float) -> int:
        """Index of the node at time ``t``; ``t`` must coincide with a node."""
        j = int(np.argmin(np.abs(self.nodes - t)))
        scale = max(1.0, abs(t))
        if abs(self.nodes[j] - t) > 1e-9 * scale:
            raise InvalidArgument(f"time {t} is not a grid node")
        return j


def make_uniform_grid(horizon: float, steps: int) -> TimeGrid:
    if not horizon > 0:
        raise InvalidArgument("horizon must be positive")
    if int(steps) != steps or steps < 2:
        raise InvalidArgument("steps must be an integer >= 2")
    steps = int(steps)
    nodes = np.arange(steps + 1) * horizon / steps
    nodes[-1] = horizon
    return TimeGrid(nodes, step=horizon / steps)


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One realization of an R^d valued process at the nodes of ``grid``.

    ``values`` always has shape ``(len(grid), d)``; 1-D input is promoted to
    a single column.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != len(self.grid):
            raise InvalidArgument(
                f"values of shape {values.shape} do not match a grid of {len(self.grid)} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgument("path values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    def component(self, j: int) -> "SamplePath":
        return SamplePath(self.grid, self.values[:, j])

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def with_values(self, values) -> "SamplePath":
        return SamplePath(self.grid, values)

    def __eq__(self, other):
        return (
            isinstance(other, SamplePath)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


# -- driving noise -----------------------------------------------------------


@dataclass(frozen=True)
class Time:
    pass


@dataclass(frozen=True)
class Brownian:
    scale: float = 1.0


@dataclass(frozen=True)
class DeterministicFunction:
    fn: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Zero:
    pass


NoiseComponent = Union[Time, Brownian, DeterministicFunction, Zero]


@dataclass(frozen=True)
class NoiseSpec:
    """Generators for X = (X^0, ..., X^k); component 0 is the X^0 channel.

    Seed policy: ``SeedSequence(master_seed).spawn(k + 1)`` gives one child
    per component, in order, and component j draws from
    ``Generator(PCG64(child_j))``. Components that need no randomness still
    consume their child, so adding a channel never reshuffles the others.
    """

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidArgument("a noise spec needs at least one component")
        for c in comps:
            if not isinstance(c, (Time, Brownian, DeterministicFunction, Zero)):
                raise InvalidArgument(f"unknown noise component {c!r}")
        object.__setattr__(self, "components", comps)

    @property
    def k(self) -> int:
        return len(self.components) - 1

    @classmethod
    def standard(cls, k: int, scale: float = 1.0) -> "NoiseSpec":
        """X^0 = t and k independent Brownian channels."""
        return cls((Time(),) + tuple(Brownian(scale) for _ in range(k)))


def sample_noise(spec: NoiseSpec, grid: TimeGrid, master_seed: int) -> SamplePath:
    children = np.random.SeedSequence(master_seed).spawn(len(spec.components))
    t = grid.nodes
    dt = np.diff(t)
    out = np.zeros((len(grid), len(spec.components)))
    for j, (comp, child) in enumerate(zip(spec.components, children)):
        if isinstance(comp, Time):
            out[:, j] = t
        elif isinstance(comp, Brownian):
            rng = np.random.Generator(np.random.PCG64(child))
            dw = rng.standard_normal(dt.size) * np.sqrt(dt) * comp.scale
            out[1:, j] = np.cumsum(dw)
        elif isinstance(comp, DeterministicFunction):
            out[:, j] = np.asarray(comp.fn(t), dtype=float)
        # Zero leaves the column at 0
    return SamplePath(grid, out)


# -- regions -----------------------------------------------------------------
#
# Every region is a closed set. ``normalized`` maps a point to a gauge that is
# <= 1 exactly on the region and == 1 on its boundary; spatial bumps are built
# from it.


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgument("ball radius must be positive")
        object.__setattr__(self, "center", _frozen(np.atleast_1d(self.center)))

    def normalized(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center, axis=-1) / self.radius

    def contains(self, x) -> np.ndarray:
        return self.normalized(x) <= 1.0


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo, hi = _frozen(np.atleast_1d(self.lo)), _frozen(np.atleast_1d(self.hi))
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise InvalidArgument("box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def normalized(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        mid = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo)
        return np.max(np.abs(x - mid) / half, axis=-1)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)


@dataclass(frozen=True, eq=False)
class Sublevel:
    """The closed set ``{x : fn(x) <= level}``.

    ``fn`` must act on the last axis of its argument. The gauge used for
    bumps is ``1 + (fn(x) - level) / scale``; ``scale`` defaults to
    ``max(|level|, 1)``.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    level: float
    scale: float | None = None

    def __post_init__(self):
        if self.scale is None:
            object.__setattr__(self, "scale", max(abs(self.level), 1.0))
        if not self.scale > 0:
            raise InvalidArgument("sublevel scale must be positive")

    def normalized(self, x) -> np.ndarray:
        return 1.0 + (np.asarray(self.fn(np.asarray(x, dtype=float))) - self.level) / self.scale

    def contains(self, x) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(x, dtype=float))) <= self.level


Region = Union[Ball, Box, Sublevel]


# -- stopping times ----------------------------------------------------------


@dataclass(frozen=True)
class StoppingTimes:
    """First-excursion window of a path in a closed region.

    ``tau_h`` is the first hitting index, ``tau_he`` the number of steps the
    path then stays inside. Either may be ``INF``.
    """

    tau_h: float
    tau_he: float

    def __post_init__(self):
        if self.tau_h == INF and self.tau_he != INF:
            raise InvalidArgument("tau_he must be INF when tau_h is INF")

    @property
    def window(self) -> tuple:
        return (self.tau_h, self.tau_h + self.tau_he)

    @property
    def empty(self) -> bool:
        return self.tau_h == INF

    def index_window(self, n_nodes: int) -> tuple[int, int] | None:
        """The window clipped to ``[0, n_nodes - 1]``, or None when empty."""
        if self.empty:
            return None
        last = n_nodes - 1
        return int(self.tau_h), int(min(self.tau_h + self.tau_he, last))

    def interior_mask(self, n_nodes: int) -> np.ndarray:
        """True at nodes strictly inside ``]tau_h, tau_h + tau_he[``."""
        mask = np.zeros(n_nodes, dtype=bool)
        if self.empty:
            return mask
        a = int(self.tau_h)
        b = self.tau_h + self.tau_he
        stop = n_nodes if b == INF else min(int(b), n_nodes)
        mask[a + 1 : stop] = True
        return mask


def _first_true(flags: np.ndarray):
    hits = np.flatnonzero(flags)
    return int(hits[0]) if hits.size else INF


def first_hitting_time(path: SamplePath, region: Region):
    return _first_true(region.contains(path.values))


def first_exit_time(path: SamplePath, region: Region):
    return _first_true(~region.contains(path.values))


def hit_exit_window(path: SamplePath, region: Region) -> StoppingTimes:
    inside = region.contains(path.values)
    tau_h = _first_true(inside)
    if tau_h == INF:
        return StoppingTimes(INF, INF)
    tau_he = _first_true(~inside[tau_h:])
    return StoppingTimes(tau_h, tau_he)


def stop_path(path: SamplePath, tau) -> SamplePath:
    if tau == INF or tau >= len(path.grid) - 1:
        return path
    if tau < 0:
        raise InvalidArgument("stopping index must be non-negative")
    values = np.array(path.values)
    values[int(tau) :] = values[int(tau)]
    return path.with_values(values)


def path_from_function(grid: TimeGrid, fn: Callable[[np.ndarray], np.ndarray]) -> SamplePath:
    """Sample a deterministic path ``fn(t)`` at the grid nodes."""
    return SamplePath(grid, np.asarray(fn(grid.nodes), dtype=float))


def concat_columns(paths: Sequence[SamplePath]) -> SamplePath:
    grid = paths[0].grid
    for p in paths[1:]:
        if p.grid != grid:
            raise InvalidArgument("paths live on different grids")
    return SamplePath(grid, np.hstack([p.values for p in paths]))
