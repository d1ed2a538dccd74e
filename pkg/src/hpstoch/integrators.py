"""Implicit-midpoint integrators for Stratonovich equations on sampled noise.

Every scheme here solves, step by step,

    y_{i+1} = y_i + S(xbar, ybar) . (X_{i+1} - X_i),   xbar, ybar = midpoints

by fixed-point iteration, falling back to Newton's method with a
finite-difference Jacobian. Only noise increments enter the recursion; the
grid times themselves are never read, so X^0 need not be t.

The integrators accept one noise path or a list of paths on a common grid.
A list is advanced in lock step as a batch; rows that have converged are
frozen, so each path sees the same iteration sequence as a solo run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import IntegratorStepError, InvalidArgument
from .mechanics import (
    LagrangianSystem,
    PontryaginState,
    hamiltonian_gradients,
    legendre_inverse,
    noise_hamiltonian,
    pullback,
)
from .paths import SamplePath, TimeGrid

STEP_TOL = 1e-12
STEP_MAXITER = 50


@dataclass(frozen=True)
class StratonovichOperator:
    """x, y -> linear map R^{k+1} -> R^m stored as an (m, k+1) matrix.

    Column j of ``generator(x, y)`` is the vector field S^{x, e_j} at y.
    """

    n_inputs: int
    m: int
    generator: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def columns(self, x, y) -> np.ndarray:
        return np.asarray(self.generator(np.asarray(x, float), np.asarray(y, float)), float)

    def __call__(self, x, y, a) -> np.ndarray:
        return self.columns(x, y) @ np.asarray(a, float)

    def dual(self, x, y) -> np.ndarray:
        return self.columns(x, y).T

    def scaled_column(self, j: int, factor: float) -> "StratonovichOperator":
        """Same operator with column j multiplied by ``factor``."""
        gen = self.generator

        def scaled(x, y):
            M = np.array(gen(x, y), dtype=float)
            M[:, j] *= factor
            return M

        return StratonovichOperator(self.n_inputs, self.m, scaled)


@dataclass(frozen=True)
class StepStats:
    iterations: np.ndarray
    residuals: np.ndarray
    newton_steps: np.ndarray


def _converged(r, y):
    # an overflowed iterate would otherwise pass as inf <= tol * inf
    return np.isfinite(r) & (r <= STEP_TOL * np.maximum(1.0, np.abs(y).max(axis=-1)))


def _solve_steps(rhs, y0: np.ndarray, X: np.ndarray):
    """Implicit-midpoint recursion for a batch.

    ``y0`` is (B, m) and ``X`` is (N+1, B, k+1). ``rhs(ybar, dx, xbar)`` acts
    row-wise and returns the (b, m) increment. Returns states (N+1, B, m),
    per-step iteration counts and residuals (B, N), and the number of
    Newton fallbacks per row.
    """
    n_steps, B = X.shape[0] - 1, X.shape[1]
    dX = np.diff(X, axis=0)
    xmid = 0.5 * (X[:-1] + X[1:])
    ys = np.empty((n_steps + 1,) + y0.shape)
    ys[0] = y0
    iters = np.zeros((B, n_steps), dtype=int)
    resid = np.zeros((B, n_steps))
    newton = np.zeros(B, dtype=int)
    all_rows = np.arange(B)
    for i in range(n_steps):
        yi, dx, xm = ys[i], dX[i], xmid[i]
        y = yi + rhs(yi, dx, xm)
        rows = all_rows
        for it in range(1, STEP_MAXITER + 1):
            if rows.size == B:
                y_new = yi + rhs(0.5 * (yi + y), dx, xm)
                r = np.abs(y_new - y).max(axis=-1)
                y = y_new
            else:
                y_new = yi[rows] + rhs(0.5 * (yi[rows] + y[rows]), dx[rows], xm[rows])
                r = np.abs(y_new - y[rows]).max(axis=-1)
                y[rows] = y_new
            done = _converged(r, y_new)
            if done.any():
                iters[rows[done], i] = it
                resid[rows[done], i] = r[done]
                rows = rows[~done]
                if rows.size == 0:
                    break
            if not np.all(np.isfinite(y_new)):
                break
        for b in rows:
            y[b], iters[b, i], resid[b, i] = _newton_step(rhs, i, yi[b], dx[b], xm[b])
            newton[b] += 1
        ys[i + 1] = y
    return ys, StepStats(iters, resid, newton)


def _newton_step(rhs, i, yi, dx, xm):
    def G(y):
        return y - yi - rhs((0.5 * (yi + y))[None], dx[None], xm[None])[0]

    y = yi.copy()
    h = 1e-7
    for it in range(1, STEP_MAXITER + 1):
        g = G(y)
        r = float(np.abs(g).max())
        if _converged(r, y):
            return y, it, r
        J = np.empty((y.size, y.size))
        for j in range(y.size):
            e = np.zeros(y.size)
            e[j] = h
            J[:, j] = (G(y + e) - G(y - e)) / (2 * h)
        try:
            y = y - np.linalg.solve(J, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(y)):
            break
    raise IntegratorStepError(i, "implicit midpoint step did not converge")


# -- Pontryagin paths ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PontryaginPath:
    """Nodes (q_j, v_j, p_j) of a path on the Pontryagin bundle chart R^{3n}."""

    grid: TimeGrid
    q: np.ndarray
    v: np.ndarray
    p: np.ndarray
    noise: Optional[SamplePath] = None
    iterations: Optional[np.ndarray] = None
    residuals: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("q", "v", "p"):
            a = np.array(getattr(self, name), dtype=float)
            if a.ndim == 1:
                a = a[:, None]
            if a.shape[0] != len(self.grid):
                raise InvalidArgument(f"{name} has {a.shape[0]} nodes, grid has {len(self.grid)}")
            if not np.all(np.isfinite(a)):
                raise InvalidArgument(f"{name} has non-finite entries")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not (self.q.shape == self.v.shape == self.p.shape):
            raise InvalidArgument("q, v and p must have the same shape")
        if self.noise is not None and self.noise.grid != self.grid:
            raise InvalidArgument("noise and path grids differ")

    @property
    def n(self) -> int:
        return self.q.shape[1]

    def state(self, j: int) -> PontryaginState:
        return PontryaginState(self.q[j], self.v[j], self.p[j])

    def stacked(self) -> np.ndarray:
        """(N+1, 3n) array with columns q, v, p."""
        return np.hstack([self.q, self.v, self.p])

    def as_sample_path(self) -> SamplePath:
        return SamplePath(self.grid, self.stacked())

    @classmethod
    def from_stacked(cls, grid, values, noise=None) -> "PontryaginPath":
        values = np.asarray(values, float)
        n = values.shape[1] // 3
        return cls(grid, values[:, :n], values[:, n : 2 * n], values[:, 2 * n :], noise)

    def legendre_residual(self, sys: LagrangianSystem) -> float:
        return float(np.max(np.abs(self.p - sys.grad_v(self.q, self.v))))


@dataclass(frozen=True, eq=False)
class CotangentPath:
    grid: TimeGrid
    q: np.ndarray
    p: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray


NoiseInput = Union[SamplePath, Sequence[SamplePath]]


def _batch(noise: NoiseInput, width: int, grid: Optional[TimeGrid]):
    single = isinstance(noise, SamplePath)
    paths = [noise] if single else list(noise)
    if not paths:
        raise InvalidArgument("no noise paths given")
    g = paths[0].grid
    for path in paths:
        if path.grid != g:
            raise InvalidArgument("batched noise paths must share one grid")
        if path.d != width:
            raise InvalidArgument(f"expected {width} noise components, got {path.d}")
    if grid is not None and grid != g:
        raise InvalidArgument("noise is not sampled on the requested grid")
    X = np.stack([path.values for path in paths], axis=1)
    return single, paths, X


def _initial(sys, q0, p0, B):
    q0 = np.asarray(q0, float).reshape(-1, sys.n) if np.ndim(q0) > 1 else np.atleast_1d(np.asarray(q0, float))
    p0 = np.asarray(p0, float).reshape(-1, sys.n) if np.ndim(p0) > 1 else np.atleast_1d(np.asarray(p0, float))
    if q0.shape[-1] != sys.n or p0.shape[-1] != sys.n:
        raise InvalidArgument(f"initial state must have dimension {sys.n}")
    y0 = np.concatenate(np.broadcast_arrays(q0, p0), axis=-1)
    return np.broadcast_to(y0, (B, 2 * sys.n)).copy()


def _el_rhs(sys: LagrangianSystem):
    n = sys.n
    channels = sys.channels
    inverse = sys.inverse_legendre or (lambda q, p: legendre_inverse(sys, q, p))
    grad_q = sys.grad_q

    def rhs(y, dx, xm):
        q, p = y[:, :n], y[:, n:]
        v = inverse(q, p)
        dx0 = dx[:, :1]
        dq = v * dx0
        dp = grad_q(q, v) * dx0
        for j, ch in enumerate(channels, start=1):
            dxj = dx[:, j : j + 1]
            if not dxj.any():
                continue
            dq = dq + ch.field(q) * dxj
            dp = dp + (ch.grad_potential(q) - pullback(p, ch.jacobian(q))) * dxj
        return np.concatenate((dq, dp), axis=-1)

    return rhs


def integrate_implicit_el(sys: LagrangianSystem, noise: NoiseInput, q0, p0, grid=None):
    """Stochastic implicit Euler-Lagrange equations on the (q, p) chart of K.

    With midpoint arguments qbar, pbar and vbar = FL^{-1}(qbar, pbar):

        dq = vbar dX^0 + sum_j V_j(qbar) dX^j
        dp = dL/dq(qbar, vbar) dX^0 + sum_j [grad L_j(qbar) - DV_j(qbar)^T pbar] dX^j

    The reported v_i is FL^{-1}(q_i, p_i), so p = dL/dv holds at every node.
    Returns a PontryaginPath, or a list of them for a list of noise paths.
    """
    single, paths, X = _batch(noise, sys.k + 1, grid)
    ys, stats = _solve_steps(_el_rhs(sys), _initial(sys, q0, p0, len(paths)), X)
    n = sys.n
    out = []
    for b, path in enumerate(paths):
        q, p = ys[:, b, :n], ys[:, b, n:]
        v = legendre_inverse(sys, q, p)
        out.append(PontryaginPath(path.grid, q, v, p, path, stats.iterations[b], stats.residuals[b]))
    return out[0] if single else out


def integrate_hamiltonian(sys: LagrangianSystem, noise: NoiseInput, q0, p0, grid=None):
    """Implicit midpoint for o dz = X_H o dX^0 + sum_i X_{H_i} o dX^i on T*Q.

    H = E_L o FL^{-1}; H_i are the noise Hamiltonians. Canonical fields are
    (dH/dp, -dH/dq).
    """
    single, paths, X = _batch(noise, sys.k + 1, grid)
    n, k = sys.n, sys.k

    def rhs(y, dx, xm):
        q, p = y[:, :n], y[:, n:]
        dHq, dHp = hamiltonian_gradients(sys, q, p)
        dx0 = dx[:, :1]
        dq = dHp * dx0
        dp = -dHq * dx0
        for j in range(1, k + 1):
            dxj = dx[:, j : j + 1]
            if not dxj.any():
                continue
            _, dHiq, dHip = noise_hamiltonian(sys, j, q, p, value=False)
            dq = dq + dHip * dxj
            dp = dp - dHiq * dxj
        return np.concatenate((dq, dp), axis=-1)

    ys, stats = _solve_steps(rhs, _initial(sys, q0, p0, len(paths)), X)
    out = [
        CotangentPath(path.grid, ys[:, b, :n], ys[:, b, n:], stats.iterations[b], stats.residuals[b])
        for b, path in enumerate(paths)
    ]
    return out[0] if single else out


def integrate_stratonovich(S: StratonovichOperator, X: NoiseInput, y0):
    """Solve o dy = S(X, y) o dX by the implicit midpoint rule.

    For a list of drivers the generator must accept batched ``(b, k+1)`` and
    ``(b, m)`` arguments and return ``(b, m, k+1)``.
    """
    single, paths, xs = _batch(X, S.n_inputs, None)
    y0 = np.atleast_1d(np.asarray(y0, float))
    if y0.shape[-1] != S.m:
        raise InvalidArgument("initial value does not match the operator dimension")
    y0 = np.broadcast_to(y0, (len(paths), S.m)).copy()

    if single:
        def rhs(y, dx, xm):
            return (S.columns(xm[0], y[0]) @ dx[0])[None]
    else:
        def rhs(y, dx, xm):
            return (S.columns(xm, y) @ dx[..., None])[..., 0]

    ys, _ = _solve_steps(rhs, y0, xs)
    out = [SamplePath(path.grid, ys[:, b]) for b, path in enumerate(paths)]
    return out[0] if single else out


def hp_operator(sys: LagrangianSystem) -> StratonovichOperator:
    """Hamilton-Pontryagin operator on K, in the (q, p) chart (m = 2n).

    Column 0 is the deterministic implicit Euler-Lagrange field
    (v, dL/dq) with v = FL^{-1}(q, p); column j >= 1 is
    (V_j, grad L_j - DV_j^T p). Accepts single or batched states.
    """
    n, k = sys.n, sys.k
    inverse = sys.inverse_legendre or (lambda q, p: legendre_inverse(sys, q, p))

    def generator(x, y):
        q, p = y[..., :n], y[..., n:]
        M = np.empty(y.shape[:-1] + (2 * n, k + 1))
        v = inverse(q, p)
        M[..., :n, 0] = v
        M[..., n:, 0] = sys.grad_q(q, v)
        for j, ch in enumerate(sys.channels, start=1):
            M[..., :n, j] = ch.field(q)
            M[..., n:, j] = ch.grad_potential(q) - pullback(p, ch.jacobian(q))
        return M

    return StratonovichOperator(k + 1, 2 * n, generator)


def hp_equivalence_check(
    sys: LagrangianSystem, noise: SamplePath, q0, p0, grid=None, operator: StratonovichOperator | None = None
) -> float:
    """Max node discrepancy in (q, p) between the HP-operator and implicit-EL runs."""
    S = hp_operator(sys) if operator is None else operator
    via_operator = integrate_stratonovich(S, noise, _initial(sys, q0, p0, 1)[0]).values
    path = integrate_implicit_el(sys, noise, q0, p0, grid)
    direct = np.hstack([path.q, path.p])
    return float(np.max(np.abs(via_operator - direct)))
