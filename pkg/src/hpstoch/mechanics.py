"""Lagrangian systems on Q = R^n driven by k noise channels.

All user callables act on the last axis and broadcast over leading axes:
``lagrangian(q, v)`` maps ``(..., n), (..., n)`` to ``(...)``, gradients map
to ``(..., n)`` and Jacobians of noise fields to ``(..., n, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import GradientValidationError, InvalidArgument, SingularLegendreError

Fn = Callable[..., np.ndarray]

LEGENDRE_TOL = 1e-12
LEGENDRE_MAXITER = 50
FD_STEP = 1e-6
FD_RTOL = 1e-6


@dataclass(frozen=True)
class NoiseChannel:
    """One noise channel i >= 1: potential L_i, vector field V_i and derivatives."""

    potential: Fn
    grad_potential: Fn
    field: Fn
    jacobian: Fn


@dataclass(frozen=True)
class LagrangianSystem:
    n: int
    lagrangian: Fn
    grad_q: Fn
    grad_v: Fn
    channels: tuple = ()
    inverse_legendre: Optional[Fn] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgument("configuration dimension must be >= 1")
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def k(self) -> int:
        return len(self.channels)

    def channel(self, i: int) -> NoiseChannel:
        if not 1 <= i <= self.k:
            raise InvalidArgument(f"noise channel {i} outside 1..{self.k}")
        return self.channels[i - 1]


@dataclass(frozen=True)
class PontryaginState:
    q: np.ndarray
    v: np.ndarray
    p: np.ndarray


def legendre(sys: LagrangianSystem, q, v) -> np.ndarray:
    return np.asarray(sys.grad_v(np.asarray(q, float), np.asarray(v, float)), float)


def _fd_jacobian(f, x, h=FD_STEP):
    n = x.size
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def _newton_inverse(sys, q, p):
    tol = LEGENDRE_TOL * max(1.0, float(np.max(np.abs(p))))
    v = p.copy()
    f = lambda w: np.asarray(sys.grad_v(q, w), float)
    for _ in range(LEGENDRE_MAXITER):
        r = f(v) - p
        if np.max(np.abs(r)) <= tol:
            return v
        J = _fd_jacobian(f, v)
        if not np.all(np.isfinite(J)) or abs(np.linalg.det(J)) < 1e-300:
            raise SingularLegendreError(f"fibre derivative is singular at q={q}, v={v}")
        try:
            v = v - np.linalg.solve(J, r)
        except np.linalg.LinAlgError as exc:
            raise SingularLegendreError(str(exc)) from None
        if not np.all(np.isfinite(v)):
            break
    raise SingularLegendreError(
        f"Legendre inversion did not converge in {LEGENDRE_MAXITER} iterations at q={q}"
    )


def legendre_inverse(sys: LagrangianSystem, q, p) -> np.ndarray:
    """Velocity v with grad_v L(q, v) = p.

    Uses the system's closed form when it has one, otherwise Newton's method
    from ``v = p`` with a finite-difference fibre Hessian.
    """
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    if sys.inverse_legendre is not None:
        return np.asarray(sys.inverse_legendre(q, p), float)
    if q.ndim > 1:
        return np.stack([_newton_inverse(sys, qi, pi) for qi, pi in zip(q, p)])
    return _newton_inverse(sys, q, p)


def generalized_energy(sys: LagrangianSystem, j: int, state: PontryaginState):
    """E_0 = <p, v> - L(q, v) and E_j = <p, V_j(q)> - L_j(q) for j >= 1."""
    q, v, p = (np.asarray(a, float) for a in (state.q, state.v, state.p))
    if j == 0:
        return np.sum(p * v, axis=-1) - sys.lagrangian(q, v)
    ch = sys.channel(j)
    return np.sum(p * ch.field(q), axis=-1) - ch.potential(q)


def pullback(p, J):
    """J^T p over leading batch axes: (..., n), (..., n, n) -> (..., n)."""
    if p.ndim == 1:
        return p @ J
    return (p[..., None, :] @ J)[..., 0, :]


def noise_hamiltonian(sys: LagrangianSystem, i: int, q, p, value: bool = True):
    """H_i(q, p) = <p, V_i(q)> - L_i(q) and its gradients (value, dH/dq, dH/dp).

    dH/dq = DV_i(q)^T p - grad L_i(q) and dH/dp = V_i(q).
    """
    ch = sys.channel(i)
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    V = ch.field(q)
    dq = pullback(p, ch.jacobian(q)) - ch.grad_potential(q)
    h = (p * V).sum(-1) - ch.potential(q) if value else None
    return h, dq, V


def hamiltonian(sys: LagrangianSystem, q, p):
    """H = E_L o FL^{-1} and its gradients (value, dH/dq, dH/dp)."""
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    dq, v = hamiltonian_gradients(sys, q, p)
    value = (p * v).sum(-1) - sys.lagrangian(q, v)
    return value, dq, v


def hamiltonian_gradients(sys: LagrangianSystem, q, p):
    """(dH/dq, dH/dp) = (-dL/dq, v) at v = FL^{-1}(q, p), by the envelope identity."""
    if sys.inverse_legendre is not None:
        v = sys.inverse_legendre(q, p)
    else:
        v = legendre_inverse(sys, q, p)
    return -sys.grad_q(q, v), v


# -- validation ----------------------------------------------------------------


@dataclass
class GradientReport:
    max_errors: dict
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def _rel_err(fd, user):
    return float(np.max(np.abs(fd - user) / np.maximum(1.0, np.abs(user))))


def validate_gradients(
    sys: LagrangianSystem, probes: int = 20, seed: int = 0, raise_on_failure: bool = True
) -> GradientReport:
    """Compare every user gradient and Jacobian with central differences.

    Probe states are standard normal. The error measure is
    ``|fd - user| / max(1, |user|)``, maximised over entries and probes.
    """
    if probes < 1:
        raise InvalidArgument("probes must be >= 1")
    rng = np.random.default_rng(seed)
    n = sys.n
    errs: dict = {"gradLq": 0.0, "gradLv": 0.0}
    for i in range(1, sys.k + 1):
        errs[f"gradL_{i}"] = 0.0
        errs[f"jacV_{i}"] = 0.0
    for _ in range(probes):
        q = rng.standard_normal(n)
        v = rng.standard_normal(n)
        L = lambda qq, vv: float(sys.lagrangian(qq, vv))
        fd_q = _fd_jacobian(lambda x: np.atleast_1d(L(x, v)), q)[0]
        fd_v = _fd_jacobian(lambda x: np.atleast_1d(L(q, x)), v)[0]
        errs["gradLq"] = max(errs["gradLq"], _rel_err(fd_q, sys.grad_q(q, v)))
        errs["gradLv"] = max(errs["gradLv"], _rel_err(fd_v, sys.grad_v(q, v)))
        for i, ch in enumerate(sys.channels, start=1):
            fd_g = _fd_jacobian(lambda x: np.atleast_1d(ch.potential(x)), q)[0]
            fd_j = _fd_jacobian(lambda x: np.asarray(ch.field(x), float), q)
            errs[f"gradL_{i}"] = max(errs[f"gradL_{i}"], _rel_err(fd_g, ch.grad_potential(q)))
            errs[f"jacV_{i}"] = max(errs[f"jacV_{i}"], _rel_err(fd_j, ch.jacobian(q)))
    report = GradientReport(errs, [k for k, e in errs.items() if not e <= FD_RTOL])
    if raise_on_failure and not report.ok:
        raise GradientValidationError(report)
    return report


def check_hyperregular(sys: LagrangianSystem, probes: int = 20, seed: int = 0, tol: float = 1e-10):
    """Round-trip v -> FL -> FL^{-1} at random states; returns the worst error.

    Raises SingularLegendreError when the round trip fails anywhere.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        q = rng.standard_normal(sys.n)
        v = rng.standard_normal(sys.n)
        back = legendre_inverse(sys, q, legendre(sys, q, v))
        err = float(np.max(np.abs(back - v)))
        if not err <= tol:
            raise SingularLegendreError(f"Legendre round trip error {err:.3e} at q={q}, v={v}")
        worst = max(worst, err)
    return worst


def validate_system(sys: LagrangianSystem, probes: int = 20, seed: int = 0) -> GradientReport:
    report = validate_gradients(sys, probes, seed)
    check_hyperregular(sys, probes, seed)
    return report
