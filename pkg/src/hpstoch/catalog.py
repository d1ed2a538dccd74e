"""Built-in systems, addressable by name from scenario configs.

free_particle(n=1, mass=1.0, force_noise=1.0)
    L = m|v|^2/2; one channel with V_1 = 0, L_1(q) = force_noise * sum(q),
    i.e. additive noise on the momentum.
harmonic_oscillator(mass=1.0, stiffness=1.0, sigma=0.5)
    L = m v^2/2 - k q^2/2 (n = 1); one channel with V_1 = sigma and
    L_1(q) = sigma * q.
planar_central_potential(mass=1.0, omega=1.0, quartic=0.5, sigma=0.5,
                         coupling=0.2, anisotropy=0.0)
    L = m|v|^2/2 - U with U = omega^2 r^2/2 + quartic r^4/4 + anisotropy q_1^2/2
    (n = 2); one channel with the rotation field V_1 = sigma (-q_2, q_1) and
    L_1 = coupling r^2/2. Rotationally symmetric iff anisotropy = 0.
cosh_lagrangian(stiffness=1.0, sigma=0.3, closed_form=True)
    L = sum cosh(v) - k q^2/2 (n = 1); one channel with V_1 = sigma q,
    L_1 = 0. closed_form=False forces Newton inversion of p = sinh(v).
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .mechanics import LagrangianSystem, NoiseChannel


def _sq(x):
    return (x * x).sum(-1)


def _constant(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _const_field(value, n):
    vec = _constant(np.full(n, value))
    zero = _constant(np.zeros((n, n)))

    def field(q):
        return vec if q.ndim == 1 else np.zeros(q.shape) + vec

    def jac(q):
        return zero if q.ndim == 1 else np.zeros(q.shape + (n,))

    return field, jac


def free_particle(n=1, mass=1.0, force_noise=1.0):
    field, jac = _const_field(0.0, n)
    force = _constant(np.full(n, force_noise))
    channel = NoiseChannel(
        potential=lambda q: force_noise * q.sum(-1),
        grad_potential=lambda q: force if q.ndim == 1 else np.zeros(q.shape) + force,
        field=field,
        jacobian=jac,
    )
    return LagrangianSystem(
        n=n,
        lagrangian=lambda q, v: 0.5 * mass * _sq(v),
        grad_q=lambda q, v: np.zeros(v.shape),
        grad_v=lambda q, v: mass * v,
        channels=(channel,),
        inverse_legendre=lambda q, p: p / mass,
        name="free_particle",
        params=dict(n=n, mass=mass, force_noise=force_noise),
    )


def harmonic_oscillator(mass=1.0, stiffness=1.0, sigma=0.5):
    field, jac = _const_field(sigma, 1)
    force = _constant([sigma])
    channel = NoiseChannel(
        potential=lambda q: sigma * q[..., 0],
        grad_potential=lambda q: force if q.ndim == 1 else np.zeros(q.shape) + force,
        field=field,
        jacobian=jac,
    )
    return LagrangianSystem(
        n=1,
        lagrangian=lambda q, v: 0.5 * mass * _sq(v) - 0.5 * stiffness * _sq(q),
        grad_q=lambda q, v: -stiffness * q,
        grad_v=lambda q, v: mass * v,
        channels=(channel,),
        inverse_legendre=lambda q, p: p / mass,
        name="harmonic_oscillator",
        params=dict(mass=mass, stiffness=stiffness, sigma=sigma),
    )


_ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def planar_central_potential(
    mass=1.0, omega=1.0, quartic=0.5, sigma=0.5, coupling=0.2, anisotropy=0.0
):
    aniso = _constant([anisotropy, 0.0])
    rot_t = _constant(sigma * _ROT.T)
    jac_point = _constant(sigma * _ROT)

    def potential(q):
        r2 = _sq(q)
        return 0.5 * omega**2 * r2 + 0.25 * quartic * r2**2 + 0.5 * anisotropy * q[..., 0] ** 2

    def grad_potential(q):
        return (omega**2 + quartic * _sq(q))[..., None] * q + aniso * q

    def rot_jac(q):
        return jac_point if q.ndim == 1 else np.zeros(q.shape + (2,)) + jac_point

    channel = NoiseChannel(
        potential=lambda q: 0.5 * coupling * _sq(q),
        grad_potential=lambda q: coupling * q,
        field=lambda q: q @ rot_t,
        jacobian=rot_jac,
    )
    return LagrangianSystem(
        n=2,
        lagrangian=lambda q, v: 0.5 * mass * _sq(v) - potential(q),
        grad_q=lambda q, v: -grad_potential(q),
        grad_v=lambda q, v: mass * v,
        channels=(channel,),
        inverse_legendre=lambda q, p: p / mass,
        name="planar_central_potential",
        params=dict(
            mass=mass, omega=omega, quartic=quartic, sigma=sigma,
            coupling=coupling, anisotropy=anisotropy,
        ),
    )


def cosh_lagrangian(stiffness=1.0, sigma=0.3, closed_form=True):
    jac_point = _constant([[sigma]])
    channel = NoiseChannel(
        potential=lambda q: np.zeros(q.shape[:-1]),
        grad_potential=lambda q: np.zeros(q.shape),
        field=lambda q: sigma * q,
        jacobian=lambda q: jac_point if q.ndim == 1 else np.zeros(q.shape + (1,)) + jac_point,
    )
    return LagrangianSystem(
        n=1,
        lagrangian=lambda q, v: np.cosh(v).sum(-1) - 0.5 * stiffness * _sq(q),
        grad_q=lambda q, v: -stiffness * q,
        grad_v=lambda q, v: np.sinh(v),
        channels=(channel,),
        inverse_legendre=(lambda q, p: np.arcsinh(p)) if closed_form else None,
        name="cosh_lagrangian",
        params=dict(stiffness=stiffness, sigma=sigma, closed_form=closed_form),
    )


CATALOG = {
    "free_particle": free_particle,
    "harmonic_oscillator": harmonic_oscillator,
    "planar_central_potential": planar_central_potential,
    "cosh_lagrangian": cosh_lagrangian,
}


def build(name: str, **params) -> LagrangianSystem:
    try:
        factory = CATALOG[name]
    except KeyError:
        raise ConfigError(f"unknown system {name!r}; known: {sorted(CATALOG)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None
