import numpy as np
import pytest

from hpstoch.mechanics import LagrangianSystem, NoiseChannel
from hpstoch.paths import NoiseSpec, Time, Zero, make_uniform_grid, sample_noise


def channel(potential, grad_potential, field, jacobian):
    return NoiseChannel(potential, grad_potential, field, jacobian)


def quadratic_system(n=1, mass=1.0, stiffness=0.0, channels=()):
    """L = m|v|^2/2 - k|q|^2/2 with arbitrary noise channels."""
    return LagrangianSystem(
        n=n,
        lagrangian=lambda q, v: 0.5 * mass * (v * v).sum(-1) - 0.5 * stiffness * (q * q).sum(-1),
        grad_q=lambda q, v: -stiffness * q,
        grad_v=lambda q, v: mass * v,
        channels=channels,
        inverse_legendre=lambda q, p: p / mass,
    )


def additive_momentum_channel(n=1):
    """V = 0, L_1 = sum(q): noise enters p additively."""
    return channel(
        lambda q: q.sum(-1),
        lambda q: np.ones(q.shape),
        lambda q: np.zeros(q.shape),
        lambda q: np.zeros(q.shape + (n,)),
    )


def deterministic_noise(grid, k):
    return sample_noise(NoiseSpec((Time(),) + (Zero(),) * k), grid, 0)


@pytest.fixture
def unit_grid():
    return make_uniform_grid(1.0, 1000)
