import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import additive_momentum_channel, channel, quadratic_system
from hpstoch import catalog
from hpstoch.errors import ConfigError, GradientValidationError, InvalidArgument, SingularLegendreError
from hpstoch.mechanics import (
    LagrangianSystem,
    PontryaginState,
    check_hyperregular,
    generalized_energy,
    hamiltonian,
    legendre,
    legendre_inverse,
    noise_hamiltonian,
    validate_gradients,
    validate_system,
)


def identity_field(n=1):
    return channel(
        lambda q: 0.5 * (q * q).sum(-1),
        lambda q: q,
        lambda q: q,
        lambda q: np.broadcast_to(np.eye(n), q.shape + (n,)).copy(),
    )


def rotation_field():
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    return channel(
        lambda q: np.zeros(q.shape[:-1]),
        lambda q: np.zeros(q.shape),
        lambda q: q @ R.T,
        lambda q: np.broadcast_to(R, q.shape + (2,)).copy(),
    )


def test_legendre_examples():
    free = quadratic_system(n=3)
    v = np.array([0.3, -1.0, 2.0])
    np.testing.assert_array_equal(legendre(free, np.zeros(3), v), v)
    assert legendre(quadratic_system(mass=2.0), [0.0], [3.0])[0] == 6.0
    cosh = catalog.cosh_lagrangian()
    assert legendre(cosh, [0.0], [1.0])[0] == pytest.approx(1.1752012, abs=1e-7)


@pytest.mark.parametrize("closed_form", [True, False])
def test_legendre_inverse_cosh(closed_form):
    sys = catalog.cosh_lagrangian(closed_form=closed_form)
    v = legendre_inverse(sys, [0.4], [math.sinh(1.0)])
    assert abs(v[0] - math.asinh(math.sinh(1.0))) <= 1e-10


def test_legendre_inverse_batched_newton():
    sys = catalog.cosh_lagrangian(closed_form=False)
    p = np.array([[-3.0], [0.0], [0.5], [10.0]])
    np.testing.assert_allclose(legendre_inverse(sys, np.zeros((4, 1)), p), np.arcsinh(p), atol=1e-10)


def test_legendre_inverse_free():
    p = np.array([0.1, -2.0])
    np.testing.assert_array_equal(legendre_inverse(quadratic_system(n=2), np.zeros(2), p), p)


def test_degenerate_lagrangian_is_singular():
    linear = LagrangianSystem(
        n=1,
        lagrangian=lambda q, v: v.sum(-1),
        grad_q=lambda q, v: np.zeros(q.shape),
        grad_v=lambda q, v: np.ones(v.shape),
    )
    with pytest.raises(SingularLegendreError):
        legendre_inverse(linear, [0.0], [2.0])
    with pytest.raises(SingularLegendreError):
        check_hyperregular(linear)


def test_generalized_energy_examples():
    osc = quadratic_system(stiffness=1.0)
    s = PontryaginState(np.array([1.0]), np.array([2.0]), np.array([2.0]))
    assert generalized_energy(osc, 0, s) == pytest.approx(2.5)
    const = channel(lambda q: np.zeros(q.shape[:-1]), lambda q: np.zeros(q.shape),
                    lambda q: np.ones(q.shape), lambda q: np.zeros(q.shape + (1,)))
    sys = quadratic_system(channels=(const,))
    assert generalized_energy(sys, 1, PontryaginState(np.zeros(1), np.zeros(1), np.array([3.0]))) == 3.0
    sys = quadratic_system(channels=(identity_field(),))
    assert generalized_energy(sys, 1, PontryaginState(np.array([2.0]), np.zeros(1), np.array([1.0]))) == 0.0
    with pytest.raises(InvalidArgument):
        generalized_energy(sys, 2, s)
    with pytest.raises(InvalidArgument):
        generalized_energy(sys, -1, s)


def test_noise_hamiltonian_examples():
    sys = quadratic_system(channels=(additive_momentum_channel(),))
    h, dq, dp = noise_hamiltonian(sys, 1, np.array([1.7]), np.array([0.3]))
    assert h == pytest.approx(-1.7) and dq[0] == -1.0 and dp[0] == 0.0

    lin = channel(lambda q: np.zeros(q.shape[:-1]), lambda q: np.zeros(q.shape),
                  lambda q: q, lambda q: np.broadcast_to(np.eye(1), q.shape + (1,)).copy())
    h, dq, dp = noise_hamiltonian(quadratic_system(channels=(lin,)), 1, np.array([2.0]), np.array([3.0]))
    assert (h, dq[0], dp[0]) == (6.0, 3.0, 2.0)

    rot = quadratic_system(n=2, channels=(rotation_field(),))
    h, _, _ = noise_hamiltonian(rot, 1, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert h == 1.0
    with pytest.raises(InvalidArgument):
        noise_hamiltonian(rot, 0, np.zeros(2), np.zeros(2))
    with pytest.raises(InvalidArgument):
        noise_hamiltonian(rot, 2, np.zeros(2), np.zeros(2))


def _fd_grad(f, x, h=1e-6):
    out = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        out[j] = (f(x + e) - f(x - e)) / (2 * h)
    return out


@pytest.mark.parametrize("name", sorted(catalog.CATALOG))
def test_noise_hamiltonian_gradients_match_fd(name):
    sys = catalog.build(name)
    rng = np.random.default_rng(1)
    for _ in range(10):
        q, p = rng.standard_normal(sys.n), rng.standard_normal(sys.n)
        _, dq, dp = noise_hamiltonian(sys, 1, q, p)
        fq = _fd_grad(lambda x: noise_hamiltonian(sys, 1, x, p)[0], q)
        fp = _fd_grad(lambda x: noise_hamiltonian(sys, 1, q, x)[0], p)
        np.testing.assert_allclose(dq, fq, rtol=1e-6, atol=1e-6)
        np.testing.assert_allclose(dp, fp, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("name", sorted(catalog.CATALOG))
def test_hamiltonian_gradients_match_fd(name):
    sys = catalog.build(name)
    rng = np.random.default_rng(2)
    for _ in range(10):
        q, p = rng.standard_normal(sys.n), rng.standard_normal(sys.n)
        _, dq, dp = hamiltonian(sys, q, p)
        np.testing.assert_allclose(dq, _fd_grad(lambda x: hamiltonian(sys, x, p)[0], q), rtol=1e-6, atol=1e-6)
        np.testing.assert_allclose(dp, _fd_grad(lambda x: hamiltonian(sys, q, x)[0], p), rtol=1e-6, atol=1e-6)


def test_validate_gradients_examples():
    report = validate_gradients(catalog.harmonic_oscillator())
    assert report.ok and max(report.max_errors.values()) <= 1e-8
    assert validate_gradients(quadratic_system(n=2)).ok

    good = catalog.harmonic_oscillator()
    bad = LagrangianSystem(good.n, good.lagrangian, lambda q, v: -good.grad_q(q, v), good.grad_v,
                           good.channels, good.inverse_legendre)
    with pytest.raises(GradientValidationError, match="gradLq") as info:
        validate_gradients(bad)
    assert info.value.report.failures == ["gradLq"]
    assert not validate_gradients(bad, raise_on_failure=False).ok
    with pytest.raises(InvalidArgument):
        validate_gradients(good, probes=0)


def test_validate_gradients_names_channel_jacobian():
    good = catalog.planar_central_potential()
    ch = good.channels[0]
    wrong = channel(ch.potential, ch.grad_potential, ch.field, lambda q: -ch.jacobian(q))
    sys = LagrangianSystem(2, good.lagrangian, good.grad_q, good.grad_v, (wrong,), good.inverse_legendre)
    with pytest.raises(GradientValidationError, match="jacV_1"):
        validate_gradients(sys)


@pytest.mark.parametrize("name", sorted(catalog.CATALOG))
def test_catalog_systems_validate(name):
    assert validate_system(catalog.build(name)).ok


def test_catalog_build_errors():
    with pytest.raises(ConfigError):
        catalog.build("pendulum")
    with pytest.raises(ConfigError):
        catalog.build("harmonic_oscillator", spring=2.0)


def test_channel_index():
    sys = catalog.harmonic_oscillator()
    assert sys.k == 1 and sys.channel(1) is sys.channels[0]
    with pytest.raises(InvalidArgument):
        sys.channel(0)


vecs = st.lists(st.floats(-3, 3), min_size=1, max_size=1).map(np.array)


@settings(max_examples=60, deadline=None)
@given(vecs, vecs, st.booleans())
def test_round_trip_cosh(q, v, closed):
    sys = catalog.cosh_lagrangian(closed_form=closed)
    assert np.max(np.abs(legendre_inverse(sys, q, legendre(sys, q, v)) - v)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4).map(np.array))
def test_energy_on_legendre_submanifold(x):
    sys = catalog.planar_central_potential()
    q, v = x[:2], x[2:]
    p = legendre(sys, q, v)
    classical = float(p @ v - sys.lagrangian(q, v))
    assert generalized_energy(sys, 0, PontryaginState(q, v, p)) == pytest.approx(classical, abs=1e-12)
    assert hamiltonian(sys, q, p)[0] == pytest.approx(classical, abs=1e-12)
