import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import additive_momentum_channel, deterministic_noise, quadratic_system
from hpstoch import catalog
from hpstoch.errors import IntegratorStepError, InvalidArgument
from hpstoch.integrators import (
    StratonovichOperator,
    hp_equivalence_check,
    hp_operator,
    integrate_hamiltonian,
    integrate_implicit_el,
    integrate_stratonovich,
)
from hpstoch.paths import (
    Brownian,
    NoiseSpec,
    SamplePath,
    Time,
    TimeGrid,
    make_uniform_grid,
    sample_noise,
)

INITIAL = {
    "free_particle": ([0.2], [1.0]),
    "harmonic_oscillator": ([1.0], [0.0]),
    "planar_central_potential": ([1.0, 0.0], [0.0, 1.0]),
    "cosh_lagrangian": ([1.0], [0.3]),
}


def test_free_particle_straight_line():
    sys = catalog.free_particle()
    grid = make_uniform_grid(1.0, 10)
    path = integrate_implicit_el(sys, deterministic_noise(grid, 1), [0.0], [1.0])
    assert path.q[-1, 0] == 1.0
    np.testing.assert_allclose(path.q[:, 0], grid.nodes, rtol=0, atol=1e-15)


def test_harmonic_oscillator_cos():
    sys = catalog.harmonic_oscillator()
    grid = make_uniform_grid(1.0, 1000)
    path = integrate_implicit_el(sys, deterministic_noise(grid, 1), [1.0], [0.0])
    assert abs(path.q[-1, 0] - math.cos(1.0)) <= 1e-4
    assert path.q[-1, 0] == pytest.approx(0.5403023, abs=1e-4)


def test_additive_momentum_noise_exact():
    sys = quadratic_system(channels=(additive_momentum_channel(),))
    noise = sample_noise(NoiseSpec.standard(1), make_uniform_grid(1.0, 1000), 3)
    path = integrate_implicit_el(sys, noise, [0.0], [0.7])
    X1 = noise.values[:, 1]
    np.testing.assert_allclose(path.p[:, 0], 0.7 + X1 - X1[0], rtol=0, atol=1e-13)


def test_legendre_constraint_on_every_node():
    for name, (q0, p0) in INITIAL.items():
        sys = catalog.build(name)
        noise = sample_noise(NoiseSpec.standard(sys.k), make_uniform_grid(1.0, 200), 1)
        assert integrate_implicit_el(sys, noise, q0, p0).legendre_residual(sys) <= 1e-10
    sys = catalog.cosh_lagrangian(closed_form=False)
    noise = sample_noise(NoiseSpec.standard(1), make_uniform_grid(1.0, 100), 2)
    assert integrate_implicit_el(sys, noise, [1.0], [0.3]).legendre_residual(sys) <= 1e-10


def test_diagnostics_recorded():
    sys = catalog.planar_central_potential()
    noise = sample_noise(NoiseSpec.standard(1), make_uniform_grid(1.0, 100), 1)
    path = integrate_implicit_el(sys, noise, [1.0, 0.0], [0.0, 1.0])
    assert path.iterations.shape == (100,) and path.residuals.shape == (100,)
    assert path.iterations.min() >= 1 and path.iterations.max() <= 50
    assert np.all(path.residuals <= 1e-12 * max(1.0, np.abs(path.stacked()).max()))


def test_deterministic_order_two():
    sys = catalog.harmonic_oscillator()
    errs = []
    for steps in (50, 100, 200, 400):
        grid = make_uniform_grid(1.0, steps)
        q = integrate_implicit_el(sys, deterministic_noise(grid, 1), [1.0], [0.0]).q[-1, 0]
        errs.append(abs(q - math.cos(1.0)))
    ratios = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((ratios > 1.9) & (ratios < 2.1))


def test_hamiltonian_energy_conserved():
    sys = catalog.harmonic_oscillator()
    grid = make_uniform_grid(1.0, 1000)
    path = integrate_hamiltonian(sys, deterministic_noise(grid, 1), [1.0], [0.0])
    energy = 0.5 * (path.p[:, 0] ** 2 + path.q[:, 0] ** 2)
    assert np.max(np.abs(energy - energy[0])) <= 1e-10


@pytest.mark.parametrize("name", sorted(INITIAL))
def test_hamiltonian_matches_implicit_el(name):
    sys = catalog.build(name)
    q0, p0 = INITIAL[name]
    noise = sample_noise(NoiseSpec.standard(sys.k), make_uniform_grid(1.0, 500), 4)
    el = integrate_implicit_el(sys, noise, q0, p0)
    ham = integrate_hamiltonian(sys, noise, q0, p0)
    assert np.max(np.abs(el.q - ham.q)) <= 1e-9 and np.max(np.abs(el.p - ham.p)) <= 1e-9


def test_momentum_noise_does_not_enter_q():
    sys = quadratic_system(channels=(additive_momentum_channel(),))
    noise = sample_noise(NoiseSpec.standard(1), make_uniform_grid(1.0, 300), 6)
    path = integrate_hamiltonian(sys, noise, [0.0], [0.0])
    dq = np.diff(path.q[:, 0])
    pbar = 0.5 * (path.p[1:, 0] + path.p[:-1, 0])
    np.testing.assert_allclose(dq, pbar * noise.grid.step, rtol=0, atol=1e-15)


def test_shared_quadratic_invariant():
    # isotropic oscillator with rotation noise: energy is invariant under both flows
    sys = catalog.planar_central_potential(quartic=0.0, coupling=0.0, sigma=1.0)
    noise = sample_noise(NoiseSpec.standard(1), make_uniform_grid(1.0, 1000), 2)
    path = integrate_hamiltonian(sys, noise, [1.0, 0.3], [-0.2, 1.0])
    energy = 0.5 * ((path.p**2).sum(1) + (path.q**2).sum(1))
    assert np.max(np.abs(energy - energy[0])) <= 1e-8


def test_stratonovich_constant_field():
    grid = make_uniform_grid(1.0, 10)
    X = SamplePath(grid, grid.nodes)
    S = StratonovichOperator(1, 1, lambda x, y: np.array([[2.5]]))
    assert integrate_stratonovich(S, X, [1.0]).values[-1, 0] == pytest.approx(3.5, abs=1e-14)
    zero = StratonovichOperator(1, 2, lambda x, y: np.zeros((2, 1)))
    np.testing.assert_array_equal(integrate_stratonovich(zero, X, [1.0, -2.0]).values, [[1.0, -2.0]] * 11)


def _geometric_error(steps, seed=0):
    # fine Brownian path subsampled, so every level sees the same realization
    fine = sample_noise(NoiseSpec((Time(), Brownian())), make_uniform_grid(1.0, 4000), seed)
    factor = 4000 // steps
    X = SamplePath(make_uniform_grid(1.0, steps), fine.values[::factor])
    S = StratonovichOperator(2, 1, lambda x, y: np.array([[0.0, y[0]]]))
    y = integrate_stratonovich(S, X, [1.0]).values[-1, 0]
    return abs(y - math.exp(X.values[-1, 1]))


def test_stratonovich_geometric_noise():
    coarse, fine = _geometric_error(500), _geometric_error(1000)
    C = coarse / (1 / 500)
    assert fine <= 10 * (1 / 1000) * max(C, 1.0)
    assert _geometric_error(4000) <= 1e-4


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_step_failure_reports_index():
    grid = TimeGrid([0.0, 5.0, 10.0])
    S = StratonovichOperator(1, 1, lambda x, y: np.array([[y[0] ** 2]]))
    with pytest.raises(IntegratorStepError) as info:
        integrate_stratonovich(S, SamplePath(grid, grid.nodes), [1.0])
    assert info.value.step == 0


def test_dimension_checks():
    sys = catalog.harmonic_oscillator()
    noise = sample_noise(NoiseSpec.standard(2), make_uniform_grid(1.0, 10), 0)
    with pytest.raises(InvalidArgument):
        integrate_implicit_el(sys, noise, [0.0], [1.0])
    good = sample_noise(NoiseSpec.standard(1), make_uniform_grid(1.0, 10), 0)
    with pytest.raises(InvalidArgument):
        integrate_implicit_el(sys, good, [0.0, 1.0], [1.0, 0.0])
    with pytest.raises(InvalidArgument):
        integrate_implicit_el(sys, good, [0.0], [1.0], grid=make_uniform_grid(1.0, 20))


def test_hp_operator_examples():
    S = hp_operator(catalog.harmonic_oscillator())
    np.testing.assert_array_equal(S.columns(np.zeros(2), np.array([1.0, 0.0]))[:, 0], [0.0, -1.0])

    rot = catalog.planar_central_potential(sigma=1.0, coupling=0.0)
    col = hp_operator(rot).columns(np.zeros(2), np.array([1.0, 0.0, 0.0, 1.0]))[:, 1]
    np.testing.assert_array_equal(col, [0.0, 1.0, -1.0, 0.0])

    add = quadratic_system(channels=(additive_momentum_channel(),))
    np.testing.assert_array_equal(hp_operator(add).columns(np.zeros(2), np.array([0.4, 2.0]))[:, 1], [0.0, 1.0])
    assert hp_operator(add).dual(np.zeros(2), np.array([0.4, 2.0])).shape == (2, 2)


@pytest.mark.parametrize("name", sorted(INITIAL))
def test_hp_equivalence(name):
    sys = catalog.build(name)
    q0, p0 = INITIAL[name]
    grid = make_uniform_grid(1.0, 300)
    for seed in range(3):
        noise = sample_noise(NoiseSpec.standard(sys.k), grid, seed)
        assert hp_equivalence_check(sys, noise, q0, p0) <= 1e-9
    assert hp_equivalence_check(sys, deterministic_noise(grid, sys.k), q0, p0) <= 1e-12


def test_hp_equivalence_detects_perturbed_operator():
    sys = catalog.harmonic_oscillator()
    noise = sample_noise(NoiseSpec.standard(1), make_uniform_grid(1.0, 1000), 0)
    bad = hp_operator(sys).scaled_column(0, 1.1)
    assert hp_equivalence_check(sys, noise, [1.0], [0.0], operator=bad) > 1e-3


def test_batch_matches_solo_runs():
    sys = catalog.cosh_lagrangian(closed_form=False)
    grid = make_uniform_grid(1.0, 100)
    noises = [sample_noise(NoiseSpec.standard(1), grid, s) for s in range(4)]
    batch = integrate_implicit_el(sys, noises, [1.0], [0.3])
    for noise, path in zip(noises, batch):
        solo = integrate_implicit_el(sys, noise, [1.0], [0.3])
        np.testing.assert_array_equal(solo.stacked(), path.stacked())
        np.testing.assert_array_equal(solo.iterations, path.iterations)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.3, 3.0))
def test_time_change_equivariance(seed, power):
    # same noise values on a monotonically reparameterized grid give the same nodes
    sys = catalog.planar_central_potential()
    grid = make_uniform_grid(1.0, 60)
    noise = sample_noise(NoiseSpec.standard(1), grid, seed)
    warped = TimeGrid(2.0 * grid.nodes**power)
    moved = SamplePath(warped, noise.values)
    a = integrate_implicit_el(sys, noise, [1.0, 0.0], [0.0, 1.0])
    b = integrate_implicit_el(sys, moved, [1.0, 0.0], [0.0, 1.0])
    np.testing.assert_array_equal(a.stacked(), b.stacked())
