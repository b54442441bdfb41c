import tracemalloc
from dataclasses import replace

import numpy as np
import pytest

from superabsorber.lib.errors import DimensionError, NoiseCalibrationError, ValidationError
from superabsorber.lib.quantum import core
from superabsorber.lib.quantum.core import (
    DensityMatrix,
    NoiseSpec,
    OperatorMatrix,
    calibrate_noise,
    evolve,
    fit_discretization_bias,
    stochastic_evolve,
    trace_distance,
)
from superabsorber.lib.quantum.superatom import SuperatomParams, build_model


def model_for(n_atoms: int, gamma: float):
    return build_model(SuperatomParams.from_collective(n_atoms, 1.0, gamma))


def test_no_noise_reproduces_unitary_evolution():
    model = model_for(1, 0.0)
    t = np.linspace(0, 5, 26)
    noise = NoiseSpec(gamma=0.0, n_sites=1, seed=7, dt=0.01, ensemble_size=1)

    result = stochastic_evolve(
        model.ground_state(), model.hamiltonian, model.jump_operators, noise, t
    )
    exact = evolve(model.ground_state(), model.hamiltonian, [], 0.0, t, tol=1e-10)

    assert result.calibrated_gamma == 0.0
    for a, b in zip(result.states, exact):
        assert trace_distance(a, b) < 1e-7


def test_single_site_coherence_decays_at_the_lindblad_rate():
    gamma = 1.0
    h = OperatorMatrix(np.zeros((2, 2)), hermitian=True, label='H')
    site = [OperatorMatrix.projector(2, 1, label='c_1')]
    rho0 = DensityMatrix.from_ket([1, 1])
    t = np.array([0.0, 0.5, 1.0, 2.0])

    noise = NoiseSpec(gamma=gamma, n_sites=1, seed=11, dt=0.01, ensemble_size=2000)
    result = stochastic_evolve(rho0, h, site, noise, t)
    exact = evolve(rho0, h, site, gamma, t, tol=1e-10)

    for k in range(len(t)):
        assert abs(exact[k][0, 1] - 0.5 * np.exp(-gamma * t[k])) < 1e-8
        assert abs(result.states[k][0, 1] - exact[k][0, 1]) < 0.05
    assert result.calibrated_gamma == pytest.approx(gamma, rel=0.2)


def test_results_do_not_depend_on_worker_count():
    model = model_for(3, 1.0)
    t = np.linspace(0, 2, 5)
    noise = NoiseSpec(gamma=1.0, n_sites=3, seed=2024, dt=0.02, ensemble_size=300)

    args = (model.ground_state(), model.hamiltonian, model.jump_operators, noise, t)
    serial = stochastic_evolve(*args, workers=1)
    threaded = stochastic_evolve(*args, workers=4)
    again = stochastic_evolve(*args)

    for a, b, c in zip(serial.states, threaded.states, again.states):
        assert np.array_equal(a.elements, b.elements)
        assert np.array_equal(a.elements, c.elements)
    assert np.array_equal(serial.stderr['rho_00'], threaded.stderr['rho_00'])


def test_phase_chunking_does_not_change_the_ensemble(monkeypatch):
    model = model_for(2, 1.0)
    t = np.linspace(0, 1, 3)
    noise = NoiseSpec(gamma=1.0, n_sites=2, seed=9, dt=0.01, ensemble_size=20)
    args = (model.ground_state(), model.hamiltonian, model.jump_operators, noise, t)

    whole = stochastic_evolve(*args)
    monkeypatch.setattr(core, 'NOISE_CHUNK_STEPS', 7)
    chunked = stochastic_evolve(*args)

    for a, b in zip(whole.states, chunked.states):
        assert np.array_equal(a.elements, b.elements)
    assert np.array_equal(whole.stderr['rho_00'], chunked.stderr['rho_00'])


def test_long_horizons_run_in_bounded_memory():
    model = model_for(1, 1.0)
    t = np.linspace(0, 25, 6)
    noise = NoiseSpec(gamma=1.0, n_sites=1, seed=3, dt=0.002, ensemble_size=64)
    assert 25 / noise.dt > 1e4

    tracemalloc.start()
    try:
        result = stochastic_evolve(
            model.ground_state(), model.hamiltonian, model.jump_operators, noise, t
        )
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()

    # the whole trajectory of phase factors alone would take 64 * 12500 * 2 * 16 bytes
    assert peak < 8 * 2**20
    assert len(result.states) == len(t)


def test_a_different_seed_gives_a_different_ensemble():
    model = model_for(3, 1.0)
    t = np.linspace(0, 2, 5)

    def final(seed: int) -> np.ndarray:
        noise = NoiseSpec(gamma=1.0, n_sites=3, seed=seed, dt=0.02, ensemble_size=50)
        return stochastic_evolve(
            model.ground_state(), model.hamiltonian, model.jump_operators, noise, t
        ).states[-1].elements

    assert not np.array_equal(final(1), final(2))


def test_averaged_states_are_density_matrices():
    model = model_for(3, 1.0)
    noise = NoiseSpec(gamma=1.0, n_sites=3, seed=5, dt=0.02, ensemble_size=64)
    result = stochastic_evolve(
        model.ground_state(), model.hamiltonian, model.jump_operators, noise, np.linspace(0, 3, 7)
    )
    for s in result.states:
        s.check(trace_tol=1e-10, hermitian_tol=1e-12)


def test_coarse_dt_fails_calibration_before_the_run():
    noise = NoiseSpec(gamma=1.0, n_sites=1, seed=0, dt=0.1, ensemble_size=10)
    with pytest.raises(NoiseCalibrationError, match='does not resolve'):
        calibrate_noise(noise)


def test_dt_must_resolve_the_coherent_scale():
    model = build_model(SuperatomParams.from_collective(1, 10.0, 0.1))
    noise = NoiseSpec(gamma=0.1, n_sites=1, seed=0, dt=0.01, ensemble_size=10)
    with pytest.raises(NoiseCalibrationError):
        stochastic_evolve(
            model.ground_state(), model.hamiltonian, model.jump_operators, noise, [0.0, 1.0]
        )


def test_site_count_must_match_the_noise():
    model = model_for(3, 1.0)
    noise = NoiseSpec(gamma=1.0, n_sites=2, seed=0, dt=0.01, ensemble_size=10)
    with pytest.raises(ValidationError, match='3 projectors'):
        stochastic_evolve(
            model.ground_state(), model.hamiltonian, model.jump_operators, noise, [0.0, 1.0]
        )


def test_site_projectors_must_be_diagonal():
    model = model_for(1, 1.0)
    noise = NoiseSpec(gamma=1.0, n_sites=1, seed=0, dt=0.01, ensemble_size=10)
    plus = OperatorMatrix.from_ket(np.array([1, 1]) / np.sqrt(2), label='plus')
    with pytest.raises(ValidationError, match='diagonal projector'):
        stochastic_evolve(model.ground_state(), model.hamiltonian, [plus], noise, [0.0, 1.0])


def test_observable_dimension_is_checked():
    model = model_for(1, 1.0)
    noise = NoiseSpec(gamma=1.0, n_sites=1, seed=0, dt=0.01, ensemble_size=10)
    with pytest.raises(DimensionError):
        stochastic_evolve(
            model.ground_state(),
            model.hamiltonian,
            model.jump_operators,
            noise,
            [0.0, 1.0],
            observables={'wrong': OperatorMatrix.projector(3, 0)},
        )


def test_discretization_bias_is_fitted_over_the_steps():
    model = model_for(1, 1.0)
    t = np.linspace(0, 2, 5)
    noise = NoiseSpec(gamma=1.0, n_sites=1, seed=13, dt=0.01, ensemble_size=200)
    args = (model.ground_state(), model.hamiltonian, model.jump_operators)
    exact = evolve(*args, model.rate, t, tol=1e-10)

    bias = fit_discretization_bias(*args, noise, t, exact, [0.01, 0.02, 0.04])

    assert bias.dts == (0.01, 0.02, 0.04)
    assert len(bias.runs) == len(bias.distances) == 3
    assert bias.coefficient >= 0
    assert bias.distances[0] == max(
        trace_distance(a, b) for a, b in zip(bias.runs[0].states, exact)
    )
    assert bias.bound(0.01) == pytest.approx(3 / np.sqrt(200) + 0.01 * bias.coefficient)

    plain = stochastic_evolve(*args, replace(noise, dt=0.02), t)
    assert np.array_equal(plain.states[-1].elements, bias.runs[1].states[-1].elements)


def test_discretization_bias_validation():
    model = model_for(1, 1.0)
    t = np.linspace(0, 1, 3)
    noise = NoiseSpec(gamma=1.0, n_sites=1, seed=0, dt=0.01, ensemble_size=4)
    args = (model.ground_state(), model.hamiltonian, model.jump_operators)
    exact = evolve(*args, model.rate, t)

    with pytest.raises(ValidationError, match='two distinct'):
        fit_discretization_bias(*args, noise, t, exact, [0.01, 0.01])
    with pytest.raises(ValidationError, match='reference'):
        fit_discretization_bias(*args, noise, t, exact[:2], [0.01, 0.02])


@pytest.mark.slow
def test_ensemble_average_matches_the_master_equation():
    model = model_for(9, 1.0)
    t = np.linspace(0, 10, 51)
    ensemble = 4000
    noise = NoiseSpec(gamma=1.0, n_sites=9, seed=42, dt=0.02, ensemble_size=ensemble)

    exact = evolve(model.ground_state(), model.hamiltonian, model.jump_operators, model.rate, t)
    bias = fit_discretization_bias(
        model.ground_state(),
        model.hamiltonian,
        model.jump_operators,
        noise,
        t,
        exact,
        [0.02, 0.03, 0.04],
        observables={'rho_gg': model.ground_projector},
        workers=4,
    )
    result = bias.runs[0]
    rho_gg = np.array([s.populations[0] for s in exact])

    assert np.max(np.abs(result.series['rho_gg'].values - rho_gg)) < 0.05
    assert np.all(result.stderr['rho_gg'] < 3 / np.sqrt(ensemble))
    assert bias.distances[0] < bias.bound(noise.dt)
