from math import exp, factorial

import numpy as np
import pytest

from superabsorber.lib.errors import EmptyBranchError, TruncationError, ValidationError
from superabsorber.lib.quantum.channel import (
    EXCITED,
    GROUND,
    JointCellField,
    asymptotic_subtract,
    build_channel_generator,
    cascade,
    closed_form_channel,
    evolve_channel,
    multi_subtract,
    subtraction_weights,
)
from superabsorber.lib.quantum.core import trace_distance
from superabsorber.lib.quantum.fock import FockField
from superabsorber.lib.quantum.states import StatePrepSpec, prepare


def poisson(mean: float, n: int) -> float:
    return exp(-mean) * mean**n / factorial(n)


def test_jump_operator_is_nilpotent_and_lowers_the_field():
    n_max = 5
    c = build_channel_generator(0.5, n_max).jump.elements
    d = n_max + 1
    assert not np.any(c @ c)
    for n in range(1, d):
        # |G, n> -> sqrt(n) |E, n - 1>
        assert c[EXCITED * d + n - 1, GROUND * d + n] == pytest.approx(np.sqrt(n))
    assert np.count_nonzero(c) == n_max


@pytest.mark.parametrize('gamma_eff, n_max', [(-0.1, 4), (np.inf, 4), (1.0, 0)])
def test_generator_validation(gamma_eff, n_max):
    with pytest.raises(ValidationError):
        build_channel_generator(gamma_eff, n_max)


def test_vacuum_is_stationary():
    joint0 = JointCellField.ground(FockField.vacuum(4))
    final = evolve_channel(joint0, 1.0, [0.0, 5.0])[-1]
    assert trace_distance(final.rho_joint, joint0.rho_joint) < 1e-12


def test_single_photon_cell_ground_population_decays():
    gamma_eff = 0.8
    t = np.linspace(0, 3, 7)
    states = evolve_channel(JointCellField.ground(FockField.fock(1, 3)), gamma_eff, t, tol=1e-10)
    ground = np.array([s.cell_populations[0] for s in states])
    assert np.allclose(ground, np.exp(-2 * gamma_eff * t), atol=1e-8)


def test_closed_form_matches_integration(random_field):
    field = random_field(6, support=4)
    gamma_eff = 0.7
    t = [0.0, 0.5, 2.0]
    states = evolve_channel(JointCellField.ground(field), gamma_eff, t, tol=1e-10)
    for s, ti in zip(states, t):
        exact = closed_form_channel(field, gamma_eff, ti)
        assert np.allclose(s.rho_joint.elements, exact.rho_joint.elements, atol=1e-7)


def test_subtraction_weights():
    w = subtraction_weights(3)
    assert np.allclose(w, w.T)
    assert np.all(w[0] == 0)
    assert np.allclose(np.diag(w)[1:], 1.0)
    assert w[1, 2] == pytest.approx(2 * np.sqrt(2) / 3)
    assert np.all(w <= 1)


def test_superposition_of_one_and_two_photons():
    result = asymptotic_subtract(FockField.from_ket(np.array([0, 1, 1]) / np.sqrt(2), n_max=4))
    c = np.sqrt(2) / 3
    assert result.p_vac == pytest.approx(0.0, abs=1e-15)
    assert result.p_fire == pytest.approx(1.0)
    assert np.allclose(result.rho_out.rho.elements[:2, :2], [[0.5, c], [c, 0.5]], atol=1e-12)
    assert np.allclose(result.rho_out.rho.elements[2:], 0)


def test_p_vac_is_the_input_vacuum_population():
    field = FockField.diagonal([0.3, 0.5, 0.2], n_max=5)
    result = asymptotic_subtract(field)
    assert result.p_vac == pytest.approx(0.3, abs=1e-12)
    assert result.rho_joint_final.cell_populations == pytest.approx((0.3, 0.7))
    assert np.allclose(result.rho_out.populations[:2], [0.5 / 0.7, 0.2 / 0.7])


def test_vacuum_input_has_no_conditional_output():
    result = asymptotic_subtract(FockField.vacuum(4))
    assert result.p_vac == 1.0
    assert result.rho_out is None


@pytest.mark.parametrize('n', [1, 2, 5])
def test_fock_state_loses_exactly_one_photon(n):
    result = asymptotic_subtract(FockField.fock(n, 8))
    assert result.p_fire == pytest.approx(1.0)
    assert result.rho_out.populations[n - 1] == pytest.approx(1.0)


def test_mean_photon_number_drops_by_one_per_absorbed_photon(random_field):
    field = random_field(10, support=7)
    result = asymptotic_subtract(field)
    n = np.arange(field.n_max + 1)
    lost = np.dot(np.clip(n - 1, 0, None), field.populations)
    assert result.rho_out.mean_photon_number * result.p_fire == pytest.approx(lost, abs=1e-12)


def test_absorber_saturates_after_one_photon():
    # the conditional output of a fired cell is what a second cell sees
    field = prepare(StatePrepSpec.coherent(1.2))
    once = asymptotic_subtract(field)
    joint = once.rho_joint_final
    assert joint.cell_populations[EXCITED] == pytest.approx(once.p_fire)
    p_vac, vac = joint.conditional(GROUND)
    assert p_vac == pytest.approx(once.p_vac)
    assert vac.populations[0] == pytest.approx(1.0)


def test_long_time_channel_matches_the_asymptotic_output(random_field):
    field = random_field(12, support=8)
    final = evolve_channel(JointCellField.ground(field), 1.0, [0.0, 12.0])[-1]
    p_fire, out = final.conditional(EXCITED)
    expected = asymptotic_subtract(field)
    assert p_fire == pytest.approx(expected.p_fire, abs=1e-8)
    assert trace_distance(out.rho, expected.rho_out.rho) < 1e-5


@pytest.mark.slow
def test_channel_oracle_on_random_inputs(rng, random_field):
    for _ in range(50):
        field = random_field(12, support=int(rng.integers(2, 9)))
        final = evolve_channel(JointCellField.ground(field), 1.0, [0.0, 12.0])[-1]
        expected = asymptotic_subtract(field)
        assert expected.p_vac == pytest.approx(float(np.real(field.rho[0, 0])), abs=1e-10)
        _, out = final.conditional(EXCITED)
        assert trace_distance(out.rho, expected.rho_out.rho) < 1e-5


def test_subtraction_rejects_truncated_inputs():
    with pytest.raises(TruncationError) as e:
        asymptotic_subtract(FockField.fock(3, 3))
    assert e.value.n_max == 3


def test_fock_states_fire_min_n_k_cells():
    for n in range(11):
        for k in range(1, 7):
            result = cascade(FockField.fock(n, 12), k)
            fired = min(n, k)
            assert result.fired_distribution[fired] == pytest.approx(1.0, abs=1e-10)
            assert result.most_likely == fired
            assert result.conditional_outputs[fired].populations[n - fired] == pytest.approx(1.0)


def test_cascade_of_a_mixture():
    result = cascade(FockField.diagonal([0, 0.5, 0.5], n_max=6), 3)
    assert np.allclose(result.fired_distribution, [0, 0.5, 0.5, 0], atol=1e-12)


def test_cascade_counts_coherent_photons():
    k = 4
    result = cascade(prepare(StatePrepSpec.coherent(1.0)), k)
    expected = [poisson(1.0, n) for n in range(k)]
    expected.append(1 - sum(expected))
    assert np.allclose(result.fired_distribution, expected, atol=1e-10)
    assert result.fired_distribution.sum() == pytest.approx(1.0, abs=1e-10)


def test_finite_time_cascade_approaches_the_asymptotic_one():
    field = prepare(StatePrepSpec.coherent(0.7, n_max=12))
    finite = cascade(field, 3, gamma_eff=1.0, t_cell=12.0)
    asymptotic = cascade(field, 3)
    assert np.allclose(finite.fired_distribution, asymptotic.fired_distribution, atol=1e-6)


@pytest.mark.parametrize(
    'kwargs',
    [
        dict(k=0),
        dict(k=2, gamma_eff=1.0),
        dict(k=2, t_cell=1.0),
        dict(k=2, gamma_eff=1.0, t_cell=0.0),
    ],
)
def test_cascade_validation(kwargs):
    with pytest.raises(ValidationError):
        cascade(FockField.fock(1, 4), **kwargs)


def test_every_cell_firing_empties_a_fock_state():
    result = multi_subtract(FockField.fock(5, 8), 5)
    assert result.probability == pytest.approx(1.0)
    assert result.field.populations[0] == pytest.approx(1.0)
    assert result.p_vac_trace == pytest.approx((0, 0, 0, 0, 0))


def test_more_cells_than_photons_is_an_empty_branch():
    with pytest.raises(EmptyBranchError):
        multi_subtract(FockField.fock(2, 6), 3)


def test_multi_subtraction_agrees_with_the_cascade():
    field = prepare(StatePrepSpec.coherent(1.0))
    k = 3
    multi = multi_subtract(field, k)
    result = cascade(field, k)
    assert multi.probability == pytest.approx(result.fired_distribution[k], abs=1e-12)
    assert multi.probability == pytest.approx(1 - sum(poisson(1.0, n) for n in range(k)), abs=1e-10)
    assert trace_distance(multi.field.rho, result.conditional_outputs[k].rho) < 1e-10
