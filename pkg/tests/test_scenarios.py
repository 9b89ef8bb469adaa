import numpy as np
import pytest

from complobs.measurements import optimize_min_error
from complobs.scenarios import (
    SCENARIOS,
    ValidityError,
    amplitude_damping_kraus,
    apply_channel,
    bell_diagonal_state,
    channel_to_state,
    counterexample_state,
    dephasing_kraus,
    depolarizing_kraus,
    get_scenario,
    phase_damping_state,
)
from complobs.states import ensemble_for_observable, phi_d


def test_counterexample_is_normalized_and_ab_separable():
    psi = counterexample_state()
    assert np.isclose(np.linalg.norm(psi.amplitudes), 1)
    rho = psi.marginal(["A", "B"]).matrix
    # partial transpose stays positive for a separable two-qubit state
    pt = rho.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)
    assert np.linalg.eigvalsh(pt)[0] >= -1e-12


def test_phase_damping_limits():
    assert phase_damping_state(1.0).marginal(["A", "B"]).matrix[0, 3] == pytest.approx(0.5)
    assert abs(phase_damping_state(0.0).marginal(["A", "B"]).matrix[0, 3]) < 1e-15
    with pytest.raises(ValueError):
        phase_damping_state(1.5)


def test_bell_diagonal_purification():
    q = [0.4, 0.3, 0.2, 0.1]
    rho, psi = bell_diagonal_state(q)
    assert np.allclose(psi.marginal(["A", "B"]).matrix, rho.matrix, atol=1e-12)
    assert np.allclose(np.sort(np.linalg.eigvalsh(rho.matrix)), sorted(q))
    with pytest.raises(ValueError):
        bell_diagonal_state([0.5, 0.5, 0.5, -0.5])


@pytest.mark.parametrize(
    "kraus",
    [dephasing_kraus(0.3), amplitude_damping_kraus(0.2), depolarizing_kraus(0.1)],
)
def test_channel_state_consistency(kraus):
    psi = channel_to_state(kraus, 2)
    phi = phi_d(2).density()
    out = sum(np.kron(np.eye(2), k) @ phi.matrix @ np.kron(np.eye(2), k).conj().T for k in kraus)
    assert np.allclose(psi.marginal(["A", "B"]).matrix, out, atol=1e-12)
    assert np.allclose(psi.marginal(["B"]).matrix, apply_channel(kraus, np.eye(2) / 2), atol=1e-12)


def test_channel_rejects_non_trace_preserving():
    with pytest.raises(ValidityError):
        channel_to_state([np.eye(2), np.eye(2)], 2)


def test_full_dephasing_guessing():
    psi = channel_to_state(dephasing_kraus(1.0), 2)
    assert abs(optimize_min_error(ensemble_for_observable(psi, "Z", ["B"])).achieved - 1) < 1e-10
    assert abs(optimize_min_error(ensemble_for_observable(psi, "X", ["B"])).achieved - 0.5) < 1e-10


def test_registry():
    assert set(SCENARIOS) >= {"counterexample", "phase_damping", "bell_diagonal", "dephasing"}
    s = get_scenario("phase_damping")
    assert s.state(**{"lambda": 0.25}).labels == ("A", "B", "R")
    assert s.expectations(**{"lambda": 0.0})["p_guess_x_bc"] == 0.5
    with pytest.raises(KeyError):
        get_scenario("nope")
    with pytest.raises(KeyError):
        s.state(mu=1.0)


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_every_scenario_builds(name):
    psi = get_scenario(name).state()
    assert abs(np.linalg.norm(psi.amplitudes) - 1) < 1e-10
