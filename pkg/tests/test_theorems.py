import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from complobs.measurements import projective_povm
from complobs.numerics import LabeledOperator
from complobs.scenarios import bell_diagonal_state, counterexample_state, phase_damping_state
from complobs.states import basis_state, haar_random_state, phi_d, product
from complobs.theorems import (
    analyze,
    decoupling_distance,
    duality_check,
    hashing_rate,
    hybrid_certificate,
    max_entangled_overlap,
    theorem1_certificate,
    theorem2_certificate,
)

dims_choice = st.sampled_from([(2, 2, 2), (2, 4, 2), (3, 3, 3), (2, 2, 1)])


def test_bounds_are_zero_on_perfect_premises():
    psi = product(phi_d(3), basis_state("R", 2, 0))
    for cert in (theorem1_certificate(psi), theorem2_certificate(psi)):
        assert cert.bound < 1e-3
        assert cert.achieved_distance < 1e-10
        assert cert.holds


def test_bounds_capped_at_one():
    cert = theorem2_certificate(counterexample_state())
    assert cert.bound_uncapped > 1
    assert cert.bound == 1
    assert cert.holds


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), dims_choice)
def test_certificates_hold_on_random_states(seed, dims):
    a = analyze(haar_random_state(dims, seed))
    assert a.thm1.holds and a.thm2.holds
    assert a.duality.passes
    assert a.thm1.achieved_distance <= a.thm1.bound + 1e-6


def test_theorem1_with_supplied_measurements():
    psi = product(phi_d(2), basis_state("R", 2, 0))
    z = projective_povm(np.eye(2), (("B", 2),))
    # a poor X measurement: computational basis of C B, grouped by parity
    e = np.eye(4)
    x = projective_povm(e, (("C", 2), ("B", 2)))
    x = type(x).from_arrays([x.elements[0].matrix + x.elements[3].matrix, x.elements[1].matrix + x.elements[2].matrix], x.dims)
    cert = theorem1_certificate(psi, z, x)
    assert np.isclose(cert.eps_x, 0.5)
    assert cert.holds


def test_hybrid_is_marked_experimental():
    cert = hybrid_certificate(phase_damping_state(0.5))
    assert cert.experimental and cert.theorem == 3
    assert cert.holds


def test_certificate_dict_is_json():
    cert = theorem2_certificate(phase_damping_state(0.3))
    doc = json.loads(json.dumps(cert.to_dict()))
    assert set(doc) >= {"theorem", "eps_z", "eps_x", "bound", "distance", "holds", "solver"}
    json.dumps(duality_check(phase_damping_state(0.3)).to_dict())


@pytest.mark.parametrize("lam", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_phase_damping_closed_forms(lam):
    psi = phase_damping_state(lam)
    a = analyze(psi)
    assert abs(a.duality.p_guess_x_bc - (1 + lam) / 2) < 1e-6
    assert abs(a.p_secure_z - np.sqrt((1 + lam**2) / 2)) < 1e-6
    assert a.thm1.achieved_distance <= np.sqrt(1 - lam) + 1e-6


def test_counterexample_diagnostics():
    psi = counterexample_state()
    a = analyze(psi)
    assert abs(a.p_secure_z - 1) < 1e-10 and abs(a.p_secure_x - 1) < 1e-10
    assert a.duality.p_secure_x_cr < 0.99
    assert a.duality.passes
    assert abs(a.decoupling - 0.5) < 1e-10
    assert abs(a.hashing) < 1e-10
    assert max_entangled_overlap(psi.marginal(["A", "B"])) <= 0.5 + 1e-8


def test_max_entangled_overlap_of_bell_state():
    rho = phi_d(2).density()
    assert abs(max_entangled_overlap(rho) - 1) < 1e-10


def test_decoupling_examples():
    assert decoupling_distance(product(phi_d(2), basis_state("R", 2, 0))) < 1e-12
    psi = product(phi_d(2, ("A", "R")), basis_state("B", 2, 0)).reorder(("A", "B", "R"))
    assert abs(decoupling_distance(psi) - 0.75) < 1e-12


def test_hashing_rate_examples():
    assert abs(hashing_rate(phi_d(2).density()) - 1) < 1e-12
    product_state = LabeledOperator(np.kron(np.diag([1.0, 0.0]), np.diag([1.0, 0.0])), (("A", 2), ("B", 2)))
    assert abs(hashing_rate(product_state)) < 1e-12
    rho, _ = bell_diagonal_state([0.7, 0.1, 0.1, 0.1])
    assert abs(hashing_rate(rho) - (-0.3567796494470396)) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), dims_choice)
def test_step_overlaps_bounded_by_guessing(seed, dims):
    a = analyze(haar_random_state(dims, seed))
    assert a.overlap_z >= a.thm1.detail["p_guess_z"] - 1e-12
    assert a.overlap_x >= a.thm1.detail["p_guess_x"] - 1e-12
