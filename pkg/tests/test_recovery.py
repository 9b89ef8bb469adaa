import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from complobs.measurements import Povm, optimize_min_error, projective_povm
from complobs.numerics import ShapeError
from complobs.recovery import (
    BasisError,
    Isometry,
    apply_isometry,
    apply_recovery,
    build_u1,
    build_u2,
    build_u3,
    coherent_measurement,
    compose_recovery,
    ideal_xi,
    overlap,
    recovery_error,
    recovery_target,
)
from complobs.states import (
    basis_state,
    ensemble_for_observable,
    fourier_matrix,
    haar_random_state,
    phi_d,
    product,
    z_extension,
)


def z_povm(d):
    return projective_povm(np.eye(d), (("B", d),))


def x_povm(d):
    """Perfect X-guessing on CB for a maximally entangled input: measure the
    Fourier basis on C and B jointly via the Bell-type basis."""
    f = fourier_matrix(d)
    elements = []
    for x in range(d):
        # Z^{-x} Phi relabeled: outcome x <-> C, B in state sum_z w^{-xz}|zz>/sqrt d
        v = sum(f[z, x].conj() * np.kron(np.eye(d)[z], np.eye(d)[z]) for z in range(d))
        elements.append(np.outer(v, v.conj()))
    rest = np.eye(d * d) - sum(elements)
    elements[0] = elements[0] + rest
    return Povm.from_arrays(elements, (("C", d), ("B", d)))


def test_coherent_measurement_examples():
    povm = z_povm(2)
    iso = coherent_measurement(povm, "C", list(np.eye(2)))
    out = apply_isometry(basis_state("B", 2, 0), iso)
    assert np.allclose(out.amplitudes, np.kron([1, 0], [1, 0]))
    trivial = Povm.from_arrays([np.eye(2)], (("B", 2),))
    iso = coherent_measurement(trivial, "C", [np.array([1.0])])
    assert np.allclose(iso.matrix, np.eye(2))


def test_coherent_measurement_rejects_bad_storage():
    with pytest.raises(BasisError):
        coherent_measurement(z_povm(2), "C", [np.array([1.0, 0.0]), np.array([1.0, 0.0])])
    with pytest.raises(BasisError):
        coherent_measurement(z_povm(2), "C", [np.array([1.0, 0.0])])


@pytest.mark.parametrize("d", [2, 3, 4])
def test_u3_is_unitary(d):
    assert build_u3(d).is_isometry(1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([(2, 2, 2), (2, 4, 2), (3, 3, 3)]))
def test_optimized_maps_are_isometries(seed, dims):
    psi = haar_random_state(dims, seed)
    zr = optimize_min_error(ensemble_for_observable(psi, "Z", ["B"]))
    xr = optimize_min_error(ensemble_for_observable(z_extension(psi), "X", ["C", "B"]))
    for iso in (build_u1(zr.measurement), build_u2(xr.measurement), compose_recovery(zr.measurement, xr.measurement)):
        assert iso.isometry_error() < 1e-10


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_exact_recovery(d):
    psi = product(phi_d(d), basis_state("R", 2, 0))
    u = compose_recovery(z_povm(d), x_povm(d))
    assert recovery_error(psi, u) < 1e-10


@pytest.mark.parametrize("d", [2, 3])
def test_u2_on_extension_matches_ideal_xi(d):
    psi = product(phi_d(d), basis_state("R", 2, 0))
    out = apply_isometry(z_extension(psi), build_u2(x_povm(d)))
    assert abs(abs(overlap(ideal_xi(psi), out)) - 1) < 1e-12


@pytest.mark.parametrize("d", [2, 3])
def test_u3_maps_ideal_xi_to_target(d):
    psi = haar_random_state((d, 2, 2), seed=d)
    xi = ideal_xi(psi)
    out = apply_isometry(xi, build_u3(d))
    target = recovery_target(psi)
    assert abs(abs(overlap(target, out)) - 1) < 1e-12


def test_opposite_phase_sign_fails_for_qutrits():
    # controlled Z^{+x} instead of Z^{-x} does not restore the input when d > 2
    d = 3
    psi = haar_random_state((d, 2, 2), seed=3)
    xi = ideal_xi(psi)
    f = fourier_matrix(d)
    z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    m = sum(np.kron(np.outer(f[:, x], f[:, x].conj()), np.linalg.matrix_power(z, x)) for x in range(d))
    wrong = Isometry(m, (("D", d), ("C", d)), (("D", d), ("C", d)))
    out = apply_isometry(xi, wrong)
    assert abs(overlap(recovery_target(psi), out)) < 0.99


def test_recovery_output_order():
    psi = product(phi_d(2), basis_state("R", 2, 0))
    out = apply_recovery(compose_recovery(z_povm(2), x_povm(2)), psi)
    assert out.labels == ("A", "D", "C", "B", "R")


def test_compose_rejects_mismatched_measurements():
    with pytest.raises(ShapeError):
        compose_recovery(z_povm(2), x_povm(3))
    with pytest.raises(ShapeError):
        compose_recovery(z_povm(2), projective_povm(np.eye(4), (("B", 2), ("C", 2))))


def test_isometry_json_round_trip():
    u = build_u3(3)
    back = Isometry.from_dict(json.loads(u.to_json()))
    assert back.in_dims == u.in_dims and back.out_dims == u.out_dims
    assert np.allclose(back.matrix, u.matrix)
    assert "dims" in u.to_dict() and "re" in u.to_dict() and "im" in u.to_dict()


def test_isometry_shape_checks():
    with pytest.raises(ShapeError):
        Isometry(np.eye(2)[:, :1].T, (("B", 2),), (("B", 1),))
