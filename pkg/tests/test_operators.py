import numpy as np
import pytest

from daviesgap.errors import DimensionError, IdentityFieldWarning
from daviesgap.operators import (
    PAULI,
    ModelSpec,
    build_field_perturbation,
    build_model,
    build_pauli_hamiltonian,
    build_xyz_ring,
    complex_matrix_from_json,
    complex_matrix_to_json,
    parse_model,
    pauli_string_matrix,
    site_operator,
    xyz_ring_spectrum,
)

from util import random_hermitian


def test_single_z():
    H = build_pauli_hamiltonian([(1.0, "Z")])
    assert np.allclose(H, np.diag([1, -1]))


def test_zz_diagonal():
    J = 0.7
    H = build_pauli_hamiltonian([(J, "ZZ")])
    assert np.allclose(H, np.diag([J, -J, -J, J]))


def test_empty_sum_needs_n():
    H = build_pauli_hamiltonian([], n=2)
    assert H.shape == (4, 4)
    assert np.allclose(H, 0)
    with pytest.raises(ValueError):
        build_pauli_hamiltonian([])


def test_mixed_lengths_rejected():
    with pytest.raises(DimensionError):
        build_pauli_hamiltonian([(1.0, "Z"), (1.0, "ZZ")])


def test_nonfinite_coefficient_rejected():
    with pytest.raises(ValueError):
        build_pauli_hamiltonian([(float("nan"), "Z")])


@pytest.mark.parametrize("s", ["X", "Y", "Z", "XY", "ZIX", "YYZX"])
def test_pauli_strings_hermitian_unitary(s):
    M = pauli_string_matrix(s)
    assert np.allclose(M, M.conj().T)
    assert np.allclose(M @ M.conj().T, np.eye(2 ** len(s)))


def test_single_site_multiplicativity():
    assert np.allclose(
        pauli_string_matrix("XY"),
        pauli_string_matrix("XI") @ pauli_string_matrix("IY"),
    )


def test_site_operator_ordering():
    # site 1 is the most significant qubit
    assert np.allclose(site_operator("Z", 1, 2), np.kron(PAULI["Z"], np.eye(2)))
    assert np.allclose(site_operator("Z", 2, 2), np.kron(np.eye(2), PAULI["Z"]))


def test_field_diagonal_spectrum():
    a, b = 0.9, -0.4
    H = build_field_perturbation(np.zeros((4, 4)), PAULI["Z"], [a, b])
    expect = sorted([a + b, a - b, -a + b, -a - b])
    assert np.allclose(np.linalg.eigvalsh(H), expect)


def test_zero_field_is_identity_case():
    rng = np.random.default_rng(3)
    H0 = random_hermitian(rng, 4)
    H = build_field_perturbation(H0, PAULI["Z"], [0.0, 0.0])
    assert np.allclose(H, H0)


def test_field_matches_entrywise_assembly():
    # oracle: assemble the 4x4 matrix by explicit Kronecker products
    rng = np.random.default_rng(11)
    H0 = random_hermitian(rng, 4)
    h = (0.7, -0.3)
    H = build_field_perturbation(H0, PAULI["Z"], h)
    Z = PAULI["Z"]
    oracle = H0 + h[0] * np.kron(Z, np.eye(2)) + h[1] * np.kron(np.eye(2), Z)
    assert np.abs(H - oracle).max() < 1e-13
    assert np.allclose(np.linalg.eigvalsh(H), np.linalg.eigvalsh(oracle))


def test_field_difference_is_pure_field():
    rng = np.random.default_rng(5)
    H0 = random_hermitian(rng, 8)
    h = rng.uniform(-1, 1, size=3)
    diff = build_field_perturbation(H0, PAULI["X"], h) - build_field_perturbation(
        H0, PAULI["X"], np.zeros(3))
    pure = sum(h[i - 1] * site_operator("X", i, 3) for i in range(1, 4))
    assert np.abs(diff - pure).max() < 1e-13


def test_identity_field_warns_but_builds():
    with pytest.warns(IdentityFieldWarning):
        H = build_field_perturbation(np.zeros((2, 2)), np.eye(2), [1.0])
    assert np.allclose(H, np.eye(2))


def test_field_dimension_mismatch():
    with pytest.raises(DimensionError):
        build_field_perturbation(np.zeros((4, 4)), PAULI["Z"], [1.0])


def test_xyz_ring_field_only():
    H = build_xyz_ring(0.0, 1.0, 3)
    assert np.allclose(np.sort(np.linalg.eigvalsh(H)),
                       [-3, -1, -1, -1, 1, 1, 1, 3])


def test_xyz_ring_traceless():
    for J, h in [(0.3, 1.0), (1.5, -0.2)]:
        assert abs(np.trace(build_xyz_ring(J, h, 3))) < 1e-12


def test_xyz_ring_needs_two_sites():
    with pytest.raises(ValueError):
        build_xyz_ring(1.0, 1.0, 1)


def test_xyz_spectrum_at_j_zero():
    assert np.allclose(xyz_ring_spectrum(0.0, 1.0, 3),
                       [-3, -1, -1, -1, 1, 1, 1, 3])


@pytest.mark.parametrize("n", [3, 5, 7])
def test_xyz_closed_form_vs_dense(n):
    rng = np.random.default_rng(n)
    for _ in range(3):
        J = rng.uniform(-2, 2)
        h = rng.uniform(0.2, 2) * rng.choice([-1, 1])
        dense = np.sort(np.linalg.eigvalsh(build_xyz_ring(J, h, n)))
        assert np.abs(dense - xyz_ring_spectrum(J, h, n)).max() < 1e-9


def test_xyz_last_mode_shift():
    # mu_n = sin(2 pi) = 0 exactly, so flipping the last sign moves every
    # eigenvalue by exactly 2h
    spec = xyz_ring_spectrum(1.3, 1.0, 3)
    shifted = np.sort(np.concatenate([spec + 2.0, spec - 2.0]))
    inter = sum(1 for v in spec if np.any(np.abs(shifted - v) < 1e-12))
    assert inter == spec.size


def test_xyz_spectrum_rejects_even_n_and_zero_field():
    with pytest.raises(ValueError):
        xyz_ring_spectrum(1.0, 1.0, 4)
    with pytest.raises(ValueError):
        xyz_ring_spectrum(1.0, 0.0, 3)


def test_parse_model_pauli_sum():
    spec = parse_model({"kind": "pauli-sum", "n": 2, "terms": [[0.5, "ZZ"], [1.0, "XI"]]})
    H = build_model(spec)
    oracle = 0.5 * pauli_string_matrix("ZZ") + pauli_string_matrix("XI")
    assert np.abs(H - oracle).max() < 1e-14


def test_parse_model_rejects_unknown_fields():
    with pytest.raises(ValueError):
        parse_model({"kind": "pauli-sum", "n": 1, "terms": [], "extra": 1})
    with pytest.raises(ValueError):
        parse_model({"kind": "nonsense", "n": 1})


def test_parse_model_field_perturbed():
    spec = parse_model({
        "kind": "field-perturbed", "n": 2,
        "terms": [[1.0, "ZZ"]],
        "field": {"P": "X", "h": [0.3, -0.2]},
    })
    H = build_model(spec)
    oracle = pauli_string_matrix("ZZ") + 0.3 * site_operator("X", 1, 2) \
        - 0.2 * site_operator("X", 2, 2)
    assert np.abs(H - oracle).max() < 1e-14
    with pytest.raises(DimensionError):
        parse_model({"kind": "field-perturbed", "n": 2, "terms": [],
                     "field": {"P": "X", "h": [0.3]}})


def test_parse_model_xyz_and_dense():
    spec = parse_model({"kind": "xyz-ring", "n": 3, "xyz": {"J": 0.4, "h": 1.0}})
    assert np.abs(build_model(spec) - build_xyz_ring(0.4, 1.0, 3)).max() < 1e-14
    rng = np.random.default_rng(0)
    M = random_hermitian(rng, 2)
    doc = {"kind": "dense", "n": 1, "matrix": complex_matrix_to_json(M)}
    assert np.abs(build_model(parse_model(doc)) - M).max() < 1e-14


def test_complex_matrix_json_roundtrip():
    rng = np.random.default_rng(1)
    M = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.abs(complex_matrix_from_json(complex_matrix_to_json(M)) - M).max() < 1e-15


def test_model_spec_is_dataclass():
    spec = ModelSpec(kind="pauli-sum", n=1, terms=((1.0, "Z"),))
    assert build_model(spec).shape == (2, 2)
