import math

import numpy as np
import pytest
import scipy.optimize

from daviesgap.davies import (
    apply_davies,
    build_generator,
    dirichlet_form,
    kms_inner,
    variance,
)
from daviesgap.errors import ReversibilityError, UnknownFrequencyError
from daviesgap.gaps import (
    GapReport,
    generator_matrix,
    hermitian_gap,
    rayleigh_quotient,
    spectral_gap_full,
    spectral_gap_omega,
    subspace_basis,
)
from daviesgap.operators import PAULI
from daviesgap.spectral import project_component

from util import random_complex, random_hermitian


def make_gen(H, beta, jumps=None, **kw):
    return build_generator(np.asarray(H, dtype=complex), beta=beta, jumps=jumps, **kw)


def test_basis_is_kms_orthonormal():
    rng = np.random.default_rng(0)
    gen = make_gen(random_hermitian(rng, 8), 0.9)
    for om in gen.bohr.omegas[::5]:
        basis = subspace_basis(gen, om)
        ops = [basis.operator(gen, k) for k in range(basis.dim)]
        for i in range(basis.dim):
            for j in range(basis.dim):
                val = kms_inner(gen.gibbs, ops[i], ops[j])
                assert abs(val - (1.0 if i == j else 0.0)) < 1e-10
            back = project_component(ops[i], om, gen.levels, bohr=gen.bohr)
            assert np.abs(ops[i] - back).max() < 1e-10


def test_generator_matrix_matches_definition():
    rng = np.random.default_rng(1)
    gen = make_gen(random_hermitian(rng, 8), 1.2)
    for om in gen.bohr.omegas[::7]:
        basis = subspace_basis(gen, om)
        M = generator_matrix(gen, basis)
        ops = [basis.operator(gen, k) for k in range(basis.dim)]
        for j in range(basis.dim):
            Le = apply_davies(gen, ops[j])
            for i in range(basis.dim):
                ref = -kms_inner(gen.gibbs, Le, ops[i])
                assert abs(M[i, j] - ref) < 1e-10
        assert np.abs(M - M.conj().T).max() < 1e-9 * max(1.0, np.abs(M).max())
        assert np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0] > -1e-9


def test_identity_direction_is_null():
    rng = np.random.default_rng(2)
    gen = make_gen(random_hermitian(rng, 4), 0.7)
    basis = subspace_basis(gen, 0.0)
    M = generator_matrix(gen, basis)
    p = gen.weight_per_index
    c = np.where(basis.rows == basis.cols, np.sqrt(p[basis.rows]), 0.0)
    assert np.abs(M @ c).max() < 1e-10


def test_one_dimensional_block_equals_dirichlet():
    gen = make_gen(PAULI["Z"], 1.1, [PAULI["X"]])
    basis = subspace_basis(gen, 2.0)
    assert basis.dim == 1
    e = basis.operator(gen, 0)
    assert spectral_gap_omega(gen, 2.0) == pytest.approx(dirichlet_form(gen, e), rel=1e-10)


def test_unknown_frequency_rejected():
    gen = make_gen(PAULI["Z"], 1.0, [PAULI["X"]])
    with pytest.raises(UnknownFrequencyError):
        spectral_gap_omega(gen, 0.4321)


def test_nonergodic_single_jump():
    gen = make_gen(np.zeros((2, 2)), 0.8, [PAULI["X"]])
    assert spectral_gap_omega(gen, 0.0) == pytest.approx(0.0, abs=1e-12)
    report = spectral_gap_full(gen)
    assert report.lambda_full == 0.0
    assert "ergodicity-suspect" in report.flags


def test_ergodic_two_jumps_unit_gap():
    gen = make_gen(np.zeros((2, 2)), 0.0, [PAULI["X"], PAULI["Z"]])
    report = spectral_gap_full(gen)
    assert report.lambda_full == pytest.approx(1.0, abs=1e-10)
    assert report.lambda_diag == pytest.approx(1.0, abs=1e-10)
    assert report.ergodic


def test_full_report_consistency():
    rng = np.random.default_rng(3)
    gen = make_gen(random_hermitian(rng, 8), 0.9)
    report = spectral_gap_full(gen)
    gaps = dict(report.omega_gaps)
    assert report.lambda_diag == pytest.approx(gaps[0.0], abs=1e-12)
    finite = [g for g in gaps.values() if not math.isinf(g)]
    assert report.lambda_full == pytest.approx(min(finite), abs=1e-12)
    assert report.residuals["cross_check"] <= 1e-9
    assert report.lambda_diag >= report.lambda_full - 1e-9
    for om, g in report.omega_gaps:
        if not math.isinf(g):
            assert g >= report.lambda_full - 1e-12


def test_rayleigh_quotient_contract():
    rng = np.random.default_rng(4)
    gen = make_gen(random_hermitian(rng, 8), 1.0)
    assert rayleigh_quotient(gen, np.eye(8)) == math.inf
    report = spectral_gap_full(gen)
    for _ in range(25):
        f = random_complex(rng, 8)
        assert rayleigh_quotient(gen, f) >= report.lambda_full - 1e-9


def test_rayleigh_on_eigenoperator():
    gen = make_gen(PAULI["Z"], 1.3, [PAULI["X"]])
    basis = subspace_basis(gen, 2.0)
    e = basis.operator(gen, 0)
    mu = spectral_gap_omega(gen, 2.0)
    assert rayleigh_quotient(gen, e) == pytest.approx(mu, rel=1e-10)


def test_minimum_matches_direct_optimization():
    # oracle: minimize E(f)/Var(f) over the commutant by direct optimization
    # of the dense forms, no generator matrix involved
    rng = np.random.default_rng(5)
    gen = make_gen(random_hermitian(rng, 4), 0.8)
    target = spectral_gap_omega(gen, 0.0)
    basis = subspace_basis(gen, 0.0)
    ops = [basis.operator(gen, k) for k in range(basis.dim)]

    def rq(x):
        coeff = x[: basis.dim] + 1j * x[basis.dim:]
        f = sum(c * e for c, e in zip(coeff, ops))
        E = dirichlet_form(gen, f)
        V = variance(gen.gibbs, f)
        return E / V if V > 1e-14 else 1e6

    best = math.inf
    for _ in range(12):
        x0 = rng.normal(size=2 * basis.dim)
        res = scipy.optimize.minimize(rq, x0, method="Nelder-Mead",
                                      options={"xatol": 1e-10, "fatol": 1e-12,
                                               "maxiter": 4000})
        best = min(best, res.fun)
    assert best >= target - 1e-9
    assert best - target < 1e-6


def test_sampled_rayleigh_stays_above_block_minimum():
    rng = np.random.default_rng(6)
    gen = make_gen(random_hermitian(rng, 8), 1.1)
    basis = subspace_basis(gen, 0.0)
    ops = [basis.operator(gen, k) for k in range(basis.dim)]
    target = spectral_gap_omega(gen, 0.0)
    best = math.inf
    for _ in range(200):
        coeff = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        f = sum(c * e for c, e in zip(coeff, ops))
        V = variance(gen.gibbs, f)
        if V < 1e-12:
            continue
        best = min(best, dirichlet_form(gen, f) / V)
    assert best >= target - 1e-9


def test_hermitian_gap_equalities():
    rng = np.random.default_rng(7)
    count = 0
    for n in (1, 1, 2, 2, 3):
        gen = make_gen(random_hermitian(rng, 2**n), rng.uniform(0, 2))
        report = spectral_gap_full(gen)
        assert abs(hermitian_gap(gen, "all") - report.lambda_full) <= 1e-9
        assert abs(hermitian_gap(gen, "V0") - report.lambda_diag) <= 1e-9
        count += 1
    assert count == 5


def test_hermitian_gap_small_case():
    gen = make_gen(np.zeros((2, 2)), 0.0, [PAULI["X"], PAULI["Z"]])
    assert hermitian_gap(gen, "all") == pytest.approx(1.0, abs=1e-10)


def test_broken_rates_raise_reversibility_error():
    table = [[-2.0, 0.9], [0.0, 0.5], [2.0, 0.4]]
    with pytest.warns(UserWarning):
        gen = build_generator(PAULI["Z"].astype(complex), beta=1.0, rate="table",
                              rate_table=table, jumps=[PAULI["X"]])
    with pytest.raises(ReversibilityError):
        generator_matrix(gen, subspace_basis(gen, 0.0))


def test_infinite_gap_sentinel_and_encoding():
    # one-dimensional Hilbert space: the commutant is spanned by the identity
    gen = build_generator(np.zeros((1, 1), dtype=complex), beta=1.0,
                          jumps=[np.eye(1, dtype=complex)])
    assert spectral_gap_omega(gen, 0.0) == math.inf
    report = spectral_gap_full(gen)
    doc = report.to_json()
    assert doc["lambda_full"] == "+inf"
    assert doc["lambda_diag"] == "+inf"


def test_gap_report_csv_row():
    gen = make_gen(PAULI["Z"], 0.5, [PAULI["X"]])
    report = spectral_gap_full(gen)
    row = report.to_csv_row()
    assert len(row) == len(GapReport.CSV_FIELDS)
