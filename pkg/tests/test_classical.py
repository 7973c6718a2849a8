import itertools
import math

import numpy as np
import pytest

from daviesgap.classical import (
    ClassicalChain,
    bottleneck,
    cheeger_witness,
    chain_rate_oracle,
    classical_dirichlet,
    classical_gap,
    extract_chain,
    rotated_eigenbasis,
    variance_pi,
)
from daviesgap.davies import build_generator, dirichlet_form, transition_rate, variance
from daviesgap.errors import SizeError
from daviesgap.gaps import spectral_gap_full, spectral_gap_omega
from daviesgap.operators import PAULI, build_pauli_hamiltonian, site_operator

from util import random_hermitian


def make_gen(H, beta, jumps=None, **kw):
    return build_generator(np.asarray(H, dtype=complex), beta=beta, jumps=jumps, **kw)


def two_state_chain(p, pi0):
    # reversibility fixes the reverse rate given (p, pi)
    pi = np.array([pi0, 1 - pi0])
    q = pi[0] * p / pi[1]
    rates = np.array([[-p, p], [q, -q]])
    basis = np.eye(2, dtype=complex)
    return ClassicalChain(energies=np.array([0.0, 1.0]), pi=pi, rates=rates, basis=basis)


def test_extract_uniform_at_infinite_temperature():
    rng = np.random.default_rng(0)
    gen = make_gen(random_hermitian(rng, 8), 0.0)
    chain = extract_chain(gen)
    assert np.allclose(chain.pi, 1 / 8)
    assert abs(chain.pi.sum() - 1) < 1e-12


def test_extract_two_level_rates():
    beta = 0.9
    gen = make_gen(PAULI["Z"], beta, [PAULI["X"]])
    chain = extract_chain(gen)
    # states ordered by ascending energy: state 0 is |1> (E=-1), state 1 is |0> (E=+1)
    assert np.allclose(chain.energies, [-1, 1])
    g_up = transition_rate(gen.rate, 2.0)     # toward higher energy... applied below
    g_down = transition_rate(gen.rate, -2.0)
    # rate from low state to high state carries G(E_high - E_low) = G(2)? no:
    # P[i -> j] = G(E_j - E_i) |<u_i|X|u_j>|^2
    assert chain.rates[0, 1] == pytest.approx(transition_rate(gen.rate, 2.0))
    assert chain.rates[1, 0] == pytest.approx(transition_rate(gen.rate, -2.0))
    assert g_up < g_down
    assert chain.reversibility_residual() < 1e-12


def test_extract_diagonal_jumps_give_no_transitions():
    gen = make_gen(PAULI["Z"], 1.0, [PAULI["Z"]])
    chain = extract_chain(gen)
    off = chain.rates - np.diag(np.diag(chain.rates))
    assert np.abs(off).max() < 1e-14


def test_extract_matches_defining_inner_product():
    rng = np.random.default_rng(1)
    gen = make_gen(random_hermitian(rng, 8), 0.7)
    chain = extract_chain(gen)
    for i in range(8):
        for j in range(8):
            if i == j:
                continue
            assert chain.rates[i, j] == pytest.approx(
                chain_rate_oracle(gen, i, j), rel=1e-9, abs=1e-12)


def test_extract_rejects_bad_basis():
    rng = np.random.default_rng(2)
    gen = make_gen(random_hermitian(rng, 4), 0.5)
    from daviesgap.errors import SubspacePreconditionError
    with pytest.raises(SubspacePreconditionError):
        extract_chain(gen, basis=np.eye(4, dtype=complex))


def test_classical_gap_two_state():
    chain = two_state_chain(0.3, 0.4)
    p, q = chain.rates[0, 1], chain.rates[1, 0]
    assert classical_gap(chain) == pytest.approx(p + q, rel=1e-12)


def test_classical_gap_disconnected():
    pi = np.full(4, 0.25)
    rates = np.zeros((4, 4))
    rates[0, 1] = rates[1, 0] = 1.0
    rates[2, 3] = rates[3, 2] = 1.0
    np.fill_diagonal(rates, 0.0)
    np.fill_diagonal(rates, -rates.sum(axis=1))
    chain = ClassicalChain(energies=np.zeros(4), pi=pi, rates=rates,
                           basis=np.eye(4, dtype=complex))
    assert classical_gap(chain) == pytest.approx(0.0, abs=1e-12)


def test_simple_spectrum_gap_equality():
    rng = np.random.default_rng(3)
    for _ in range(5):
        gen = make_gen(random_hermitian(rng, 8), rng.uniform(0, 2))
        lam0 = spectral_gap_omega(gen, 0.0)
        lam_cl = classical_gap(extract_chain(gen))
        assert abs(lam0 - lam_cl) <= 1e-9 * max(1.0, lam_cl)


def test_classical_dirichlet_basics():
    chain = two_state_chain(0.3, 0.4)
    assert classical_dirichlet(chain, [5.0, 5.0]) == 0.0
    F = np.array([1.0, 0.0])
    expect = chain.pi[0] * chain.rates[0, 1]  # indicator of state 0
    assert classical_dirichlet(chain, F) == pytest.approx(expect, rel=1e-12)


def test_quantum_classical_correspondence():
    rng = np.random.default_rng(4)
    gen = make_gen(random_hermitian(rng, 8), 1.1)
    chain = extract_chain(gen)
    for _ in range(10):
        F = rng.normal(size=8)
        f = chain.basis @ np.diag(F).astype(complex) @ chain.basis.conj().T
        assert dirichlet_form(gen, f) == pytest.approx(
            classical_dirichlet(chain, F), rel=1e-9, abs=1e-12)
        assert variance(gen.gibbs, f) == pytest.approx(
            variance_pi(chain, F), rel=1e-9, abs=1e-12)


def test_degenerate_rotations_never_beat_diagonal_gap():
    rng = np.random.default_rng(5)
    H = build_pauli_hamiltonian([(1.0, "ZZ")])  # two doubly degenerate levels
    gen = make_gen(H, 0.8)
    lam0 = spectral_gap_omega(gen, 0.0)
    for _ in range(8):
        chain = extract_chain(gen, basis=rotated_eigenbasis(gen, rng))
        assert chain.reversibility_residual() < 1e-10
        assert classical_gap(chain) >= lam0 - 1e-9


def test_bottleneck_two_state():
    chain = two_state_chain(0.3, 0.35)
    w = bottleneck(chain, mode="exhaustive")
    assert w.subset == (0,)  # the lighter state
    assert w.phi == pytest.approx(chain.rates[0, 1], rel=1e-12)
    assert w.pi_mass <= 0.5 + 1e-12


def test_bottleneck_cycle_enumeration():
    # uniform 4-cycle with unit rates: check against explicit enumeration
    N = 4
    rates = np.zeros((N, N))
    for i in range(N):
        rates[i, (i + 1) % N] = 1.0
        rates[i, (i - 1) % N] = 1.0
    np.fill_diagonal(rates, -rates.sum(axis=1))
    chain = ClassicalChain(energies=np.zeros(N), pi=np.full(N, 0.25), rates=rates,
                           basis=np.eye(N, dtype=complex))
    w = bottleneck(chain, mode="exhaustive")
    best = math.inf
    for r in range(1, N):
        for subset in itertools.combinations(range(N), r):
            mass = 0.25 * len(subset)
            if mass > 0.5 + 1e-12:
                continue
            flow = sum(0.25 * rates[i, j] for i in subset for j in range(N)
                       if j not in subset)
            best = min(best, flow / mass)
    assert w.phi == pytest.approx(best, rel=1e-12)
    # adjacent pair cut: flow 2 * 0.25, mass 0.5
    assert w.phi == pytest.approx(1.0, rel=1e-12)
    sweep = bottleneck(chain, mode="sweep")
    assert sweep.phi >= w.phi - 1e-12


def test_bottleneck_sweep_is_upper_bound():
    rng = np.random.default_rng(6)
    for _ in range(5):
        gen = make_gen(random_hermitian(rng, 8), rng.uniform(0, 1.5))
        chain = extract_chain(gen)
        exact = bottleneck(chain, mode="exhaustive")
        sweep = bottleneck(chain, mode="sweep")
        assert sweep.phi >= exact.phi - 1e-12
        lam_cl = classical_gap(chain)
        for w in (exact, sweep):
            assert w.phi**2 <= 2 * w.big_lambda * lam_cl + 1e-9
            assert w.pi_mass <= 0.5 + 1e-12


def test_bottleneck_size_guard():
    rng = np.random.default_rng(7)
    N = 21
    pi = np.full(N, 1 / N)
    rates = np.ones((N, N)) - np.eye(N)
    np.fill_diagonal(rates, -(N - 1))
    chain = ClassicalChain(energies=np.zeros(N), pi=pi, rates=rates,
                           basis=np.eye(N, dtype=complex))
    with pytest.raises(SizeError):
        bottleneck(chain, mode="exhaustive")
    bottleneck(chain, mode="sweep")  # sweep still works


def test_cheeger_witness_two_level():
    gen = make_gen(PAULI["Z"], 1.0, [PAULI["X"]])
    result = cheeger_witness(gen, D=2)
    w = result["witness"]
    # the only admissible cut is the lighter state, which is |0> (energy +1)
    assert w.subset == (0,) if gen.weight_per_index[0] <= 0.5 else (1,)
    P = w.projection
    assert np.abs(P @ P - P).max() < 1e-10
    H = PAULI["Z"].astype(complex)
    assert np.abs(P @ H - H @ P).max() < 1e-10
    assert result["margin"] >= -1e-9 * result["scale"]
    assert result["M"] == pytest.approx(1.0 * 3.0, abs=1e-12) or result["M"] > 0


def test_cheeger_witness_uniform():
    gen = make_gen(np.zeros((4, 4)), 0.0, [site_operator("X", 1, 2),
                                           site_operator("X", 2, 2),
                                           site_operator("Z", 1, 2)])
    result = cheeger_witness(gen, D=1)
    assert result["margin"] >= -1e-9 * result["scale"]


def test_cheeger_witness_nonergodic_zero_mode():
    # single jump X on H = 0: gap 0; the witness must achieve E(P) ~ 0
    gen = make_gen(np.zeros((2, 2)), 0.9, [PAULI["X"]])
    result = cheeger_witness(gen, D=1)
    assert result["quantum_gap"] == 0.0
    assert result["dirichlet"] <= 1e-10
    assert result["margin"] >= -1e-9 * result["scale"]
    P = result["witness"].projection
    assert np.abs(P @ P - P).max() < 1e-10


def test_cheeger_witness_random_instances():
    rng = np.random.default_rng(8)
    for _ in range(5):
        gen = make_gen(random_hermitian(rng, 8), rng.uniform(0, 2))
        ap_d = 2
        result = cheeger_witness(gen, D=ap_d, rotation_samples=0)
        assert result["margin"] >= -1e-9 * result["scale"]
        assert result["witness"].big_lambda <= result["M"] + 1e-9
        assert result["classical_gap"] <= 2 * ap_d * max(result["quantum_gap"], 0) + 1e-6 \
            or not np.all(gen.levels.multiplicities == 1)


def test_exit_rates_bounded_by_m():
    rng = np.random.default_rng(9)
    gen = make_gen(random_hermitian(rng, 8), 0.6)
    chain = extract_chain(gen)
    g_inf = float(np.abs(gen.g_values).max())
    M = g_inf * np.linalg.norm(sum(S @ S.conj().T for S in gen.jumps), 2)
    assert chain.max_exit_rate() <= M + 1e-9
    assert g_inf <= 1.0 + 1e-12  # closed-form bound for glauber


def test_dimension_one_orbit_bound():
    # dense Hermitian matrices generically have all-distinct level differences,
    # so every nonzero-frequency block is one-dimensional
    rng = np.random.default_rng(10)
    for _ in range(5):
        gen = make_gen(random_hermitian(rng, 4), rng.uniform(0, 2))
        dims_one = all(
            gen.pair_rows[k].size == 1
            for k, om in enumerate(gen.bohr.omegas) if abs(om) > gen.bohr.tol
        )
        assert dims_one
        lam = spectral_gap_full(gen).lambda_full
        lam_cl = classical_gap(extract_chain(gen))
        assert lam >= 0.5 * lam_cl - 1e-9


def test_chain_json_shape():
    gen = make_gen(PAULI["Z"], 1.0, [PAULI["X"]])
    doc = extract_chain(gen).to_json()
    assert set(doc) == {"pi", "rates", "energies"}
    w = bottleneck(extract_chain(gen), "exhaustive")
    wd = w.to_json()
    assert "subset_bitmask" in wd and "phi" in wd and "lambda_max_exit" in wd
