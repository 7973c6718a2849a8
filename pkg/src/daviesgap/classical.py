"""The classical Markov chain embedded in a Davies generator.

Fixing an orthonormal eigenbasis {u_i} of the Hamiltonian, the generator
acts on populations diag(|u_i><u_i|) like a classical Markov generator with
rates

    P[u_i -> u_j] = G(E_j - E_i) * sum_S |<u_i| S |u_j>|^2     (i != j)

reversible for the stationary weights pi(u_i) = <u_i| rho |u_i>.  The gap
of this chain equals the generator's gap on observables commuting with the
Hamiltonian when the spectrum is simple; for degenerate spectra it depends
on the eigenbasis, and some eigenbasis attains the quantum value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .davies import DaviesGenerator, dirichlet_form, tolerance_scale, variance
from .errors import SizeError, SubspacePreconditionError, WitnessDegenerateError
from .gaps import spectral_gap_full

EXHAUSTIVE_STATE_CAP = 20
REVERSIBILITY_ATOL = 1e-10


@dataclass(frozen=True)
class ClassicalChain:
    """Reversible rate matrix on Hamiltonian eigenstates.

    ``rates[i, j] >= 0`` for i != j, rows sum to zero; ``pi`` is the
    stationary distribution; ``basis`` holds the eigenvector columns the
    chain was extracted in.
    """

    energies: np.ndarray
    pi: np.ndarray
    rates: np.ndarray
    basis: np.ndarray

    @property
    def size(self) -> int:
        return self.pi.size

    def reversibility_residual(self) -> float:
        Q = self.pi[:, None] * self.rates
        return float(np.abs(Q - Q.T).max())

    def max_exit_rate(self) -> float:
        off = self.rates - np.diag(np.diag(self.rates))
        return float(off.sum(axis=1).max())

    def to_json(self) -> dict:
        return {
            "pi": [float(x) for x in self.pi],
            "rates": [[float(x) for x in row] for row in self.rates],
            "energies": [float(x) for x in self.energies],
        }


def extract_chain(gen: DaviesGenerator, basis: np.ndarray | None = None) -> ClassicalChain:
    """Classical chain of the generator in a chosen orthonormal eigenbasis.

    ``basis`` columns must be eigenvectors of the Hamiltonian (the
    generator's own eigenbasis when omitted).  Off-diagonal rates follow the
    jump matrix elements; diagonals make rows sum to zero.
    """
    N = gen.dim
    if basis is None:
        U = gen.eigenvectors
        energies = gen.value_per_index.copy()
        jumps_u = gen.jumps_eig
        pi = gen.weight_per_index.copy()
    else:
        U = np.asarray(basis, dtype=complex)
        if U.shape != (N, N):
            raise SubspacePreconditionError("basis has wrong shape", float("nan"))
        ortho = float(np.abs(U.conj().T @ U - np.eye(N)).max())
        if ortho > 1e-9:
            raise SubspacePreconditionError("basis is not orthonormal", ortho)
        H = gen.levels.hamiltonian()
        HU = H @ U
        energies = np.real(np.sum(U.conj() * HU, axis=0))
        resid = float(np.abs(HU - U * energies).max())
        scale = max(1.0, float(np.abs(H).max()))
        if resid > 1e-9 * scale:
            raise SubspacePreconditionError("basis is not an eigenbasis of H", resid)
        V = gen.eigenvectors
        W = V.conj().T @ U  # rotation from the cached eigenbasis
        jumps_u = tuple(W.conj().T @ Sp @ W for Sp in gen.jumps_eig)
        pi = np.real(np.sum(np.abs(W) ** 2 * gen.weight_per_index[:, None], axis=0))

    diffs = energies[None, :] - energies[:, None]  # E_j - E_i at (i, j)
    G = gen.g_values[_bohr_indices(gen, diffs)]
    strength = np.zeros((N, N))
    for Su in jumps_u:
        strength += np.abs(Su) ** 2
    P = G * strength
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, -P.sum(axis=1))
    return ClassicalChain(energies=energies, pi=pi, rates=P, basis=U)


def _bohr_indices(gen: DaviesGenerator, diffs: np.ndarray) -> np.ndarray:
    omegas = gen.bohr.omegas
    pos = np.searchsorted(omegas, diffs)
    pos = np.clip(pos, 1, omegas.size - 1)
    left, right = omegas[pos - 1], omegas[pos]
    return np.where(np.abs(diffs - left) <= np.abs(right - diffs), pos - 1, pos)


def chain_rate_oracle(gen: DaviesGenerator, i: int, j: int) -> float:
    """Transition rate computed the defining way, ``<L(|u_j><u_j|), |u_i><u_i|>``.

    Uses the plain trace inner product and the full generator action; serves
    as a cross-check for :func:`extract_chain`.
    """
    from .davies import apply_davies_eig

    N = gen.dim
    ejj = np.zeros((N, N), dtype=complex)
    ejj[j, j] = 1.0
    return float(apply_davies_eig(gen, ejj)[i, i].real)


def classical_gap(chain: ClassicalChain) -> float:
    """Second-smallest eigenvalue of the pi-symmetrized negative generator."""
    if chain.size < 2:
        return math.inf
    d = np.sqrt(chain.pi)
    sym = (d[:, None] * (-chain.rates)) / d[None, :]
    ev = np.linalg.eigvalsh(0.5 * (sym + sym.T))
    return float(ev[1])


def classical_dirichlet(chain: ClassicalChain, F) -> float:
    """``1/2 sum_{i,j} (F_i - F_j)^2 pi_i P[i -> j]`` for a real test function."""
    F = np.asarray(F, dtype=float)
    if F.shape != (chain.size,):
        raise ValueError(f"test function has shape {F.shape}, expected ({chain.size},)")
    diff = F[:, None] - F[None, :]
    Q = chain.pi[:, None] * (chain.rates - np.diag(np.diag(chain.rates)))
    return 0.5 * float(np.sum(diff**2 * Q))


def variance_pi(chain: ClassicalChain, F) -> float:
    F = np.asarray(F, dtype=float)
    mean = float(chain.pi @ F)
    return float(chain.pi @ F**2) - mean**2


@dataclass(frozen=True)
class CheegerWitness:
    """A bottleneck cut and the observable quantities attached to it.

    ``subset`` lists the member states (indices into the chain); ``phi`` is
    its boundary-flow-to-mass ratio ``Q(S, S^c)/pi(S)``; ``exact`` records
    whether the cut came from exhaustive enumeration (else it is a sweep-cut
    upper bound on the true bottleneck ratio).
    """

    subset: tuple
    phi: float
    big_lambda: float
    projection: np.ndarray
    ratio: float
    pi_mass: float
    exact: bool

    def subset_bitmask(self) -> int:
        return sum(1 << i for i in self.subset)

    def to_json(self) -> dict:
        return {
            "subset_bitmask": self.subset_bitmask(),
            "subset": list(self.subset),
            "phi": self.phi,
            "lambda_max_exit": self.big_lambda,
            "ratio": self.ratio,
            "pi_mass": self.pi_mass,
            "exact": self.exact,
        }


def _cut_flow(chain: ClassicalChain, members: np.ndarray) -> float:
    Q = chain.pi[:, None] * (chain.rates - np.diag(np.diag(chain.rates)))
    return float(Q[np.ix_(members, np.setdiff1d(np.arange(chain.size), members))].sum())


def _witness_from_members(chain: ClassicalChain, members, exact: bool) -> CheegerWitness:
    members = np.asarray(sorted(int(i) for i in members), dtype=int)
    flow = _cut_flow(chain, members)
    mass = float(chain.pi[members].sum())
    U = chain.basis[:, members]
    proj = U @ U.conj().T
    ratio = flow / (mass * (1.0 - mass)) if 0.0 < mass < 1.0 else math.inf
    return CheegerWitness(
        subset=tuple(int(i) for i in members),
        phi=flow / mass,
        big_lambda=chain.max_exit_rate(),
        projection=proj,
        ratio=ratio,
        pi_mass=mass,
        exact=exact,
    )


def bottleneck(chain: ClassicalChain, mode: str = "exhaustive") -> CheegerWitness:
    """Best bottleneck cut ``min Q(S, S^c)/pi(S)`` over subsets with pi(S) <= 1/2.

    exhaustive: exact minimum, limited to 20 states.
    sweep:      best prefix cut of the second eigenvector ordering; an upper
                bound on the true ratio, but still obeys the Cheeger bound.
    """
    N = chain.size
    if N < 2:
        raise SizeError("bottleneck needs at least two states")
    if mode == "exhaustive":
        if N > EXHAUSTIVE_STATE_CAP:
            raise SizeError(f"exhaustive bottleneck limited to {EXHAUSTIVE_STATE_CAP} states, got {N}")
        return _witness_from_members(chain, _exhaustive_members(chain), exact=True)
    if mode == "sweep":
        return _witness_from_members(chain, _sweep_members(chain), exact=False)
    raise ValueError(f"unknown mode {mode!r}; expected 'exhaustive' or 'sweep'")


def _exhaustive_members(chain: ClassicalChain) -> np.ndarray:
    N = chain.size
    Q = chain.pi[:, None] * (chain.rates - np.diag(np.diag(chain.rates)))
    row = Q.sum(axis=1)
    best_ratio, best_mask = math.inf, 1
    chunk = 1 << 16
    for start in range(1, 2**N, chunk):
        masks = np.arange(start, min(start + chunk, 2**N), dtype=np.int64)
        bits = ((masks[:, None] >> np.arange(N)[None, :]) & 1).astype(float)
        mass = bits @ chain.pi
        keep = (mass <= 0.5 + 1e-12) & (mass > 0)
        if not keep.any():
            continue
        bits, mass, masks = bits[keep], mass[keep], masks[keep]
        inside = np.einsum("mi,ij,mj->m", bits, Q, bits)
        flow = bits @ row - inside
        ratios = flow / mass
        k = int(np.argmin(ratios))
        # deterministic tie-break: smallest bitmask among equal ratios
        tie = np.abs(ratios - ratios[k]) <= 0.0
        cand_mask = int(masks[tie].min())
        if ratios[k] < best_ratio or (ratios[k] == best_ratio and cand_mask < best_mask):
            best_ratio, best_mask = float(ratios[k]), cand_mask
    return np.nonzero([(best_mask >> i) & 1 for i in range(N)])[0]


def _sweep_members(chain: ClassicalChain) -> np.ndarray:
    N = chain.size
    d = np.sqrt(chain.pi)
    sym = (d[:, None] * (-chain.rates)) / d[None, :]
    _, vecs = np.linalg.eigh(0.5 * (sym + sym.T))
    f2 = vecs[:, 1] / d  # second eigenfunction in the pi geometry
    if chain.pi[f2 > 0].sum() > 0.5:
        f2 = -f2
    order = np.lexsort((np.arange(N), -f2))  # descending f2, ties by state index
    best_ratio, best_k = math.inf, 1
    mass = 0.0
    Q = chain.pi[:, None] * (chain.rates - np.diag(np.diag(chain.rates)))
    row = Q.sum(axis=1)
    flow, inside_cols = 0.0, np.zeros(N)
    for k, s in enumerate(order[:-1], start=1):
        mass += chain.pi[s]
        flow += row[s] - 2.0 * inside_cols[s]
        inside_cols += Q[s]
        if mass > 0.5 + 1e-12:
            break
        ratio = flow / mass
        if ratio < best_ratio:
            best_ratio, best_k = ratio, k
    return np.sort(order[:best_k])


def cheeger_witness(gen: DaviesGenerator, D: int,
                    rotation_samples: int = 0,
                    rng: np.random.Generator | None = None) -> dict:
    """Commuting projection witnessing the quantum gap, with its bound margin.

    Returns the witness plus the quantities entering the bound
    ``E(P) <= 4 sqrt(D * M * gap) * Var(P)``, where M bounds the chain's
    maximal exit rate by ``max|G| * ||sum_S S S^+||``.  For degenerate
    spectra, optional random rotations inside degenerate blocks search for a
    basis with a smaller classical gap.
    """
    if D < 1:
        raise ValueError(f"progression length D must be >= 1, got {D}")
    g_inf = float(np.abs(gen.g_values).max())
    SSd = sum(S @ S.conj().T for S in gen.jumps)
    M_bound = g_inf * float(np.linalg.norm(SSd, 2))

    report = spectral_gap_full(gen)
    lam = report.lambda_full
    degenerate = any(m > 1 for m in gen.levels.multiplicities)

    if report.lambda_diag == 0.0:
        # Non-ergodic: a zero mode commuting with H exists, and the chain in
        # its diagonalizing eigenbasis disconnects, giving a zero-flow cut.
        chain = extract_chain(gen, basis=_zero_mode_eigenbasis(gen))
    else:
        chain = extract_chain(gen)
        if degenerate and rotation_samples > 0:
            if rng is None:
                rng = np.random.default_rng(0)
            best = classical_gap(chain)
            for _ in range(rotation_samples):
                cand = extract_chain(gen, basis=rotated_eigenbasis(gen, rng))
                if classical_gap(cand) < best:
                    best, chain = classical_gap(cand), cand

    mode = "exhaustive" if chain.size <= EXHAUSTIVE_STATE_CAP else "sweep"
    witness = bottleneck(chain, mode=mode)
    lam_cl = classical_gap(chain)

    P = witness.projection
    E = dirichlet_form(gen, P)
    Var = variance(gen.gibbs, P)
    scale = tolerance_scale(gen, P)
    if Var <= 1e-12 * scale:
        raise WitnessDegenerateError(
            f"witness projection has variance {Var:.3e}, no meaningful ratio"
        )
    lam_finite = 0.0 if math.isinf(lam) else max(lam, 0.0)
    bound = 4.0 * math.sqrt(D * M_bound * lam_finite) * Var
    chain_margin = 2.0 * witness.big_lambda * lam_cl - witness.phi**2
    closed_form = 1.0 if gen.rate.kind in ("glauber", "metropolis") else None
    return {
        "witness": witness,
        "dirichlet": E,
        "variance": Var,
        "bound": bound,
        "margin": bound - E,
        "quantum_gap": lam,
        "classical_gap": lam_cl,
        "D": D,
        "M": M_bound,
        "g_inf_bohr": g_inf,
        "g_inf_closed_form": closed_form,
        "basis_nonunique": degenerate,
        "scale": scale,
    }


def _zero_mode_eigenbasis(gen: DaviesGenerator) -> np.ndarray:
    """Eigenbasis of H that also diagonalizes a zero mode of the diagonal block.

    The minimizing observable of the zero-frequency block is Hermitian (up
    to taking the Hermitian or anti-Hermitian part) and commutes with H, so
    diagonalizing it inside each level block yields a valid eigenbasis in
    which the embedded chain splits along the mode's level sets.
    """
    from .gaps import _complement_basis, _identity_coords, generator_matrix, subspace_basis

    basis = subspace_basis(gen, 0.0)
    M = generator_matrix(gen, basis)
    M = 0.5 * (M + M.conj().T)
    Q = _complement_basis(_identity_coords(gen, basis))
    Md = Q.conj().T @ M @ Q
    _, vecs = np.linalg.eigh(0.5 * (Md + Md.conj().T))
    coeff = Q @ vecs[:, 0]
    N = gen.dim
    f = np.zeros((N, N), dtype=complex)
    f[basis.rows, basis.cols] = coeff / basis.weights
    fH = 0.5 * (f + f.conj().T)
    if np.linalg.norm(fH) < 0.5 * np.linalg.norm(f):
        fH = 0.5j * (f - f.conj().T)
    # fH is block diagonal on levels; diagonalize each block separately so
    # eigenvectors cannot leak across levels through accidental degeneracy.
    U = gen.eigenvectors.copy()
    for g in gen.levels.index_groups:
        cols = list(g)
        _, Ub = np.linalg.eigh(fH[np.ix_(cols, cols)])
        U[:, cols] = U[:, cols] @ Ub
    return U


def rotated_eigenbasis(gen: DaviesGenerator, rng: np.random.Generator) -> np.ndarray:
    """Random eigenbasis: Haar rotation inside each degenerate level block."""
    U = gen.eigenvectors.copy()
    for g in gen.levels.index_groups:
        m = len(g)
        if m == 1:
            continue
        Ablock = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        Qb, Rb = np.linalg.qr(Ablock)
        Qb = Qb * (np.diag(Rb) / np.abs(np.diag(Rb)))
        cols = list(g)
        U[:, cols] = U[:, cols] @ Qb
    return U
