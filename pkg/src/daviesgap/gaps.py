"""Spectral gaps of the Davies generator.

The gap is the minimum Rayleigh quotient E(f)/Var(f).  Each Bohr-frequency
subspace is invariant, so the minimization splits into independent blocks:
the gap in a block is the smallest eigenvalue of the (Hermitian, PSD)
matrix of -L in a KMS-orthonormal basis of that block, with the identity
direction removed from the zero-frequency block since variance measures
distance to multiples of the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .davies import (
    DaviesGenerator,
    apply_davies_eig,
    dirichlet_form,
    kms_inner_eig,
    tolerance_scale,
    variance,
)
from .errors import ReversibilityError, SizeError, UnknownFrequencyError

HERMITICITY_RTOL = 1e-9
ZERO_GAP_TOL = 1e-12
CROSS_CHECK_MAX_DIM = 16
HERMITIAN_BASIS_CAP = 100


@dataclass(frozen=True)
class SubspaceBasis:
    """KMS-orthonormal basis of one Bohr-frequency subspace.

    Element ``k`` is ``(p_a p_b)^{-1/4} |u_a><u_b|`` for the eigen-index pair
    ``(rows[k], cols[k])``; all such elements are orthonormal for the KMS
    inner product.
    """

    omega: float
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray  # (p_a p_b)^{1/4} per element

    @property
    def dim(self) -> int:
        return self.rows.size

    def operator(self, gen: DaviesGenerator, k: int) -> np.ndarray:
        """Materialize basis element ``k`` as a computational-basis matrix."""
        e = np.zeros((gen.dim, gen.dim), dtype=complex)
        e[self.rows[k], self.cols[k]] = 1.0 / self.weights[k]
        return gen.from_eigenbasis(e)


def subspace_basis(gen: DaviesGenerator, omega: float) -> SubspaceBasis:
    k = gen.bohr.index_of(omega)
    if k is None:
        raise UnknownFrequencyError(f"omega={omega!r} is not a Bohr frequency")
    rows, cols = gen.pair_rows[k], gen.pair_cols[k]
    p = gen.weight_per_index
    return SubspaceBasis(omega=float(gen.bohr.omegas[k]), rows=rows, cols=cols,
                         weights=(p[rows] * p[cols]) ** 0.25)


def generator_matrix(gen: DaviesGenerator, basis: SubspaceBasis) -> np.ndarray:
    """Matrix ``M[i, j] = -<L(e_j), e_i>_rho`` on a frequency block.

    Assembled in closed form from the eigenbasis jump entries; KMS
    reversibility forces M to be Hermitian, and a violation beyond tolerance
    raises, since it signals a rate function without detailed balance.
    """
    aa, bb = basis.rows, basis.cols
    A = gen.anticomm_core
    G = gen.g_values[gen.rate_index[np.ix_(aa, aa)]]  # G(lam_a_k - lam_a_k')
    T1 = np.zeros((basis.dim, basis.dim), dtype=complex)
    for Sp in gen.jumps_eig:
        T1 += (np.conj(Sp[np.ix_(aa, aa)]) * Sp[np.ix_(bb, bb)] * G).T
    same_b = bb[:, None] == bb[None, :]
    same_a = aa[:, None] == aa[None, :]
    T2 = -0.5 * (A[np.ix_(aa, aa)] * same_b + A[np.ix_(bb, bb)].T * same_a)
    w = basis.weights
    M = -(w[:, None] * (T1 + T2)) / w[None, :]
    scale = max(1.0, float(np.abs(M).max()))
    dev = float(np.abs(M - M.conj().T).max())
    if dev > HERMITICITY_RTOL * scale:
        raise ReversibilityError(
            f"generator matrix non-Hermitian (deviation {dev:.3e} at scale {scale:.3e}); "
            f"rate function detailed-balance residual is {gen.db_residual:.3e}"
        )
    return M


def _complement_basis(c: np.ndarray) -> np.ndarray:
    """Orthonormal columns spanning the complement of the unit vector ``c``."""
    m = c.size
    v = c.astype(complex).copy()
    phase = v[0] / abs(v[0]) if abs(v[0]) > 0 else 1.0
    v[0] += phase
    v /= np.linalg.norm(v)
    Hh = np.eye(m, dtype=complex) - 2.0 * np.outer(v, v.conj())
    return Hh[:, 1:]


def _identity_coords(gen: DaviesGenerator, basis: SubspaceBasis) -> np.ndarray:
    """KMS coordinates of the identity within a zero-frequency basis (unit norm)."""
    p = gen.weight_per_index
    c = np.where(basis.rows == basis.cols, np.sqrt(p[basis.rows]), 0.0)
    return c / np.linalg.norm(c)


def spectral_gap_omega(gen: DaviesGenerator, omega: float) -> float:
    """Smallest Rayleigh quotient within one Bohr-frequency subspace.

    For omega = 0 the identity direction is deflated first; an empty
    deflated space yields +inf (nothing with positive variance to decay).
    """
    basis = subspace_basis(gen, omega)
    M = generator_matrix(gen, basis)
    M = 0.5 * (M + M.conj().T)
    if abs(basis.omega) <= gen.bohr.tol:
        if basis.dim == 1:
            return math.inf
        Q = _complement_basis(_identity_coords(gen, basis))
        M = Q.conj().T @ M @ Q
        M = 0.5 * (M + M.conj().T)
    return float(np.linalg.eigvalsh(M)[0])


@dataclass(frozen=True)
class GapReport:
    """All gap quantities of one generator, with cross-check residuals.

    Infinite gaps are serialized as the string ``"+inf"`` rather than a
    float infinity, which JSON cannot represent portably.
    """

    beta: float
    lambda_full: float
    lambda_diag: float
    omega_gaps: tuple  # ((omega, gap), ...) ascending in omega
    minimizing_omega: float
    lambda_full_hermitian: float | None
    lambda_diag_hermitian: float | None
    residuals: dict
    flags: tuple
    tolerances: dict

    @property
    def ergodic(self) -> bool:
        return "ergodicity-suspect" not in self.flags

    def to_json(self) -> dict:
        return {
            "beta": self.beta,
            "lambda_full": _encode_gap(self.lambda_full),
            "lambda_diag": _encode_gap(self.lambda_diag),
            "omega_gaps": [[om, _encode_gap(g)] for om, g in self.omega_gaps],
            "minimizing_omega": self.minimizing_omega,
            "lambda_full_hermitian": _encode_gap(self.lambda_full_hermitian),
            "lambda_diag_hermitian": _encode_gap(self.lambda_diag_hermitian),
            "residuals": dict(sorted(self.residuals.items())),
            "flags": list(self.flags),
            "tolerances": dict(sorted(self.tolerances.items())),
        }

    CSV_FIELDS = ("beta", "lambda_full", "lambda_diag", "minimizing_omega",
                  "lambda_full_hermitian", "lambda_diag_hermitian",
                  "cross_check_residual", "flags")

    def to_csv_row(self) -> list:
        return [
            self.beta,
            _encode_gap(self.lambda_full),
            _encode_gap(self.lambda_diag),
            self.minimizing_omega,
            _encode_gap(self.lambda_full_hermitian),
            _encode_gap(self.lambda_diag_hermitian),
            self.residuals.get("cross_check", ""),
            ";".join(self.flags),
        ]


def _encode_gap(x):
    if x is None:
        return None
    if math.isinf(x):
        return "+inf"
    return float(x)


def spectral_gap_full(gen: DaviesGenerator, *,
                      cross_check_dim: int = CROSS_CHECK_MAX_DIM,
                      hermitian_cap: int = HERMITIAN_BASIS_CAP,
                      zero_tol: float = ZERO_GAP_TOL) -> GapReport:
    """Gap in every Bohr subspace, their minimum, and consistency checks.

    Up to ``cross_check_dim`` Hilbert-space dimensions, the minimum is also
    recomputed from a dense vectorized superoperator (an independent code
    path) and the difference recorded as a residual.  Hermitian-restricted
    gaps are computed when the corresponding real basis is at most
    ``hermitian_cap`` elements; both must agree with the unrestricted gaps.
    """
    omega_gaps = []
    flags = []
    residuals = {}
    for om in gen.bohr.omegas:
        omega_gaps.append((float(om), spectral_gap_omega(gen, float(om))))

    finite = [(g, om) for om, g in omega_gaps if not math.isinf(g)]
    if finite:
        lam_full, min_om = min(finite)
    else:
        lam_full, min_om = math.inf, 0.0
    k0 = gen.bohr.zero_index()
    lam_diag = omega_gaps[k0][1]

    if not math.isinf(lam_full) and lam_full < zero_tol:
        flags.append("ergodicity-suspect")

    if gen.dim <= cross_check_dim:
        lam_super = _superoperator_gap(gen)
        residuals["cross_check"] = abs(lam_super - (0.0 if math.isinf(lam_full) else lam_full))
    else:
        flags.append("cross-check-skipped")

    lam_full_h = lam_diag_h = None
    if gen.dim**2 <= hermitian_cap:
        lam_full_h = hermitian_gap(gen, "all")
        residuals["hermitian_full"] = _gap_diff(lam_full_h, lam_full)
    else:
        flags.append("hermitian-full-skipped")
    v0_dim = int(sum(m * m for m in gen.levels.multiplicities))
    if v0_dim <= hermitian_cap:
        lam_diag_h = hermitian_gap(gen, "V0")
        residuals["hermitian_diag"] = _gap_diff(lam_diag_h, lam_diag)
    else:
        flags.append("hermitian-diag-skipped")

    clamp = lambda g: 0.0 if (not math.isinf(g) and abs(g) < zero_tol) else g
    return GapReport(
        beta=gen.beta,
        lambda_full=clamp(lam_full),
        lambda_diag=clamp(lam_diag),
        omega_gaps=tuple((om, clamp(g)) for om, g in omega_gaps),
        minimizing_omega=float(min_om),
        lambda_full_hermitian=None if lam_full_h is None else clamp(lam_full_h),
        lambda_diag_hermitian=None if lam_diag_h is None else clamp(lam_diag_h),
        residuals=residuals,
        flags=tuple(flags),
        tolerances={"hermiticity_rtol": HERMITICITY_RTOL, "zero_gap_tol": zero_tol,
                    "cluster_tol": gen.levels.tol, "bohr_tol": gen.bohr.tol},
    )


def _gap_diff(a: float, b: float) -> float:
    if math.isinf(a) and math.isinf(b):
        return 0.0
    if math.isinf(a) or math.isinf(b):
        return math.inf
    return abs(a - b)


def _superoperator_gap(gen: DaviesGenerator) -> float:
    """Full gap from a dense vectorized superoperator (independent route).

    Uses column-major vectorization: f -> S^+ f S becomes S^T (x) S^+, the
    anticommutator becomes I (x) A + A^T (x) I.  The result is conjugated
    into KMS-orthonormal coordinates and the identity direction removed.
    """
    N = gen.dim
    K = np.zeros((N * N, N * N), dtype=complex)
    eye = np.eye(N)
    for k in range(gen.bohr.count):
        rows, cols = gen.pair_rows[k], gen.pair_cols[k]
        g = gen.g_values[k]
        for Sp in gen.jumps_eig:
            Som = np.zeros((N, N), dtype=complex)
            Som[rows, cols] = Sp[rows, cols]
            K += g * np.kron(Som.T, Som.conj().T)
    A = gen.anticomm_core
    K -= 0.5 * (np.kron(eye, A) + np.kron(A.T, eye))

    p = gen.weight_per_index
    wv = np.sqrt(p[:, None] * p[None, :]).flatten(order="F")
    wh = np.sqrt(wv)
    M = -(wh[:, None] * K) / wh[None, :]
    M = 0.5 * (M + M.conj().T)
    c = np.eye(N).flatten(order="F") * wh
    c = c / np.linalg.norm(c)
    Q = _complement_basis(c)
    if Q.shape[1] == 0:
        return math.inf
    Md = Q.conj().T @ M @ Q
    return float(np.linalg.eigvalsh(0.5 * (Md + Md.conj().T))[0])


def rayleigh_quotient(gen: DaviesGenerator, f: np.ndarray) -> float:
    """E(f)/Var(f), with +inf when the variance is numerically zero."""
    E = dirichlet_form(gen, f)
    V = variance(gen.gibbs, f)
    if V <= 1e-12 * tolerance_scale(gen, f):
        return math.inf
    return E / V


def _hermitian_basis_elements(gen: DaviesGenerator, subspace: str):
    """Real KMS-orthonormal basis of Hermitian observables (eigenbasis matrices).

    Yields (matrix, is_diagonal_slot, eigenindex) triples; the diagonal slots
    are the ones carrying identity weight for deflation.
    """
    N = gen.dim
    p = gen.weight_per_index
    lvl = gen.levels.level_of_index
    if subspace == "all":
        unordered = [(a, b) for a in range(N) for b in range(a + 1, N)]
    elif subspace == "V0":
        unordered = [(a, b) for a in range(N) for b in range(a + 1, N) if lvl[a] == lvl[b]]
    else:
        raise ValueError(f"subspace must be 'all' or 'V0', got {subspace!r}")
    for a in range(N):
        e = np.zeros((N, N), dtype=complex)
        e[a, a] = p[a] ** -0.5
        yield e, True, a
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for a, b in unordered:
        n_ab = (p[a] * p[b]) ** -0.25
        e = np.zeros((N, N), dtype=complex)
        e[a, b] = n_ab * inv_sqrt2
        e[b, a] = n_ab * inv_sqrt2
        yield e, False, -1
        e = np.zeros((N, N), dtype=complex)
        e[a, b] = 1j * n_ab * inv_sqrt2
        e[b, a] = -1j * n_ab * inv_sqrt2
        yield e, False, -1


def hermitian_gap(gen: DaviesGenerator, subspace: str = "all",
                  basis_cap: int = HERMITIAN_BASIS_CAP) -> float:
    """Minimum Rayleigh quotient over Hermitian observables.

    Works in the real-linear space of Hermitian matrices (optionally within
    the commutant of H), which is an independent computation from the
    complex per-frequency route; the two must agree.
    """
    elems = list(_hermitian_basis_elements(gen, subspace))
    m = len(elems)
    if m > basis_cap:
        raise SizeError(f"hermitian basis has {m} elements; cap is {basis_cap}")
    p = gen.weight_per_index
    images = [apply_davies_eig(gen, e) for e, _, _ in elems]
    M = np.empty((m, m))
    for j, Le in enumerate(images):
        for i, (e, _, _) in enumerate(elems):
            M[i, j] = -kms_inner_eig(gen, Le, e).real
    M = 0.5 * (M + M.T)
    c = np.array([np.sqrt(p[a]) if diag else 0.0 for _, diag, a in elems])
    norm = np.linalg.norm(c)
    if m == 1:
        return math.inf
    c = c / norm
    Q = _complement_basis(c).real
    Md = Q.T @ M @ Q
    return float(np.linalg.eigvalsh(0.5 * (Md + Md.T))[0])
