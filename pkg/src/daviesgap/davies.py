"""The Davies generator and its quadratic forms.

The generator acts on observables (Heisenberg picture):

    L(f) = sum_{omega, S} G(omega) ( S(omega)^+ f S(omega)
                                     - 1/2 {S(omega)^+ S(omega), f} ),

where ``S(omega)`` keeps the matrix elements of a jump operator between
eigenspaces separated by the Bohr frequency ``omega``.  With a detailed-
balanced rate function, L is self-adjoint for the KMS inner product
``<A, B> = tr(rho^1/2 A rho^1/2 B^+)`` and the Gibbs state is stationary.

Everything expensive is cached in the Hamiltonian eigenbasis at
construction; public operations accept and return computational-basis
matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, SubspacePreconditionError, UnknownFrequencyError
from .operators import require_hermitian, site_operator
from .spectral import (
    BohrData,
    GibbsState,
    Levels,
    SpectralData,
    bohr_frequencies,
    cluster_levels,
    component_mask,
    default_cluster_tol,
    eigendecompose,
    gibbs_state,
    project_component,
)

RATE_KINDS = ("glauber", "metropolis", "table")
DETAILED_BALANCE_RTOL = 1e-10
JUMP_MATCH_TOL = 1e-12


@dataclass(frozen=True)
class RateFunction:
    """Transition rate ``G(omega)`` with detailed balance ``G(w) = G(-w) e^{-beta w}``.

    glauber:     G(w) = 1 / (1 + e^{beta w})
    metropolis:  G(w) = min(1, e^{-beta w})
    table:       explicit (omega, G) pairs, queried by nearest match
    """

    kind: str
    beta: float
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in RATE_KINDS:
            raise ValueError(f"unknown rate kind {self.kind!r}; expected one of {RATE_KINDS}")
        if self.kind == "table" and not self.table:
            raise ValueError("table rate needs at least one (omega, G) pair")


def transition_rate(rf: RateFunction, omega: float) -> float:
    """Evaluate ``G(omega)``; table rates require a match within 1e-9."""
    b = rf.beta
    if rf.kind == "glauber":
        # 1/(1+e^x) written to avoid overflow for large |x|
        x = b * omega
        return float(np.exp(-np.logaddexp(0.0, x)))
    if rf.kind == "metropolis":
        return float(np.exp(-max(b * omega, 0.0)))
    best = min(rf.table, key=lambda t: abs(t[0] - omega))
    if abs(best[0] - omega) > 1e-9:
        raise UnknownFrequencyError(
            f"omega={omega!r} not tabulated (nearest entry at {best[0]!r})"
        )
    return float(best[1])


def symmetrized_rate(rf: RateFunction, omega: float) -> float:
    """The weight ``G~(omega) = G(omega) e^{beta omega / 2}`` of the divergence form.

    Closed forms for the named kinds avoid overflowing the exponential:
    glauber gives ``1 / (2 cosh(beta omega / 2))`` and metropolis gives
    ``e^{-|beta omega| / 2}``; detailed balance makes both even in omega.
    """
    x = rf.beta * omega
    if rf.kind == "glauber":
        return float(0.5 / np.cosh(0.5 * x))
    if rf.kind == "metropolis":
        return float(np.exp(-0.5 * abs(x)))
    return transition_rate(rf, omega) * float(np.exp(0.5 * x))


def detailed_balance_residual(rf: RateFunction, omegas) -> float:
    """Max relative violation of ``G(w) = G(-w) e^{-beta w}`` over the given frequencies."""
    worst = 0.0
    for om in np.asarray(omegas, dtype=float):
        lhs = transition_rate(rf, om)
        rhs = transition_rate(rf, -om) * float(np.exp(-rf.beta * om))
        denom = max(lhs, rhs, 1e-300)
        worst = max(worst, abs(lhs - rhs) / denom)
    return worst


def jump_component(S: np.ndarray, omega: float, levels: Levels,
                   bohr: BohrData | None = None) -> np.ndarray:
    """Fourier component ``S(omega)`` of a jump operator (zero if omega is not Bohr)."""
    return project_component(S, omega, levels, bohr=bohr)


@dataclass(frozen=True, eq=False)
class DaviesGenerator:
    """An immutable Davies generator with eigenbasis caches.

    ``pair_rows[k]  / pair_cols[k]`` list the eigen-index matrix positions
    living at Bohr frequency ``bohr.omegas[k]``; ``jumps_eig`` holds the jump
    operators rotated into the eigenbasis; ``anticomm_core`` is
    ``sum_{S, omega} G(omega) S(omega)^+ S(omega)`` (block diagonal on levels).
    """

    levels: Levels
    gibbs: GibbsState
    rate: RateFunction
    jumps: tuple
    bohr: BohrData
    jumps_eig: tuple = field(repr=False)
    pair_rows: tuple = field(repr=False)
    pair_cols: tuple = field(repr=False)
    g_values: np.ndarray = field(repr=False)
    gt_values: np.ndarray = field(repr=False)
    rate_index: np.ndarray = field(repr=False)
    anticomm_core: np.ndarray = field(repr=False)
    db_residual: float = 0.0
    jump_norm_sq: float = 1.0

    @property
    def beta(self) -> float:
        return self.rate.beta

    @property
    def dim(self) -> int:
        return self.levels.dim

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.levels.eigenvectors

    @property
    def value_per_index(self) -> np.ndarray:
        return self.levels.value_per_index

    @property
    def weight_per_index(self) -> np.ndarray:
        return self.gibbs.weight_per_index

    def to_eigenbasis(self, f: np.ndarray) -> np.ndarray:
        V = self.eigenvectors
        return V.conj().T @ np.asarray(f, dtype=complex) @ V

    def from_eigenbasis(self, fp: np.ndarray) -> np.ndarray:
        V = self.eigenvectors
        return V @ fp @ V.conj().T

    def rate_at(self, diffs: np.ndarray) -> np.ndarray:
        """G evaluated at the Bohr representative nearest each level difference."""
        idx = _nearest_indices(self.bohr.omegas, np.asarray(diffs, dtype=float))
        return self.g_values[idx]


def _nearest_indices(sorted_vals: np.ndarray, queries: np.ndarray) -> np.ndarray:
    pos = np.searchsorted(sorted_vals, queries)
    pos = np.clip(pos, 1, sorted_vals.size - 1)
    left = sorted_vals[pos - 1]
    right = sorted_vals[pos]
    take_left = np.abs(queries - left) <= np.abs(right - queries)
    return np.where(take_left, pos - 1, pos)


def default_jumps(n: int) -> list[np.ndarray]:
    """All single-site X, Y and Z operators; self-adjoint as a set."""
    return [site_operator(p, i, n) for i in range(1, n + 1) for p in "XYZ"]


def parse_jump_label(label: str, n: int) -> np.ndarray:
    """Decode labels like ``"X1"`` or ``"Y12"`` into embedded site operators."""
    if len(label) < 2 or label[0] not in "XYZ" or not label[1:].isdigit():
        raise ValueError(f"bad jump label {label!r}; expected e.g. 'X1', 'Z3'")
    return site_operator(label[0], int(label[1:]), n)


def symmetrize_jumps(jumps) -> tuple:
    """Close the jump set under conjugate transpose (within matching tolerance)."""
    out = [np.asarray(S, dtype=complex) for S in jumps]
    if not out:
        raise ValueError("empty jump set")
    for S in out:
        if S.shape != out[0].shape or S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DimensionError("jump operators must be square matrices of equal size")
        if not np.all(np.isfinite(S)):
            raise ValueError("jump operator has non-finite entries")
    i = 0
    while i < len(out):
        Sd = out[i].conj().T
        if not any(np.abs(T - Sd).max() <= JUMP_MATCH_TOL for T in out):
            out.append(Sd)
        i += 1
    return tuple(out)


def build_generator(H: np.ndarray | None = None, *, beta: float,
                    rate="glauber", jumps=None, rate_table=None,
                    levels: Levels | None = None,
                    cluster_tol: float | None = None,
                    bohr_tol: float | None = None) -> DaviesGenerator:
    """Assemble a :class:`DaviesGenerator` from a Hamiltonian or pre-clustered levels.

    A rate table violating detailed balance is accepted with a warning so
    that verification suites can observe the resulting reversibility
    failure; closed-form rates always satisfy it.
    """
    if levels is None:
        if H is None:
            raise ValueError("either H or levels must be given")
        sd = eigendecompose(H)
        if cluster_tol is None:
            cluster_tol = default_cluster_tol(sd)
        levels = cluster_levels(sd, cluster_tol)
    n_qubits = int(round(np.log2(levels.dim)))
    if jumps is None:
        if 2**n_qubits != levels.dim:
            raise ValueError("dimension is not a power of two; pass jumps explicitly")
        jumps = default_jumps(n_qubits)
    jumps = tuple(
        parse_jump_label(S, n_qubits) if isinstance(S, str) else S for S in jumps
    )
    if jumps[0].shape[0] != levels.dim:
        raise DimensionError(
            f"jump dimension {jumps[0].shape[0]} != Hamiltonian dimension {levels.dim}"
        )
    jumps = symmetrize_jumps(jumps)

    if isinstance(rate, str):
        rate = RateFunction(kind=rate, beta=beta,
                            table=tuple(map(tuple, rate_table)) if rate_table else ())
    elif rate.beta != beta:
        raise ValueError(f"rate function beta={rate.beta} disagrees with beta={beta}")

    if bohr_tol is None:
        bohr_tol = levels.tol
    bohr = bohr_frequencies(levels, bohr_tol)
    gibbs = gibbs_state(levels, beta)

    g_values = np.array([transition_rate(rate, om) for om in bohr.omegas])
    gt_values = np.array([symmetrized_rate(rate, om) for om in bohr.omegas])
    db_res = detailed_balance_residual(rate, bohr.omegas)
    if db_res > DETAILED_BALANCE_RTOL:
        warnings.warn(
            f"rate function violates detailed balance (relative residual {db_res:.3e}); "
            "the generator will not be KMS self-adjoint",
            stacklevel=2,
        )

    V = levels.eigenvectors
    jumps_eig = tuple(V.conj().T @ S @ V for S in jumps)
    pair_rows, pair_cols = [], []
    for k in range(bohr.count):
        rows, cols = component_mask(levels, bohr, k)
        pair_rows.append(rows)
        pair_cols.append(cols)

    lam = levels.value_per_index
    lvl = levels.level_of_index
    rate_index = _nearest_indices(bohr.omegas, lam[:, None] - lam[None, :])
    G_mat = g_values[rate_index]  # G(lam_r - lam_c) at entry (r, c)
    block = lvl[:, None] == lvl[None, :]
    A = np.zeros((levels.dim, levels.dim), dtype=complex)
    for Sp in jumps_eig:
        T = np.sqrt(G_mat) * Sp
        A += (T.conj().T @ T) * block

    jump_norm_sq = float(sum(np.linalg.norm(S, 2) ** 2 for S in jumps))
    return DaviesGenerator(
        levels=levels, gibbs=gibbs, rate=rate, jumps=jumps, bohr=bohr,
        jumps_eig=jumps_eig, pair_rows=tuple(pair_rows), pair_cols=tuple(pair_cols),
        g_values=g_values, gt_values=gt_values, rate_index=rate_index,
        anticomm_core=A, db_residual=db_res, jump_norm_sq=jump_norm_sq,
    )


def parse_generator_spec(doc: dict, n: int):
    """Decode the generator JSON document {"beta", "rate", "jumps"}.

    Returns ``(beta, RateFunction, jump list)``; jumps may be site labels or
    dense matrices of [re, im] pairs.
    """
    from .operators import complex_matrix_from_json

    if not isinstance(doc, dict):
        raise ValueError("generator spec must be a JSON object")
    unknown = set(doc) - {"beta", "rate", "jumps"}
    if unknown:
        raise ValueError(f"unknown generator fields {sorted(unknown)}")
    beta = float(doc.get("beta", 1.0))
    rdoc = doc.get("rate", {"kind": "glauber"})
    unknown = set(rdoc) - {"kind", "table"}
    if unknown:
        raise ValueError(f"unknown rate fields {sorted(unknown)}")
    table = tuple((float(w), float(g)) for w, g in rdoc.get("table", []))
    rf = RateFunction(kind=rdoc.get("kind", "glauber"), beta=beta, table=table)
    jumps = None
    if "jumps" in doc:
        jumps = [
            j if isinstance(j, str) else complex_matrix_from_json(j)
            for j in doc["jumps"]
        ]
    return beta, rf, jumps


# ---------------------------------------------------------------------------
# Generator action and quadratic forms
# ---------------------------------------------------------------------------


def _check_dim(gen: DaviesGenerator, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    if f.shape != (gen.dim, gen.dim):
        raise DimensionError(f"operator shape {f.shape} != ({gen.dim}, {gen.dim})")
    return f


def _stack(gen: DaviesGenerator) -> np.ndarray:
    return np.stack(gen.jumps_eig)


def _masked_stack(stack: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    out = np.zeros_like(stack)
    out[:, rows, cols] = stack[:, rows, cols]
    return out


def apply_davies(gen: DaviesGenerator, f: np.ndarray) -> np.ndarray:
    """Apply the generator to an observable (computational-basis in and out)."""
    f = _check_dim(gen, f)
    fp = gen.to_eigenbasis(f)
    out = apply_davies_eig(gen, fp)
    return gen.from_eigenbasis(out)


def apply_davies_eig(gen: DaviesGenerator, fp: np.ndarray) -> np.ndarray:
    """Generator action on an observable already written in the eigenbasis."""
    A = gen.anticomm_core
    out = -0.5 * (A @ fp + fp @ A)
    stack = _stack(gen)
    for k in range(gen.bohr.count):
        Sw = _masked_stack(stack, gen.pair_rows[k], gen.pair_cols[k])
        out += gen.g_values[k] * (Sw.conj().transpose(0, 2, 1) @ fp @ Sw).sum(axis=0)
    return out


def kms_inner(gibbs: GibbsState, A: np.ndarray, B: np.ndarray) -> complex:
    """KMS inner product ``tr(rho^1/2 A rho^1/2 B^+)``."""
    rh = gibbs.rho_half
    return complex(np.trace(rh @ A @ rh @ B.conj().T))


def kms_norm_sq_eig(gen: DaviesGenerator, Xp: np.ndarray) -> float:
    """``<X, X>_rho`` for X in the eigenbasis: sum sqrt(p_a p_b) |X_ab|^2."""
    p = gen.weight_per_index
    return float(np.sum(np.sqrt(p[:, None] * p[None, :]) * np.abs(Xp) ** 2))


def kms_inner_eig(gen: DaviesGenerator, Xp: np.ndarray, Yp: np.ndarray) -> complex:
    p = gen.weight_per_index
    return complex(np.sum(np.sqrt(p[:, None] * p[None, :]) * Xp * Yp.conj()))


def variance(gibbs: GibbsState, f: np.ndarray) -> float:
    """``<f, f>_rho - tr(rho f) tr(rho f^+)``; real and nonnegative up to roundoff."""
    f = np.asarray(f, dtype=complex)
    tr = complex(np.trace(gibbs.rho @ f))
    val = kms_inner(gibbs, f, f) - tr * np.conj(tr)
    return float(val.real)


def dirichlet_form(gen: DaviesGenerator, f: np.ndarray, method: str = "definitional") -> float:
    """Dirichlet form of an observable, by either of two equivalent routes.

    definitional:  E(f) = -<L(f), f>_rho
    divergence:    E(f) = 1/2 sum_{S, omega} G~(omega) ||[S(omega), f]||_rho^2

    The two agree whenever the rate function is detailed balanced, which
    makes them mutual cross-checks.
    """
    f = _check_dim(gen, f)
    fp = gen.to_eigenbasis(f)
    if method == "definitional":
        val = kms_inner_eig(gen, apply_davies_eig(gen, fp), fp)
        return float(-val.real)
    if method == "divergence":
        stack = _stack(gen)
        p = gen.weight_per_index
        w = np.sqrt(p[:, None] * p[None, :])
        total = 0.0
        for k in range(gen.bohr.count):
            Sw = _masked_stack(stack, gen.pair_rows[k], gen.pair_cols[k])
            comm = Sw @ fp - fp @ Sw
            total += gen.gt_values[k] * float(np.sum(w[None, :, :] * np.abs(comm) ** 2))
        return 0.5 * total
    raise ValueError(f"unknown method {method!r}; expected 'definitional' or 'divergence'")


def tolerance_scale(gen: DaviesGenerator, f: np.ndarray) -> float:
    """Normalizer for relative tolerances: max(1, ||f||_F^2, sum_S ||S||^2)."""
    return max(1.0, float(np.linalg.norm(f) ** 2), gen.jump_norm_sq)


def hermitian_sqrt(M: np.ndarray, clip_rtol: float = 1e-12) -> np.ndarray:
    """Square root of a Hermitian PSD matrix, clamping small negative eigenvalues."""
    M = np.asarray(M, dtype=complex)
    w, U = np.linalg.eigh(0.5 * (M + M.conj().T))
    floor = clip_rtol * max(float(w.max()), 0.0)
    w = np.where(w < floor, 0.0, w)
    return (U * np.sqrt(w)) @ U.conj().T


def hermitianize_pair(f: np.ndarray, omega: float, beta: float, levels: Levels,
                      bohr: BohrData | None = None,
                      membership_rtol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian companions ``g = e^{bw/4} (f f^+)^1/2`` and ``h = e^{-bw/4} (f^+ f)^1/2``.

    Requires f to live in the frequency-omega subspace; both outputs are
    Hermitian PSD and commute with the Hamiltonian.
    """
    f = np.asarray(f, dtype=complex)
    comp = project_component(f, omega, levels, bohr=bohr)
    dist = float(np.linalg.norm(f - comp))
    if dist > membership_rtol * max(1.0, float(np.linalg.norm(f))):
        raise SubspacePreconditionError(
            f"operator is not in the frequency-{omega} subspace", dist
        )
    scale = np.exp(0.25 * beta * omega)
    g = scale * hermitian_sqrt(f @ f.conj().T)
    h = (1.0 / scale) * hermitian_sqrt(f.conj().T @ f)
    return g, h


def trace_inequality_residual(A: np.ndarray, B: np.ndarray, f: np.ndarray) -> float:
    """Residual of tr(AgA^+g) + tr(BhB^+h) >= tr(AfB^+f^+) + tr(Bf^+A^+f).

    Here ``g = (f f^+)^1/2`` and ``h = (f^+ f)^1/2``; the residual is
    nonnegative for arbitrary square A, B, f of equal size.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    f = np.asarray(f, dtype=complex)
    if not (A.shape == B.shape == f.shape) or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError("A, B, f must be square matrices of equal size")
    g = hermitian_sqrt(f @ f.conj().T)
    h = hermitian_sqrt(f.conj().T @ f)
    val = (
        np.trace(A @ g @ A.conj().T @ g)
        + np.trace(B @ h @ B.conj().T @ h)
        - np.trace(A @ f @ B.conj().T @ f.conj().T)
        - np.trace(B @ f.conj().T @ A.conj().T @ f)
    )
    return float(val.real)


def coherent_term_value(gen: DaviesGenerator, H: np.ndarray, f: np.ndarray) -> complex:
    """``<[H, f], f>_rho``; real for every f, zero for Hermitian f.

    Adding the coherent part i[H, .] to the generator therefore shifts the
    Dirichlet form only by an imaginary amount, leaving the gap unchanged.
    """
    H = np.asarray(H, dtype=complex)
    f = np.asarray(f, dtype=complex)
    return kms_inner(gen.gibbs, H @ f - f @ H, f)


def coherent_term_check(gen: DaviesGenerator, H: np.ndarray, f: np.ndarray) -> float:
    """|<[H, f], f>_rho| — vanishes (up to roundoff) for Hermitian f."""
    return abs(coherent_term_value(gen, H, f))
