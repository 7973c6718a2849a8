"""Eigenstructure utilities: level clustering, Bohr frequencies, frequency
components of observables, Gibbs states, and arithmetic-progression detection.

All tolerances here default to multiples of the spectral range, since the
meaningful scale of "equal eigenvalues" grows with the norm of the
Hamiltonian.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .operators import require_hermitian

DEFAULT_VALUE_TOL_FACTOR = 1e-9
DEFAULT_SEP_TOL_FACTOR = 1e-7


@dataclass(frozen=True)
class SpectralData:
    """Ascending eigenvalues and orthonormal eigenvector columns of a Hermitian matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def spectral_range(self) -> float:
        if self.dim < 2:
            return 0.0
        return float(self.eigenvalues[-1] - self.eigenvalues[0])


def eigendecompose(H: np.ndarray) -> SpectralData:
    """Dense Hermitian eigendecomposition with a reconstruction-residual check."""
    H = require_hermitian(H, "H")
    try:
        evals, evecs = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigensolver failed: {exc}; matrix max|entry|={np.abs(H).max():.3e}, "
            f"frobenius={np.linalg.norm(H):.3e}"
        ) from exc
    scale = max(1.0, float(np.abs(H).max()))
    resid = float(np.abs((evecs * evals) @ evecs.conj().T - H).max())
    if resid > 1e-10 * scale:
        raise NumericalError(f"eigendecomposition residual {resid:.3e} exceeds 1e-10*{scale:.3e}")
    return SpectralData(eigenvalues=evals, eigenvectors=evecs)


@dataclass(frozen=True)
class Levels:
    """Distinct eigenvalues after clustering, with multiplicities and eigenvector groups.

    ``index_groups[k]`` lists the eigen-indices belonging to level ``k``;
    ``level_of_index[i]`` is the inverse map.  Projectors are built on demand
    from the stored eigenvectors.
    """

    values: np.ndarray
    multiplicities: np.ndarray
    index_groups: tuple
    eigenvectors: np.ndarray
    tol: float

    @property
    def count(self) -> int:
        return self.values.size

    @property
    def dim(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def level_of_index(self) -> np.ndarray:
        out = np.empty(self.dim, dtype=int)
        for k, g in enumerate(self.index_groups):
            out[list(g)] = k
        return out

    @property
    def value_per_index(self) -> np.ndarray:
        return self.values[self.level_of_index]

    def projector(self, k: int) -> np.ndarray:
        V = self.eigenvectors[:, list(self.index_groups[k])]
        return V @ V.conj().T

    def hamiltonian(self) -> np.ndarray:
        """Reassemble ``sum_k value_k * projector_k``."""
        lam = self.value_per_index
        V = self.eigenvectors
        return (V * lam) @ V.conj().T


def cluster_levels(sd: SpectralData, tol: float) -> Levels:
    """Merge consecutive eigenvalues whose gap is at most ``tol`` into one level.

    Merging is a transitive chain on the sorted spectrum; the level value is
    the mean of the merged eigenvalues.
    """
    if tol <= 0:
        raise ValueError(f"clustering tolerance must be positive, got {tol}")
    ev = sd.eigenvalues
    groups = []
    cur = [0]
    for i in range(1, ev.size):
        if ev[i] - ev[i - 1] <= tol:
            cur.append(i)
        else:
            groups.append(tuple(cur))
            cur = [i]
    groups.append(tuple(cur))
    values = np.array([ev[list(g)].mean() for g in groups])
    mult = np.array([len(g) for g in groups])
    return Levels(values=values, multiplicities=mult, index_groups=tuple(groups),
                  eigenvectors=sd.eigenvectors, tol=tol)


def default_cluster_tol(sd: SpectralData) -> float:
    return 1e-9 * max(1.0, sd.spectral_range)


@dataclass(frozen=True)
class BohrData:
    """Deduplicated differences of level values.

    ``omegas`` is sorted ascending and exactly symmetric under negation;
    ``pairs[k]`` lists the (level_a, level_b) index pairs with
    ``value_a - value_b = omegas[k]``.
    """

    omegas: np.ndarray
    pairs: tuple
    tol: float

    @property
    def count(self) -> int:
        return self.omegas.size

    def index_of(self, omega: float, tol: float | None = None) -> int | None:
        """Index of the representative nearest ``omega``, or None if out of tolerance."""
        tol = self.tol if tol is None else tol
        k = int(np.argmin(np.abs(self.omegas - omega)))
        if abs(self.omegas[k] - omega) <= tol:
            return k
        return None

    def zero_index(self) -> int:
        k = self.index_of(0.0)
        assert k is not None, "omega = 0 is always a Bohr frequency"
        return k


def bohr_frequencies(levels: Levels, tol: float) -> BohrData:
    """All pairwise level differences, deduplicated at ``tol``.

    Only the nonnegative side is grouped; the negative side mirrors it, so
    ``omega`` is present exactly when ``-omega`` is.
    """
    if tol <= 0:
        raise ValueError(f"dedup tolerance must be positive, got {tol}")
    v = levels.values
    m = v.size
    entries = []  # (diff, level_a, level_b) with diff >= 0
    for a in range(m):
        for b in range(m):
            d = v[a] - v[b]
            if d >= 0:
                entries.append((d, a, b))
    entries.sort(key=lambda t: t[0])
    groups = [[entries[0]]]
    for e in entries[1:]:
        if e[0] - groups[-1][-1][0] <= tol:
            groups[-1].append(e)
        else:
            groups.append([e])

    # The first group always holds the diagonal (a == a) pairs, so it is the
    # omega = 0 group; anything chained to it within tol counts as zero too,
    # in both orders so the pair list stays symmetric.
    zero_list = [(t[1], t[2]) for t in groups[0]]
    zero_list += [(b, a) for (a, b) in zero_list if a != b]
    zero_pairs = tuple(zero_list)
    pos_omegas = [float(np.mean([t[0] for t in g])) for g in groups[1:]]
    pos_pairs = [tuple((t[1], t[2]) for t in g) for g in groups[1:]]

    omegas = np.array([-om for om in reversed(pos_omegas)] + [0.0] + pos_omegas)
    pairs = (
        tuple(tuple((b, a) for (a, b) in prs) for prs in reversed(pos_pairs))
        + (zero_pairs,)
        + tuple(pos_pairs)
    )
    return BohrData(omegas=omegas, pairs=pairs, tol=tol)


def project_component(f: np.ndarray, omega: float, levels: Levels,
                      bohr: BohrData | None = None, tol: float | None = None) -> np.ndarray:
    """Frequency component ``f(omega) = sum_{a-b=omega} P_a f P_b``.

    If ``omega`` is not a Bohr frequency within tolerance, the component is
    the zero operator; a warning flags the miss.
    """
    f = np.asarray(f, dtype=complex)
    N = levels.dim
    if f.shape != (N, N):
        raise ValueError(f"operator shape {f.shape} does not match dimension {N}")
    if bohr is None:
        bohr = bohr_frequencies(levels, tol if tol is not None else levels.tol)
    k = bohr.index_of(omega, tol)
    if k is None:
        warnings.warn(
            f"omega={omega!r} is not a Bohr frequency within tolerance; returning zero",
            stacklevel=2,
        )
        return np.zeros_like(f)
    V = levels.eigenvectors
    fp = V.conj().T @ f @ V
    lvl = levels.level_of_index
    mask = np.zeros((N, N), dtype=bool)
    pair_set = set(bohr.pairs[k])
    for (a, b) in pair_set:
        rows = np.array(levels.index_groups[a])
        cols = np.array(levels.index_groups[b])
        mask[np.ix_(rows, cols)] = True
    return V @ (fp * mask) @ V.conj().T


def component_mask(levels: Levels, bohr: BohrData, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-index (rows, cols) arrays of every matrix entry living at Bohr frequency k."""
    rows, cols = [], []
    for (a, b) in bohr.pairs[k]:
        ga = list(levels.index_groups[a])
        gb = list(levels.index_groups[b])
        for ia in ga:
            rows.extend([ia] * len(gb))
            cols.extend(gb)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


@dataclass(frozen=True)
class GibbsState:
    """Thermal state ``exp(-beta H) / Z`` stored with its level weights.

    ``level_weights[k]`` is the weight of one eigenvector in level ``k``
    (so the level's total mass is ``multiplicity * level_weights[k]``).
    ``rho_half`` and ``rho_quarter`` are cached matrix powers.
    """

    beta: float
    levels: Levels
    level_weights: np.ndarray
    rho: np.ndarray
    rho_half: np.ndarray
    rho_quarter: np.ndarray

    @property
    def weight_per_index(self) -> np.ndarray:
        return self.level_weights[self.levels.level_of_index]


def gibbs_state(levels: Levels, beta: float) -> GibbsState:
    """Build the Gibbs state at inverse temperature ``beta`` (any finite real).

    Exponentials are shifted by the maximal exponent before normalizing, so
    extreme ``beta * value`` products cannot overflow.
    """
    if not np.isfinite(beta):
        raise ValueError(f"beta must be finite, got {beta}")
    expo = -beta * levels.value_per_index
    w = np.exp(expo - expo.max())
    p = w / w.sum()
    V = levels.eigenvectors
    rho = (V * p) @ V.conj().T
    rho_half = (V * np.sqrt(p)) @ V.conj().T
    rho_quarter = (V * p**0.25) @ V.conj().T
    level_weights = np.array([p[g[0]] for g in levels.index_groups])
    return GibbsState(beta=beta, levels=levels, level_weights=level_weights,
                      rho=rho, rho_half=rho_half, rho_quarter=rho_quarter)


# ---------------------------------------------------------------------------
# Arithmetic progressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class APReport:
    """Longest proper arithmetic progression found in a spectrum.

    ``a`` is the first term and ``b`` the common difference of a witness;
    ``b`` is None when fewer than two distinct values exist.
    """

    length: int
    a: float | None
    b: float | None
    value_tol: float
    sep_tol: float

    def to_json(self) -> dict:
        return {"length": self.length, "a": self.a, "b": self.b,
                "value_tol": self.value_tol, "sep_tol": self.sep_tol}


def distinct_values(spectrum, value_tol: float) -> np.ndarray:
    """Cluster a sorted multiset into distinct representatives at ``value_tol``."""
    vals = np.sort(np.asarray(spectrum, dtype=float))
    if vals.size == 0:
        return vals
    groups = [[vals[0]]]
    for x in vals[1:]:
        if x - groups[-1][-1] <= value_tol:
            groups[-1].append(x)
        else:
            groups.append([x])
    return np.array([float(np.mean(g)) for g in groups])


def _contains(sorted_vals: np.ndarray, x: float, tol: float) -> bool:
    i = np.searchsorted(sorted_vals, x)
    for j in (i - 1, i):
        if 0 <= j < sorted_vals.size and abs(sorted_vals[j] - x) <= tol:
            return True
    return False


def default_ap_tols(spectrum) -> tuple[float, float]:
    vals = np.asarray(spectrum, dtype=float)
    rng = float(vals.max() - vals.min()) if vals.size > 1 else 0.0
    if rng <= 0:
        return 1e-12, 1e-10
    return DEFAULT_VALUE_TOL_FACTOR * rng, DEFAULT_SEP_TOL_FACTOR * rng


def find_proper_ap(spectrum, max_len: int | None = None,
                   value_tol: float | None = None,
                   sep_tol: float | None = None) -> APReport:
    """Longest proper arithmetic progression among the distinct spectrum values.

    Exhaustive over ordered pairs of distinct values as (first term, second
    term), extending greedily; multiplicities are ignored since equal-value
    progressions carry no step.
    """
    if value_tol is None or sep_tol is None:
        vt, st = default_ap_tols(spectrum)
        value_tol = vt if value_tol is None else value_tol
        sep_tol = st if sep_tol is None else sep_tol
    if value_tol <= 0 or sep_tol <= 0:
        raise ValueError("tolerances must be positive")
    vals = distinct_values(spectrum, value_tol)
    if vals.size == 0:
        return APReport(0, None, None, value_tol, sep_tol)
    if vals.size == 1:
        return APReport(1, float(vals[0]), None, value_tol, sep_tol)
    cap = max_len if max_len is not None else vals.size
    best_len, best_a, best_b = 1, float(vals[0]), None
    for i in range(vals.size):
        for j in range(vals.size):
            if i == j:
                continue
            b = float(vals[j] - vals[i])
            if abs(b) <= sep_tol:
                continue
            length = 2
            nxt = vals[j] + b
            while length < cap and _contains(vals, nxt, value_tol):
                length += 1
                nxt += b
            if length > best_len:
                best_len, best_a, best_b = length, float(vals[i]), b
                if best_len >= cap:
                    return APReport(best_len, best_a, best_b, value_tol, sep_tol)
    return APReport(best_len, best_a, best_b, value_tol, sep_tol)


def ap_length_with_difference(spectrum, omega: float,
                              value_tol: float | None = None) -> int:
    """Longest arithmetic progression with fixed common difference ``omega``.

    Counts terms; a single value is a progression of length 1.  Used for the
    per-frequency gap comparison, where the relevant obstruction is a chain
    of eigenvalues spaced exactly ``omega`` apart.
    """
    if omega == 0:
        raise ValueError("common difference must be nonzero")
    if value_tol is None:
        value_tol, _ = default_ap_tols(spectrum)
    vals = distinct_values(spectrum, value_tol)
    best = 1 if vals.size else 0
    for v in vals:
        length = 1
        nxt = v + omega
        while _contains(vals, nxt, value_tol):
            length += 1
            nxt += omega
        best = max(best, length)
    return best


def spectrum_to_json(spectrum) -> list:
    return [float(x) for x in np.asarray(spectrum, dtype=float)]


def spectrum_from_json(doc) -> np.ndarray:
    arr = np.asarray(doc, dtype=float)
    if arr.ndim != 1:
        raise ValueError("spectrum JSON must be a flat array of reals")
    return arr
