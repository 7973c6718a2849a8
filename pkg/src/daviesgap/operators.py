"""Hamiltonian and jump-operator constructors.

Dense matrices only. Tensor ordering convention: site 1 is the most
significant qubit, i.e. the first letter of a Pauli string is the leftmost
Kronecker factor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import DimensionError, IdentityFieldWarning

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

HERMITICITY_RTOL = 1e-12


def require_hermitian(H: np.ndarray, name: str = "operator") -> np.ndarray:
    """Validate that ``H`` is a finite Hermitian square matrix and return it as complex."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValueError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.abs(H).max())) if H.size else 1.0
    dev = float(np.abs(H - H.conj().T).max()) if H.size else 0.0
    if dev > HERMITICITY_RTOL * scale:
        raise ValueError(f"{name} is not Hermitian (deviation {dev:.3e}, scale {scale:.3e})")
    return H


def pauli_string_matrix(s: str) -> np.ndarray:
    """Dense 2^n x 2^n realization of a Pauli string such as ``"XIZ"``."""
    if not s:
        raise ValueError("empty Pauli string")
    bad = set(s) - set("IXYZ")
    if bad:
        raise ValueError(f"invalid Pauli letters {sorted(bad)} in {s!r}")
    return reduce(np.kron, (PAULI[c] for c in s))


def site_operator(letter: str, i: int, n: int) -> np.ndarray:
    """Single-site operator ``letter`` acting on qubit ``i`` (1-based) of ``n`` qubits."""
    if not 1 <= i <= n:
        raise DimensionError(f"site {i} out of range for n={n}")
    s = ["I"] * n
    s[i - 1] = letter
    return pauli_string_matrix("".join(s))


def embed_single_site(P: np.ndarray, i: int, n: int) -> np.ndarray:
    """Embed a 2x2 operator on qubit ``i`` of ``n`` qubits."""
    P = np.asarray(P, dtype=complex)
    if P.shape != (2, 2):
        raise DimensionError(f"single-site operator must be 2x2, got {P.shape}")
    mats = [np.eye(2, dtype=complex)] * n
    mats[i - 1] = P
    return reduce(np.kron, mats)


def build_pauli_hamiltonian(terms, n: int | None = None) -> np.ndarray:
    """Sum of weighted Pauli strings, ``sum_k c_k * string_k``.

    All strings must share the same length; coefficients must be real and
    finite.  An empty term list needs an explicit ``n`` and yields the zero
    matrix.
    """
    terms = list(terms)
    if not terms:
        if n is None:
            raise ValueError("empty term list requires explicit qubit count n")
        return np.zeros((2**n, 2**n), dtype=complex)
    lengths = {len(s) for _, s in terms}
    if len(lengths) != 1:
        raise DimensionError(f"Pauli strings of mixed lengths {sorted(lengths)}")
    m = lengths.pop()
    if n is not None and n != m:
        raise DimensionError(f"strings have length {m} but n={n} was given")
    H = np.zeros((2**m, 2**m), dtype=complex)
    for c, s in terms:
        c = complex(c)
        if not np.isfinite(c) or abs(c.imag) > 0:
            raise ValueError(f"coefficient {c} is not a finite real number")
        H += c.real * pauli_string_matrix(s)
    return H


def build_field_perturbation(H0: np.ndarray, P: np.ndarray, h) -> np.ndarray:
    """``H0 + sum_i h_i P_i`` with ``P`` embedded on each site.

    Warns (rather than fails) when ``P`` is a scalar multiple of the identity,
    since the operator itself is still well defined.
    """
    H0 = require_hermitian(H0, "H0")
    P = require_hermitian(np.asarray(P), "P")
    if P.shape != (2, 2):
        raise DimensionError(f"field operator must be 2x2, got {P.shape}")
    h = np.asarray(h, dtype=float)
    if h.ndim != 1:
        raise DimensionError("field vector h must be one-dimensional")
    n = h.size
    if H0.shape[0] != 2**n:
        raise DimensionError(f"dim(H0)={H0.shape[0]} does not match 2^len(h)={2**n}")
    offdiag = P - np.trace(P) / 2 * np.eye(2)
    if np.abs(offdiag).max() <= 1e-12 * max(1.0, float(np.abs(P).max())):
        warnings.warn(
            "field operator is a multiple of the identity; the perturbation "
            "commutes with everything",
            IdentityFieldWarning,
            stacklevel=2,
        )
    H = H0.copy()
    for i in range(1, n + 1):
        H += h[i - 1] * embed_single_site(P, i, n)
    return H


def build_xyz_ring(J: float, h: float, n: int) -> np.ndarray:
    """Periodic ring ``J sum_i X_i Y_{i+1} + h sum_i Z_i`` with ``Y_{n+1} = Y_1``."""
    if n < 2:
        raise ValueError(f"ring needs n >= 2 sites, got {n}")
    H = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(1, n + 1):
        j = i + 1 if i < n else 1
        H += J * (site_operator("X", i, n) @ site_operator("Y", j, n))
        H += h * site_operator("Z", i, n)
    return H


def xyz_ring_spectrum(J: float, h: float, n: int) -> np.ndarray:
    """Closed-form spectrum of :func:`build_xyz_ring` for odd ring sizes.

    With the field normalized to 1 the eigenvalues are
    ``sum_k z_k m_k`` over sign vectors ``z``, where
    ``m_k = J' mu_k - sqrt(J'^2 mu_k^2 + 1)`` and ``mu_k = sin(2 pi k / n)``;
    a general nonzero field rescales via ``H(J, h) = h * H(J/h, 1)``.

    The product formula holds only for odd ``n``; periodic boundary terms
    split even rings into parity sectors it does not resolve.
    """
    if n < 2:
        raise ValueError(f"ring needs n >= 2 sites, got {n}")
    if n % 2 == 0:
        raise ValueError(
            f"closed-form ring spectrum is only valid for odd n, got {n}; "
            "use a dense eigendecomposition of build_xyz_ring instead"
        )
    if h == 0:
        raise ValueError(
            "closed form is normalized by the field and does not support h=0; "
            "use a dense eigendecomposition of build_xyz_ring instead"
        )
    Jp = J / h
    k = np.arange(1, n + 1)
    mu = np.sin(2 * np.pi * k / n)
    m = Jp * mu - np.sqrt(Jp**2 * mu**2 + 1.0)
    signs = ((np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1) * 2 - 1
    return np.sort(signs @ (h * m))


# ---------------------------------------------------------------------------
# JSON model specifications
# ---------------------------------------------------------------------------

MODEL_KINDS = ("pauli-sum", "dense", "field-perturbed", "xyz-ring")

_ALLOWED_KEYS = {
    "pauli-sum": {"kind", "n", "terms"},
    "dense": {"kind", "n", "matrix"},
    "field-perturbed": {"kind", "n", "terms", "field"},
    "xyz-ring": {"kind", "n", "xyz"},
}


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of a Hamiltonian, parsed from JSON."""

    kind: str
    n: int
    terms: tuple = ()
    field_p: str | None = None
    field_h: tuple = ()
    xyz_j: float = 0.0
    xyz_h: float = 0.0
    matrix: np.ndarray | None = field(default=None, compare=False)


def parse_model(doc: dict) -> ModelSpec:
    """Parse a model document, rejecting unknown fields."""
    if not isinstance(doc, dict):
        raise ValueError("model spec must be a JSON object")
    kind = doc.get("kind")
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    unknown = set(doc) - _ALLOWED_KEYS[kind]
    if unknown:
        raise ValueError(f"unknown fields {sorted(unknown)} for model kind {kind!r}")
    n = doc.get("n")
    if not isinstance(n, int) or n < 1:
        raise ValueError("model spec needs a positive integer 'n'")
    if kind == "xyz-ring" and n < 2:
        raise ValueError("xyz-ring needs n >= 2")

    terms = tuple((float(c), str(s)) for c, s in doc.get("terms", []))
    for c, s in terms:
        if not np.isfinite(c):
            raise ValueError(f"non-finite coefficient {c} in model terms")
        if len(s) != n:
            raise DimensionError(f"term {s!r} has length {len(s)}, expected {n}")

    field_p, field_h = None, ()
    if kind == "field-perturbed":
        fdoc = doc.get("field")
        if not isinstance(fdoc, dict) or set(fdoc) != {"P", "h"}:
            raise ValueError("field-perturbed model needs field: {'P': ..., 'h': [...]}")
        field_p = str(fdoc["P"])
        if field_p not in ("X", "Y", "Z"):
            raise ValueError(f"field operator must be X, Y or Z, got {field_p!r}")
        field_h = tuple(float(x) for x in fdoc["h"])
        if len(field_h) != n:
            raise DimensionError(f"field vector has length {len(field_h)}, expected {n}")

    xyz_j = xyz_h = 0.0
    if kind == "xyz-ring":
        xdoc = doc.get("xyz")
        if not isinstance(xdoc, dict) or set(xdoc) != {"J", "h"}:
            raise ValueError("xyz-ring model needs xyz: {'J': ..., 'h': ...}")
        xyz_j, xyz_h = float(xdoc["J"]), float(xdoc["h"])

    matrix = None
    if kind == "dense":
        if "matrix" not in doc:
            raise ValueError("dense model needs a 'matrix' field of [re, im] entry pairs")
        matrix = complex_matrix_from_json(doc["matrix"])
        if matrix.shape != (2**n, 2**n):
            raise DimensionError(f"dense matrix shape {matrix.shape} != 2^n for n={n}")

    return ModelSpec(kind=kind, n=n, terms=terms, field_p=field_p, field_h=field_h,
                     xyz_j=xyz_j, xyz_h=xyz_h, matrix=matrix)


def build_model(spec: ModelSpec) -> np.ndarray:
    """Materialize the dense Hamiltonian described by ``spec``."""
    if spec.kind == "pauli-sum":
        return build_pauli_hamiltonian(spec.terms, n=spec.n)
    if spec.kind == "dense":
        return require_hermitian(spec.matrix, "dense model matrix")
    if spec.kind == "field-perturbed":
        H0 = build_pauli_hamiltonian(spec.terms, n=spec.n)
        return build_field_perturbation(H0, PAULI[spec.field_p], np.array(spec.field_h))
    if spec.kind == "xyz-ring":
        return build_xyz_ring(spec.xyz_j, spec.xyz_h, spec.n)
    raise ValueError(f"unknown model kind {spec.kind!r}")


def complex_matrix_from_json(entries) -> np.ndarray:
    """Decode a nested list of ``[re, im]`` pairs into a complex matrix."""
    arr = np.asarray(entries, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("complex matrix must be a square nested list of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def complex_matrix_to_json(M: np.ndarray) -> list:
    """Inverse of :func:`complex_matrix_from_json`."""
    M = np.asarray(M, dtype=complex)
    return np.stack([M.real, M.imag], axis=-1).tolist()
