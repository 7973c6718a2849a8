"""Shared helpers for the test suite: random operators and brute-force oracles."""

import numpy as np


def random_hermitian(rng, N):
    A = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
    return 0.5 * (A + A.conj().T)


def random_complex(rng, N):
    return rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))


def brute_force_3ap(values, value_tol, sep_tol):
    """Cubic-time check for a proper 3-term progression among distinct values."""
    values = np.asarray(values, dtype=float)
    n = values.size
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            b = values[j] - values[i]
            if abs(b) <= sep_tol:
                continue
            target = values[j] + b
            if np.any(np.abs(values - target) <= value_tol):
                return True
    return False


def trace_inequality_sum_oracle(A, B, f):
    """Expansion sum_{ij} sqrt(li lj) |u_i^+ A u_j - v_i^+ B v_j|^2 of the residual."""
    w, U = np.linalg.eigh(f @ f.conj().T)
    keep = w > 1e-12 * max(w.max(), 1e-300)
    lam = w[keep]
    Uk = U[:, keep]
    Vk = (f.conj().T @ Uk) / np.sqrt(lam)
    across = Uk.conj().T @ A @ Uk
    bcross = Vk.conj().T @ B @ Vk
    root = np.sqrt(lam)
    return float(np.sum(np.outer(root, root) * np.abs(across - bcross) ** 2))
