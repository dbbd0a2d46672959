"""Haar-distributed unitaries from seeded Ginibre matrices."""

from __future__ import annotations

import numpy as np

from shotwise.probdist import MAX_QUBITS
from shotwise.rng import make_rng


def ginibre(dim: int, seed: int) -> np.ndarray:
    """Matrix of i.i.d. standard complex normals (unit variance per entry)."""
    rng = make_rng(seed)
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return z / np.sqrt(2.0)


def gram_schmidt(a: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of ``a`` by modified Gram-Schmidt.

    Each column is swept twice against the previous ones to keep the loss of
    orthogonality at round-off level. The implied R factor has a real positive
    diagonal (the column norms), which is the phase convention that makes the
    result Haar distributed when ``a`` is Ginibre.
    """
    q = np.array(a, dtype=complex)
    dim = q.shape[1]
    for j in range(dim):
        v = q[:, j]
        for _ in range(2):
            for k in range(j):
                v = v - np.vdot(q[:, k], v) * q[:, k]
        norm = np.linalg.norm(v)
        if norm == 0:
            raise np.linalg.LinAlgError("rank-deficient input")
        q[:, j] = v / norm
    return q


def haar_random_unitary(num_qubits: int, seed: int) -> np.ndarray:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}]")
    dim = 1 << num_qubits
    return gram_schmidt(ginibre(dim, seed))


def unitarity_error(u: np.ndarray) -> float:
    """Max absolute entry of ``U^dagger U - I``."""
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
