"""Dense 4x4 operator algebra for the four-level system.

Levels are 1-indexed throughout: 1, 2 are the spin ground states, 3, 4 the
trion states.  All operators are plain complex numpy arrays; superoperator
helpers use column-stacking vectorization, vec(A X B) = (B^T kron A) vec(X).
"""

from __future__ import annotations

import numpy as np

DIM = 4
IDENT = np.eye(DIM, dtype=complex)


def s(i: int, j: int) -> np.ndarray:
    """Matrix unit |i><j| with 1-indexed levels (1 at row i, column j)."""
    if not (1 <= i <= DIM and 1 <= j <= DIM):
        raise ValueError(f"level indices must be in 1..{DIM}, got ({i}, {j})")
    m = np.zeros((DIM, DIM), dtype=complex)
    m[i - 1, j - 1] = 1.0
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermiticity_defect(a: np.ndarray) -> float:
    """Largest entry of |A - A^dagger|."""
    return float(np.abs(a - a.conj().T).max())


def trace_defect(rho: np.ndarray) -> float:
    """|Tr(rho) - 1|."""
    return float(abs(np.trace(rho) - 1.0))


def min_eigenvalue(rho: np.ndarray) -> float:
    """Smallest eigenvalue of the hermitized matrix."""
    return float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization (Fortran order), shape (16,)."""
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(DIM, DIM, order="F")


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """16x16 superoperator of rho -> -i [H, rho]."""
    return -1j * (np.kron(IDENT, h) - np.kron(h.T, IDENT))


def dissipator_superop(c: np.ndarray) -> np.ndarray:
    """16x16 superoperator of rho -> c rho c^+ - (1/2){c^+ c, rho}."""
    cdc = c.conj().T @ c
    return (
        np.kron(c.conj(), c)
        - 0.5 * np.kron(IDENT, cdc)
        - 0.5 * np.kron(cdc.T, IDENT)
    )
