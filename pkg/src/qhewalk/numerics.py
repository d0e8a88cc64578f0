"""Complex linear algebra kernels: permanents, Hermitian eigensystems, polar projection.

Everything downstream (walk statistics, entropies, trace distances, device
re-unitarization) funnels through the routines in this module.
"""
from __future__ import annotations

from itertools import permutations
from typing import NamedTuple

import numpy as np

RYSER_MAX_DIM = 24
NAIVE_MAX_DIM = 8


class NumericsError(ValueError):
    """Base class for numeric contract violations."""


class DimensionError(NumericsError):
    """Input has the wrong shape for the requested operation."""


class ContractError(NumericsError):
    """Input violates a stated precondition (non-finite, non-Hermitian, ...)."""


class SingularMatrixError(NumericsError):
    """Matrix is singular where an invertible one is required."""


class HermitianEigen(NamedTuple):
    eigenvalues: np.ndarray   # real, ascending
    eigenvectors: np.ndarray  # unitary, columns are eigenvectors


def _as_square(matrix, name: str) -> np.ndarray:
    M = np.asarray(matrix, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ContractError(f"{name} contains non-finite entries")
    return M


def permanent(matrix) -> complex:
    """Matrix permanent via the Ryser formula with Gray-code subset updates.

    Cost is O(2^n * n): the running column-subset sums are updated by a
    single column add/subtract per Gray-code step. Practical up to n ~ 20;
    dimensions above RYSER_MAX_DIM are rejected.
    """
    M = _as_square(matrix, "matrix")
    n = M.shape[0]
    if n > RYSER_MAX_DIM:
        raise DimensionError(f"permanent limited to n <= {RYSER_MAX_DIM}, got {n}")
    if n == 0:
        return complex(1.0)
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    gray = 0
    size = 0
    for k in range(1, 1 << n):
        g = k ^ (k >> 1)
        flipped = g ^ gray
        j = flipped.bit_length() - 1
        if g & flipped:
            row_sums += M[:, j]
            size += 1
        else:
            row_sums -= M[:, j]
            size -= 1
        gray = g
        term = np.prod(row_sums)
        total += -term if (size & 1) else term
    return complex(total if (n & 1) == 0 else -total)


def permanent_naive(matrix) -> complex:
    """Permanent by direct O(n! * n) expansion over permutations.

    Independent reference implementation used to cross-check the Ryser path;
    kept deliberately dumb and capped at n <= 8.
    """
    M = _as_square(matrix, "matrix")
    n = M.shape[0]
    if n > NAIVE_MAX_DIM:
        raise DimensionError(f"naive permanent limited to n <= {NAIVE_MAX_DIM}, got {n}")
    if n == 0:
        return complex(1.0)
    rows = range(n)
    return complex(sum(np.prod([M[i, s[i]] for i in rows]) for s in permutations(rows)))


def hermitian_eig(H, tol: float = 1e-10) -> HermitianEigen:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Rejects inputs whose max elementwise asymmetry |H - H^dagger| exceeds tol.
    """
    M = _as_square(H, "H")
    asym = float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0
    if asym > tol:
        raise ContractError(f"matrix is not Hermitian: max asymmetry {asym:.3e} > {tol:.1e}")
    # symmetrize first so roundoff-scale asymmetry cannot leak into the solver
    w, V = np.linalg.eigh((M + M.conj().T) / 2.0)
    return HermitianEigen(w, V)


def unitarize(M) -> np.ndarray:
    """Closest unitary to M in Frobenius norm (the unitary polar factor).

    Computed as M (M^dagger M)^(-1/2) through the one Hermitian eigensolver
    used everywhere else. Singular input is rejected.
    """
    A = _as_square(M, "M")
    n = A.shape[0]
    if n == 0:
        return A.copy()
    U = A
    for _ in range(3):
        w, V = hermitian_eig(U.conj().T @ U, tol=np.inf)
        if w[-1] <= 0 or w[0] <= 1e-13 * w[-1]:
            raise SingularMatrixError("matrix is singular or numerically rank-deficient")
        U = U @ (V * (w ** -0.5)) @ V.conj().T
        defect = float(np.max(np.abs(U.conj().T @ U - np.eye(n))))
        if defect <= 1e-13:
            break
    return U
