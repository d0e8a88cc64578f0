"""Independent reference implementations used to cross-check the package.

Everything here deliberately avoids the package's own algorithms: transition
probabilities come from expanding creation-operator polynomials term by term
(no permanents), and rotations come from explicit matrix exponentials.
"""
import math
from itertools import permutations

import numpy as np
import scipy.linalg


def haar_unitary(m: int, rng) -> np.ndarray:
    """QR-based Haar sample (R-diagonal phase fix)."""
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def euler_rotation_expm(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """R = Rz(alpha) Ry(beta) Rz(gamma) with halved generators, via expm."""
    sz = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
    sy = np.array([[0.0, -1j], [1j, 0.0]], dtype=complex)
    rz = lambda t: scipy.linalg.expm(-0.5j * t * sz)
    ry = lambda t: scipy.linalg.expm(-0.5j * t * sy)
    return rz(alpha) @ ry(beta) @ rz(gamma)


def polynomial_distribution(U: np.ndarray, source) -> dict:
    """Multi-photon output law by direct polynomial multiplication.

    The input state is a product of linear forms sum_j U[j, i] a_j, one per
    photon; multiplying them out and collecting monomials a_1^t1...a_m^tm
    gives output amplitudes coeff * sqrt(prod t!) / sqrt(prod s!).
    """
    m = U.shape[0]
    poly = {(0,) * m: 1.0 + 0.0j}
    for i, count in enumerate(source):
        for _ in range(count):
            nxt = {}
            for mono, coeff in poly.items():
                for j in range(m):
                    amp = U[j, i]
                    if amp == 0:
                        continue
                    key = list(mono)
                    key[j] += 1
                    key = tuple(key)
                    nxt[key] = nxt.get(key, 0.0 + 0.0j) + coeff * amp
            poly = nxt
    s_fact = 1.0
    for c in source:
        s_fact *= math.factorial(c)
    out = {}
    for mono, coeff in poly.items():
        t_fact = 1.0
        for c in mono:
            t_fact *= math.factorial(c)
        amp = coeff * math.sqrt(t_fact) / math.sqrt(s_fact)
        out[mono] = abs(amp) ** 2
    return out


def permanent_by_definition(A: np.ndarray) -> complex:
    """Textbook sum over permutations; exponential, for cross-checks only."""
    n = A.shape[0]
    total = 0.0 + 0.0j
    for perm in permutations(range(n)):
        term = 1.0 + 0.0j
        for i, j in enumerate(perm):
            term *= A[i, j]
        total += term
    return total


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
