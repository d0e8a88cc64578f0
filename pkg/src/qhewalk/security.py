"""Adversary-side analysis of the encrypted walk.

Everything here takes the eavesdropper's point of view: the mixed state he
sees when the key is unknown, how many plaintext bits that state hides
(Holevo quantity), how well plaintexts can be told apart (trace distance),
and the success probability of the measure-in-a-random-basis attack.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .numerics import ContractError, DimensionError, hermitian_eig
from .polarization import as_bits, rotation_matrices

MAX_QUBITS = 8
_KEY_CHUNK = 65536


class ResourceError(ValueError):
    """Requested computation exceeds the supported problem size."""


@dataclass(frozen=True)
class KeyEnsemble:
    """Discrete set of encryption keys the adversary averages over.

    kind "linear": d rotations by k*pi/d in the H/V plane.
    kind "poincare": a (d1, d2, d3) Euler-angle grid covering the full sphere
    uniformly (the polar coordinate is sampled uniformly in cos(beta)).
    """

    kind: str
    dims: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in ("linear", "poincare"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        want = 1 if self.kind == "linear" else 3
        if len(self.dims) != want:
            raise ValueError(f"{self.kind} ensemble takes {want} grid size(s), got {self.dims}")
        if any(int(d) != d or d < 1 for d in self.dims):
            raise ValueError(f"grid sizes must be integers >= 1, got {self.dims}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def label(self) -> str:
        return f"{self.kind}:{','.join(str(d) for d in self.dims)}"


def linear_ensemble(d: int) -> KeyEnsemble:
    return KeyEnsemble("linear", (d,))


def poincare_ensemble(d1: int, d2: int, d3: int) -> KeyEnsemble:
    return KeyEnsemble("poincare", (d1, d2, d3))


def parse_ensemble(text: str) -> KeyEnsemble:
    """Parse "linear:180" or "poincare:64,64,64"."""
    kind, sep, rest = text.partition(":")
    if not sep:
        raise ValueError(f"ensemble must look like 'linear:<d>' or 'poincare:<d1>,<d2>,<d3>', got {text!r}")
    try:
        dims = tuple(int(p) for p in rest.split(","))
    except ValueError:
        raise ValueError(f"ensemble grid sizes must be integers: {text!r}") from None
    return KeyEnsemble(kind, dims)


def ensemble_rotations(ensemble: KeyEnsemble) -> np.ndarray:
    """All key rotations in the ensemble, shape (size, 2, 2)."""
    if ensemble.kind == "linear":
        d = ensemble.dims[0]
        theta = np.arange(d) * (np.pi / d)
        c, s = np.cos(theta), np.sin(theta)
        out = np.zeros((d, 2, 2), dtype=complex)
        out[:, 0, 0] = c
        out[:, 0, 1] = -s
        out[:, 1, 0] = s
        out[:, 1, 1] = c
        return out
    d1, d2, d3 = ensemble.dims
    k1, k2, k3 = np.meshgrid(np.arange(d1), np.arange(d2), np.arange(d3), indexing="ij")
    alpha = 2.0 * np.pi * k1 / d1
    gamma = 2.0 * np.pi * k3 / d3
    # uniform in cos(beta): d2 = 1 degenerates to the pole
    xi = k2 / (d2 - 1) if d2 > 1 else np.zeros_like(k2, dtype=float)
    beta = 2.0 * np.arcsin(np.sqrt(xi))
    return rotation_matrices(alpha, beta, gamma).reshape(-1, 2, 2)


def encrypted_density(x, ensemble: KeyEnsemble) -> np.ndarray:
    """Mixed state of the encrypted plaintext x, averaged over the key ensemble.

    rho_x = (1/N) sum_k (x) R_k |P_x> <P_x| R_k^t, a 2^m x 2^m Hermitian
    unit-trace matrix. Memory stays bounded by streaming the keys in chunks.
    """
    bits = as_bits(x)
    m = len(bits)
    if m > MAX_QUBITS:
        raise ResourceError(f"density matrix would be {2 ** m} dimensional; m <= {MAX_QUBITS} supported")
    rots = ensemble_rotations(ensemble)
    total = rots.shape[0]
    dim = 2 ** m
    rho = np.zeros((dim, dim), dtype=complex)
    # chunk keeps the streamed product-state block under ~64 MB at any m
    step = min(_KEY_CHUNK, max(1024, (1 << 22) // dim))
    for start in range(0, total, step):
        chunk = rots[start:start + step]
        nc = chunk.shape[0]
        psi = np.ones((nc, 1), dtype=complex)
        for b in bits:
            col = chunk[:, :, b]  # bit 0 encrypts |H>, bit 1 encrypts |V>
            psi = (psi[:, :, None] * col[:, None, :]).reshape(nc, -1)
        rho += psi.T @ psi.conj()
    rho /= total
    return 0.5 * (rho + rho.conj().T)


def von_neumann_entropy(rho: np.ndarray, tol: float = 1e-10) -> float:
    """S(rho) = -Tr(rho log2 rho) in bits; roundoff-negative eigenvalues clamp to 0."""
    eig = hermitian_eig(rho, tol=tol)
    lam = eig.eigenvalues
    if lam[0] < -tol:
        raise ContractError(f"matrix is not positive semidefinite: min eigenvalue {lam[0]:.3e}")
    trace = float(lam.sum())
    if abs(trace - 1.0) > max(tol, 1e-10):
        raise ContractError(f"trace must be 1, got {trace!r}")
    lam = np.clip(lam, 0.0, None)
    lam = lam[lam > 0.0]
    return float(-(lam * np.log2(lam)).sum())


def holevo(m: int, ensemble: KeyEnsemble, explicit: bool = False) -> float:
    """Holevo quantity of the uniform plaintext source under the key ensemble.

    Fast path uses chi = m - S(rho_0): the key-averaged mixture over all
    plaintexts is maximally mixed, and every rho_x has the entropy of rho_0
    for key sets closed under the plaintext flip. explicit=True evaluates
    S(mean_x rho_x) - mean_x S(rho_x) from all 2^m density matrices instead;
    for linear ensembles the two agree to roundoff.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > MAX_QUBITS:
        raise ResourceError(f"m <= {MAX_QUBITS} supported")
    if not explicit:
        return m - von_neumann_entropy(encrypted_density("0" * m, ensemble))
    dim = 2 ** m
    mean = np.zeros((dim, dim), dtype=complex)
    entropies = []
    for idx in range(dim):
        x = format(idx, f"0{m}b")
        rho = encrypted_density(x, ensemble)
        mean += rho
        entropies.append(von_neumann_entropy(rho))
    mean /= dim
    return von_neumann_entropy(mean) - float(np.mean(entropies))


def holevo_poincare_limit(m) -> float:
    """Accessible bits for full-sphere keys in the dense-grid limit: m - log2(m+1)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return float(m - math.log2(m + 1))


def hidden_bits_linear_asymptotic(m) -> float:
    """Large-m entropy of the encrypted all-zero string under linear keys: 1/2 log2(pi e m / 2)."""
    if m <= 0:
        raise ValueError("m must be positive")
    return 0.5 * math.log2(math.pi * math.e * m / 2.0)


def attack_success(m: int, d: int) -> float:
    """Exact success probability of the random-basis attack: (1/d) sum_j cos^2m(j pi/d).

    Evaluated through the binomial expansion of cos^2m, which collapses the
    angle sum to the Fourier modes divisible by d; exact in integer
    arithmetic for any m, so huge m loses no precision.
    """
    if m < 1 or d < 1:
        raise ValueError("m and d must be >= 1")
    num = sum(math.comb(2 * m, m + l) for l in range(-m, m + 1) if l % d == 0)
    return float(Fraction(num, 4 ** m))


def attack_asymptote(m) -> float:
    """Large-m limit of attack_success: 1/sqrt(pi m)."""
    if m <= 0:
        raise ValueError("m must be positive")
    return 1.0 / math.sqrt(math.pi * m)


def simulate_attack(m: int, d: int, plaintext, trials: int, random_source) -> float:
    """Monte Carlo of the attack: measure every encrypted qubit in the {H, V} basis.

    Per trial a key is drawn from linear(d); success means the full decoded
    bit-string equals the plaintext. For a linear key with angle theta each
    measured bit matches its plaintext bit with probability cos^2(theta),
    whichever value the bit has, so one uniform draw decides each qubit.
    """
    bits = as_bits(plaintext)
    if len(bits) != m:
        raise DimensionError(f"plaintext length {len(bits)} != m = {m}")
    if d < 1:
        raise ValueError("d must be >= 1")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    wins = 0
    left = trials
    while left > 0:
        n = min(left, _KEY_CHUNK)
        theta = random_source.integers(0, d, size=n) * (np.pi / d)
        match_prob = np.cos(theta) ** 2
        u = random_source.random((n, m))
        wins += int(np.all(u < match_prob[:, None], axis=1).sum())
        left -= n
    return wins / trials


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """T(rho, sigma) = 1/2 sum |eigenvalues(rho - sigma)|."""
    a = np.asarray(rho, dtype=complex)
    b = np.asarray(sigma, dtype=complex)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    eig = hermitian_eig(a - b)
    return float(0.5 * np.abs(eig.eigenvalues).sum())


def qudit_hidden_info(a: int, m: int) -> float:
    """Hidden bits when each photon carries an a-level mode instead of polarization."""
    if m < 1 or a < m:
        raise ValueError("need a >= m >= 1")
    return float(m * math.log2(a / m) + m / math.log(2))


def implied_mutual_information(p: float, m: int) -> float:
    """Bits/trial a guess-the-string channel with success probability p conveys.

    Models the attack as a symmetric channel: correct string with probability
    p, any of the other 2^m - 1 uniformly otherwise. I = m - H(error pattern).
    """
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p must be a probability, got {p}")
    if m < 1:
        raise ValueError("m must be >= 1")
    out = float(m)
    if p > 0.0:
        out += p * math.log2(p)
    if p < 1.0:
        out += (1.0 - p) * math.log2((1.0 - p) / (2 ** m - 1))
    return out


def symmetric_basis(m: int) -> np.ndarray:
    """Rows are the m+1 symmetrized basis states |a_V>, ordered by V-count a.

    |a_V> is the normalized equal-amplitude superposition of all m-bit
    computational states with exactly a ones; shape (m+1, 2^m).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    out = np.zeros((m + 1, 2 ** m))
    for idx in range(2 ** m):
        a = bin(idx).count("1")
        out[a, idx] = 1.0
    return out / np.sqrt(out.sum(axis=1, keepdims=True))
