"""Multi-photon walk engine and the end-to-end encrypted protocol.

The path unitary acts on spatial modes only and is polarization independent,
so walker (|H>) and dummy (|V>) photons evolve through the same U without
interfering with each other. Convention: U[j, i] is the amplitude from input
mode i to output mode j (column = input).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .numerics import ContractError, DimensionError, permanent
from .polarization import PolarizationKey, as_bits, encrypt, projection_probability

MAX_WALKERS = 6
SHOT_BATCHES = 16


class EncodingError(ValueError):
    """Occupation cannot be encoded in the one-photon-per-mode scheme."""


class DeviceFormatError(ValueError):
    """Device JSON payload is malformed."""


@dataclass(frozen=True)
class NoiseModel:
    """Two-parameter phenomenological noise.

    hom_visibility damps two-photon interference (cross terms between
    permanent contributions are scaled by V); higher_order_rate replaces a
    shot with a uniformly random occupation, modeling spurious multi-pair
    emission.
    """

    hom_visibility: float = 1.0
    higher_order_rate: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.hom_visibility <= 1.0):
            raise ValueError(f"hom_visibility must lie in [0, 1], got {self.hom_visibility}")
        if not (0.0 <= self.higher_order_rate <= 1.0):
            raise ValueError(f"higher_order_rate must lie in [0, 1], got {self.higher_order_rate}")


def as_occupation(counts) -> tuple[int, ...]:
    occ = tuple(int(c) for c in counts)
    if not occ or any(c < 0 for c in occ):
        raise EncodingError(f"occupation must be nonempty with counts >= 0: {counts!r}")
    return occ


def encode_input(occupation) -> str:
    """Dual-rail encoding: count 1 -> bit 0 (walker |H>), count 0 -> bit 1 (dummy |V>)."""
    occ = as_occupation(occupation)
    if any(c > 1 for c in occ):
        raise EncodingError(f"one photon per input mode required, got {occ}")
    return "".join("0" if c == 1 else "1" for c in occ)


def walker_pattern(plaintext) -> tuple[int, ...]:
    """Occupation of the walker (|H>) photons for a plaintext."""
    return tuple(1 if b == 0 else 0 for b in as_bits(plaintext))


def dummy_pattern(plaintext) -> tuple[int, ...]:
    """Occupation of the dummy (|V>) photons for a plaintext."""
    return tuple(1 if b == 1 else 0 for b in as_bits(plaintext))


def occupation_states(m: int, n: int) -> list[tuple[int, ...]]:
    """All length-m occupations with n photons, in lexicographic mode order."""
    states = []
    for modes in combinations_with_replacement(range(m), n):
        occ = [0] * m
        for j in modes:
            occ[j] += 1
        states.append(tuple(occ))
    return states


def _check_unitary(U, tol: float = 1e-8) -> np.ndarray:
    M = np.asarray(U, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"path unitary must be square, got shape {M.shape}")
    defect = float(np.max(np.abs(M.conj().T @ M - np.eye(M.shape[0]))))
    if defect > tol:
        raise ContractError(f"matrix is not unitary: max |U^t U - I| = {defect:.3e} > {tol:.1e}")
    return M


def _transition_submatrix(U: np.ndarray, source: tuple[int, ...], target: tuple[int, ...]) -> np.ndarray:
    cols = np.repeat(np.arange(len(source)), source)
    rows = np.repeat(np.arange(len(target)), target)
    return U[np.ix_(rows, cols)]


def _occupation_factorial(occ) -> float:
    out = 1.0
    for c in occ:
        out *= math.factorial(c)
    return out


def _distribution(U: np.ndarray, source: tuple[int, ...], interference: bool) -> dict[tuple[int, ...], float]:
    """Transition law P(source -> T) over all n-photon output multisets.

    interference=True gives the bosonic law |Per(U_ST)|^2/(s! t!); False gives
    the distinguishable-photon law Per(|U_ST|^2)/(s! t!), which is the same
    expression with the interference cross terms removed.
    """
    m = len(source)
    n = sum(source)
    s_fact = _occupation_factorial(source)
    absq = np.abs(U) ** 2
    probs = {}
    for target in occupation_states(m, n):
        sub = _transition_submatrix(U, source, target)
        if interference:
            p = abs(permanent(sub)) ** 2
        else:
            p = permanent(np.abs(sub) ** 2).real
        probs[target] = p / (s_fact * _occupation_factorial(target))
    total = sum(probs.values())
    if abs(total - 1.0) > 1e-9:
        raise ContractError(f"transition law failed to normalize: sum = {total!r}")
    return {t: p / total for t, p in probs.items()}


def output_distribution(U, input_occupation) -> dict[tuple[int, ...], float]:
    """Exact bosonic output distribution of n indistinguishable walkers."""
    source = as_occupation(input_occupation)
    M = _check_unitary(U)
    if len(source) != M.shape[0]:
        raise DimensionError(f"occupation length {len(source)} != mode count {M.shape[0]}")
    if sum(source) > MAX_WALKERS:
        raise ContractError(f"at most {MAX_WALKERS} photons supported, got {sum(source)}")
    return _distribution(M, source, interference=True)


def classical_output_distribution(U, input_occupation) -> dict[tuple[int, ...], float]:
    """Output distribution for fully distinguishable photons (no interference)."""
    source = as_occupation(input_occupation)
    M = _check_unitary(U)
    if len(source) != M.shape[0]:
        raise DimensionError(f"occupation length {len(source)} != mode count {M.shape[0]}")
    if sum(source) > MAX_WALKERS:
        raise ContractError(f"at most {MAX_WALKERS} photons supported, got {sum(source)}")
    return _distribution(M, source, interference=False)


def _visibility_blend(U, source, visibility: float) -> dict[tuple[int, ...], float]:
    quantum = output_distribution(U, source)
    if visibility >= 1.0:
        return quantum
    classical = classical_output_distribution(U, source)
    return {t: visibility * quantum[t] + (1.0 - visibility) * classical[t] for t in quantum}


def occupation_to_bits(occ: tuple[int, ...]) -> str:
    """Collision-free walker occupation -> logical bit-string (walker = bit 0)."""
    return "".join("0" if c == 1 else "1" for c in occ)


def protocol_distribution(U, plaintext, noise: NoiseModel | None = None) -> dict[tuple[int, ...], float]:
    """Exact law of the walker occupation recorded by run_protocol.

    Includes the modeled noise: visibility-blended interference plus the
    uniform spurious-shot admixture. With no noise this is plain
    output_distribution of the walker pattern.
    """
    bits = as_bits(plaintext)
    M = _check_unitary(U)
    if len(bits) != M.shape[0]:
        raise DimensionError(f"plaintext length {len(bits)} != mode count {M.shape[0]}")
    visibility = noise.hom_visibility if noise is not None else 1.0
    law = _visibility_blend(M, walker_pattern(bits), visibility)
    rate = noise.higher_order_rate if noise is not None else 0.0
    if rate > 0.0:
        k = len(law)
        law = {t: (1.0 - rate) * p + rate / k for t, p in law.items()}
    return law


@dataclass
class ProtocolResult:
    """Empirical tallies of one protocol run."""

    shots: int
    occupation_counts: dict[tuple[int, ...], int]
    collisions: int = 0
    bitstring_counts: dict[str, int] = field(default_factory=dict)

    def empirical_occupations(self) -> dict[tuple[int, ...], float]:
        return {occ: c / self.shots for occ, c in self.occupation_counts.items() if c}

    def empirical_bitstrings(self) -> dict[str, float]:
        """Post-selected collision-free view, renormalized."""
        kept = self.shots - self.collisions
        if kept == 0:
            return {}
        return {b: c / kept for b, c in self.bitstring_counts.items() if c}


def _sample_batch(rng, outcomes, cumulative, shots, noise):
    """Draw `shots` walker occupations; returns index counts per outcome."""
    u = rng.random(shots)
    idx = np.searchsorted(cumulative, u, side="right")
    if noise is not None and noise.higher_order_rate > 0.0:
        spurious = rng.random(shots) < noise.higher_order_rate
        k = int(spurious.sum())
        if k:
            idx[spurious] = rng.integers(0, len(outcomes), size=k)
    return np.bincount(idx, minlength=len(outcomes))


def run_protocol(U, plaintext, key: PolarizationKey, shots: int, random_source,
                 noise: NoiseModel | None = None, threads: int = 1) -> ProtocolResult:
    """Run the encrypted walk end to end and tally decoded outcomes.

    Each shot draws a walker output occupation and an independent dummy
    occupation; after decryption only the walker occupation is recorded.
    Occupations with a doubly-occupied mode go to the collision tally and are
    excluded from the logical bit-string view. Shots are split over
    SHOT_BATCHES child random streams so results do not depend on `threads`.
    """
    bits = as_bits(plaintext)
    M = _check_unitary(U)
    if len(bits) != M.shape[0]:
        raise DimensionError(f"plaintext length {len(bits)} != mode count {M.shape[0]}")
    if shots < 1:
        raise ValueError("shots must be >= 1")

    # encryption/decryption faithfulness: the key basis must recover each bit
    for bit, state in zip(bits, encrypt(bits, key)):
        p0 = projection_probability(state, key)
        if abs(p0 - (1.0 - bit)) > 1e-9:
            raise ContractError("key failed to decrypt its own encryption")

    visibility = noise.hom_visibility if noise is not None else 1.0
    walker_law = _visibility_blend(M, walker_pattern(bits), visibility)
    outcomes = list(walker_law)
    cumulative = np.cumsum([walker_law[t] for t in outcomes])
    cumulative[-1] = 1.0

    dummies = dummy_pattern(bits)
    dummy_cumulative = None
    dummy_outcomes = None
    if sum(dummies) > 0:
        dummy_law = _visibility_blend(M, dummies, visibility)
        dummy_outcomes = list(dummy_law)
        dummy_cumulative = np.cumsum([dummy_law[t] for t in dummy_outcomes])
        dummy_cumulative[-1] = 1.0

    batches = min(SHOT_BATCHES, shots)
    sizes = [shots // batches + (1 if b < shots % batches else 0) for b in range(batches)]
    streams = random_source.spawn(batches)

    def one_batch(args):
        rng, size = args
        counts = _sample_batch(rng, outcomes, cumulative, size, noise)
        if dummy_cumulative is not None:
            # dummies propagate through the same device; sampled, then discarded
            _sample_batch(rng, dummy_outcomes, dummy_cumulative, size, noise)
        return counts

    jobs = list(zip(streams, sizes))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batch_counts = list(pool.map(one_batch, jobs))
    else:
        batch_counts = [one_batch(j) for j in jobs]
    totals = np.sum(batch_counts, axis=0)

    result = ProtocolResult(shots=shots, occupation_counts={}, collisions=0)
    for occ, c in zip(outcomes, totals):
        c = int(c)
        if c == 0:
            continue
        result.occupation_counts[occ] = c
        if any(v > 1 for v in occ):
            result.collisions += c
        else:
            b = occupation_to_bits(occ)
            result.bitstring_counts[b] = result.bitstring_counts.get(b, 0) + c
    return result


def bhattacharyya_fidelity(p: dict, q: dict) -> float:
    """Classical fidelity sum_i sqrt(p_i q_i) over the union of outcomes."""
    # sorted union: summation order must not depend on hash randomization
    keys = sorted(set(p) | set(q))
    f = sum(math.sqrt(max(p.get(k, 0.0), 0.0) * max(q.get(k, 0.0), 0.0)) for k in keys)
    return float(min(1.0, f))


# ------------------------------------------------------------------ devices

def unitary_to_payload(U, m: int | None = None) -> dict:
    """Serialize a mode unitary to the device-file JSON structure."""
    M = np.asarray(U, dtype=complex)
    return {
        "m": int(m if m is not None else M.shape[0]),
        "unitary": [[[float(z.real), float(z.imag)] for z in row] for row in M],
    }


def unitary_from_payload(payload) -> np.ndarray:
    """Parse and validate the device-file JSON structure (row = output mode)."""
    if not isinstance(payload, dict) or "m" not in payload or "unitary" not in payload:
        raise DeviceFormatError("device payload must be an object with 'm' and 'unitary'")
    m = payload["m"]
    rows = payload["unitary"]
    if not isinstance(m, int) or m < 1:
        raise DeviceFormatError(f"'m' must be a positive integer, got {m!r}")
    if not isinstance(rows, list) or len(rows) != m:
        raise DeviceFormatError(f"'unitary' must be a list of {m} rows")
    out = np.zeros((m, m), dtype=complex)
    for j, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != m:
            raise DeviceFormatError(f"row {j} must have {m} entries")
        for i, cell in enumerate(row):
            if (not isinstance(cell, list) or len(cell) != 2
                    or not all(isinstance(v, (int, float)) for v in cell)):
                raise DeviceFormatError(f"entry ({j},{i}) must be [re, im]")
            out[j, i] = complex(cell[0], cell[1])
    if not np.all(np.isfinite(out)):
        raise DeviceFormatError("device entries must be finite")
    return out
