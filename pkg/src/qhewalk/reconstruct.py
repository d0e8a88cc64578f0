"""Device characterization from single-photon and two-photon data.

Workflow: probe each input mode with one photon (intensities |U_ji|^2), then
each input pair with photon pairs and record the two-photon interference
visibility V = (C_max - C_min)/C_max per output pair. Amplitudes follow from
the intensities; the visibilities pin down the interferometer's internal
phases up to a diagonal-phase gauge on inputs and outputs, recovered here by
multi-start least squares.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import least_squares

from .numerics import ContractError, DimensionError, unitarize

MAX_MODES = 8
_ZERO_COINCIDENCE = 1e-14

Pair = tuple[int, int]


class MeasurementFormatError(ValueError):
    """Measurement-set payload is malformed."""


@dataclass(frozen=True)
class MeasurementNoise:
    """counts_scale: expected detections per setting (Poisson counting noise);
    distinguishability: spectral overlap factor damping all visibilities."""

    counts_scale: float | None = None
    distinguishability: float = 1.0

    def __post_init__(self):
        if self.counts_scale is not None and not self.counts_scale > 0:
            raise ValueError(f"counts_scale must be positive, got {self.counts_scale}")
        if not (0.0 <= self.distinguishability <= 1.0):
            raise ValueError(f"distinguishability must lie in [0, 1], got {self.distinguishability}")


@dataclass(frozen=True)
class MeasurementSet:
    """Single-photon intensities plus pairwise visibilities of one device.

    visibilities is keyed by ((i, i2), (j, j2)): photons into modes i < i2,
    coincidence across output modes j < j2. counts_scale records the Poisson
    scale the data was taken at (None = noiseless).
    """

    intensities: np.ndarray
    visibilities: dict[tuple[Pair, Pair], float]
    counts_scale: float | None = None

    def __post_init__(self):
        I = np.asarray(self.intensities, dtype=float)
        if I.ndim != 2 or I.shape[0] != I.shape[1]:
            raise DimensionError(f"intensities must be square, got shape {I.shape}")
        if np.any(I < -1e-9) or np.any(I > 1.0 + 1e-6):
            raise ValueError("intensities must lie in [0, 1]")
        object.__setattr__(self, "intensities", I)
        m = I.shape[0]
        for (i, i2), (j, j2) in self.visibilities:
            if not (0 <= i < i2 < m and 0 <= j < j2 < m):
                raise ValueError(f"bad visibility key (({i},{i2}),({j},{j2})) for m={m}")
        if any(abs(v) > 1.0 + 1e-9 for v in self.visibilities.values()):
            raise ValueError("visibilities must lie in [-1, 1]")

    @property
    def mode_count(self) -> int:
        return self.intensities.shape[0]

    def to_payload(self) -> dict:
        return {
            "m": self.mode_count,
            "counts_scale": self.counts_scale,
            "intensities": [[float(v) for v in row] for row in self.intensities],
            "visibilities": [
                {"inputs": [i, i2], "outputs": [j, j2], "value": float(v)}
                for ((i, i2), (j, j2)), v in sorted(self.visibilities.items())
            ],
        }

    @classmethod
    def from_payload(cls, payload) -> "MeasurementSet":
        if not isinstance(payload, dict):
            raise MeasurementFormatError("measurement payload must be an object")
        try:
            m = int(payload["m"])
            raw_int = payload["intensities"]
            raw_vis = payload["visibilities"]
        except (KeyError, TypeError, ValueError) as exc:
            raise MeasurementFormatError(f"missing or invalid field: {exc}") from None
        I = np.asarray(raw_int, dtype=float)
        if I.shape != (m, m):
            raise MeasurementFormatError(f"intensities must be {m}x{m}")
        vis = {}
        for rec in raw_vis:
            try:
                i, i2 = (int(v) for v in rec["inputs"])
                j, j2 = (int(v) for v in rec["outputs"])
                vis[((i, i2), (j, j2))] = float(rec["value"])
            except (KeyError, TypeError, ValueError):
                raise MeasurementFormatError(f"bad visibility record: {rec!r}") from None
        scale = payload.get("counts_scale")
        return cls(I, vis, None if scale is None else float(scale))


@dataclass(frozen=True)
class GaugeFixedUnitary:
    """Unitary with first row and first column real non-negative."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionError(f"matrix must be square, got shape {M.shape}")
        defect = float(np.max(np.abs(M.conj().T @ M - np.eye(M.shape[0]))))
        if defect > 1e-8:
            raise ContractError(f"matrix is not unitary: defect {defect:.3e}")
        edge = np.concatenate([M[0, :], M[:, 0]])
        if np.max(np.abs(edge.imag)) > 1e-8 or np.min(edge.real) < -1e-8:
            raise ContractError("first row/column must be real non-negative")
        object.__setattr__(self, "matrix", M)


@dataclass
class ReconstructionReport:
    success: bool
    unitary: GaugeFixedUnitary
    residual: float
    threshold: float
    restarts_used: int


def all_pairs(m: int) -> list[tuple[Pair, Pair]]:
    """Every (input pair, output pair) combination, sorted."""
    return [(ins, outs) for ins in combinations(range(m), 2) for outs in combinations(range(m), 2)]


def _require_unitary(U, tol: float = 1e-8) -> np.ndarray:
    M = np.asarray(U, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    defect = float(np.max(np.abs(M.conj().T @ M - np.eye(M.shape[0]))))
    if defect > tol:
        raise ContractError(f"matrix is not unitary: defect {defect:.3e}")
    return M


def _pair_indices(pairs):
    pi = np.array([p[0][0] for p in pairs])
    pi2 = np.array([p[0][1] for p in pairs])
    pj = np.array([p[1][0] for p in pairs])
    pj2 = np.array([p[1][1] for p in pairs])
    return pi, pi2, pj, pj2


def _coincidences(M, pi, pi2, pj, pj2):
    """Interfering (C_min) and distinguishable (C_max) pair coincidences."""
    cmin = np.abs(M[pj, pi] * M[pj2, pi2] + M[pj2, pi] * M[pj, pi2]) ** 2
    A2 = np.abs(M) ** 2
    cmax = A2[pj, pi] * A2[pj2, pi2] + A2[pj2, pi] * A2[pj, pi2]
    return cmin, cmax


def _visibility_vector(M, pi, pi2, pj, pj2):
    cmin, cmax = _coincidences(M, pi, pi2, pj, pj2)
    v = np.zeros(len(pi))
    ok = cmax > _ZERO_COINCIDENCE
    v[ok] = (cmax[ok] - cmin[ok]) / cmax[ok]
    return v


def synthesize_measurements(U, noise: MeasurementNoise | None = None,
                            random_source=None) -> MeasurementSet:
    """Simulate the full characterization run against a known unitary.

    Noiseless output is exact. With noise, intensities and both coincidence
    rates per pair are replaced by Poisson draws at counts_scale, and partial
    distinguishability pulls C_min toward the non-interfering C_max before
    counting.
    """
    M = _require_unitary(U)
    m = M.shape[0]
    pairs = all_pairs(m)
    pi, pi2, pj, pj2 = _pair_indices(pairs)
    intensities = np.abs(M) ** 2
    cmin, cmax = _coincidences(M, pi, pi2, pj, pj2)
    if noise is not None:
        cmin = cmax - noise.distinguishability * (cmax - cmin)
    if noise is not None and noise.counts_scale is not None:
        if random_source is None:
            raise ValueError("counting noise requires a random_source")
        scale = noise.counts_scale
        intensities = random_source.poisson(intensities * scale) / scale
        nmax = random_source.poisson(cmax * scale).astype(float)
        nmin = random_source.poisson(cmin * scale).astype(float)
        vis = np.where(nmax > 0, (nmax - nmin) / np.maximum(nmax, 1.0), 0.0)
        vis = np.clip(vis, -1.0, 1.0)
        intensities = np.clip(intensities, 0.0, 1.0)
    else:
        vis = np.zeros(len(pairs))
        ok = cmax > _ZERO_COINCIDENCE
        vis[ok] = (cmax[ok] - cmin[ok]) / cmax[ok]
    scale_out = noise.counts_scale if noise is not None else None
    return MeasurementSet(intensities, dict(zip(pairs, vis.tolist())), scale_out)


def _gauge_fix_matrix(U: np.ndarray) -> np.ndarray:
    left = np.exp(-1j * np.angle(U[:, 0]))
    M = U * left[:, None]
    right = np.exp(-1j * np.angle(M[0, :]))
    return M * right[None, :]


def gauge_fix(U) -> GaugeFixedUnitary:
    """Rephase rows and columns so the first row and column are real >= 0."""
    return GaugeFixedUnitary(_gauge_fix_matrix(_require_unitary(U)))


def canonical_form(U) -> np.ndarray:
    """Gauge-fixed representative with the conjugation ambiguity resolved.

    Intensities and visibilities cannot tell U from conj(U) (every observable
    is a squared modulus), so comparisons happen in a canonical form: after
    gauge fixing, the entry with the largest |imaginary part| is made to have
    a non-negative imaginary part.
    """
    M = _gauge_fix_matrix(np.asarray(U, dtype=complex))
    im = np.abs(M.imag)
    j, i = np.unravel_index(int(np.argmax(im)), im.shape)
    if M[j, i].imag < 0:
        M = M.conj()
    return M


def reconstruct_unitary(meas: MeasurementSet, restarts: int = 16, seed: int = 0,
                        residual_threshold: float = 0.05) -> ReconstructionReport:
    """Recover the device unitary behind a MeasurementSet.

    Amplitudes start at sqrt(intensity); the (m-1)^2 free phases are fitted to
    the measured visibilities by multi-start Levenberg-Marquardt. Restart 0
    seeds |phase| estimates analytically from the first-input/first-output
    anchored pairs; later restarts randomize the signs. A joint polish then
    releases the amplitudes, and the result is projected to the closest
    unitary. Failure (best residual above threshold) is reported, not raised.
    """
    m = meas.mode_count
    if m < 2:
        raise DimensionError("reconstruction needs at least 2 modes")
    if m > MAX_MODES:
        raise ValueError(f"m <= {MAX_MODES} supported, got {m}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    anchored = {((0, i), (0, j)) for i in range(1, m) for j in range(1, m)}
    missing = anchored - set(meas.visibilities)
    if missing:
        raise ValueError(f"measurement set lacks required anchored pairs: {sorted(missing)}")

    pairs = sorted(meas.visibilities)
    pi, pi2, pj, pj2 = _pair_indices(pairs)
    vmeas = np.array([meas.visibilities[p] for p in pairs])
    A = np.sqrt(np.clip(meas.intensities, 0.0, None))
    nfree = (m - 1) ** 2

    def build(phi):
        P = np.zeros((m, m))
        P[1:, 1:] = phi.reshape(m - 1, m - 1)
        return A * np.exp(1j * P)

    def unitarity_rows(M):
        # the device is unitary by assumption; feeding that into the fit pins
        # down phase signs the (cosine-only) visibilities cannot distinguish
        G = M.conj().T @ M - np.eye(m)
        return np.concatenate([G.real.ravel(), G.imag.ravel()])

    def residuals(phi):
        M = build(phi)
        return np.concatenate([_visibility_vector(M, pi, pi2, pj, pj2) - vmeas,
                               unitarity_rows(M)])

    # analytic |phase| seed: for pair ((0,i),(0,j)) the visibility depends
    # only on cos(phase_ji) once the gauge zeroes the anchoring entries
    est = np.zeros((m - 1, m - 1))
    for a, ((i, i2), (j, j2)) in enumerate(pairs):
        if i == 0 and j == 0:
            cmax = A[j, i] ** 2 * A[j2, i2] ** 2 + A[j2, i] ** 2 * A[j, i2] ** 2
            den = 2.0 * A[j, i] * A[j2, i2] * A[j2, i] * A[j, i2]
            if den > 1e-12:
                c = -vmeas[a] * cmax / den
                est[j2 - 1, i2 - 1] = np.arccos(np.clip(c, -1.0, 1.0))

    rng = np.random.default_rng(seed)
    best = None
    used = 0
    for k in range(restarts):
        used = k + 1
        if k == 0:
            x0 = est.ravel()
        else:
            signs = rng.choice([-1.0, 1.0], size=nfree)
            x0 = est.ravel() * signs + rng.normal(0.0, 0.05, nfree)
        sol = least_squares(residuals, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if best is None or sol.cost < best.cost:
            best = sol
        if best.cost < 1e-18:
            break

    # joint polish: free the amplitudes, keep them tied to the intensities
    def polish_residuals(x):
        Af = x[:m * m].reshape(m, m)
        P = np.zeros((m, m))
        P[1:, 1:] = x[m * m:].reshape(m - 1, m - 1)
        Mf = Af * np.exp(1j * P)
        cmin = np.abs(Mf[pj, pi] * Mf[pj2, pi2] + Mf[pj2, pi] * Mf[pj, pi2]) ** 2
        A2 = Af ** 2
        cmax = A2[pj, pi] * A2[pj2, pi2] + A2[pj2, pi] * A2[pj, pi2]
        v = np.zeros(len(pairs))
        ok = cmax > _ZERO_COINCIDENCE
        v[ok] = (cmax[ok] - cmin[ok]) / cmax[ok]
        return np.concatenate([v - vmeas, (A2 - meas.intensities).ravel(),
                               unitarity_rows(Mf)])

    x0 = np.concatenate([A.ravel(), best.x])
    polished = least_squares(polish_residuals, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    Af = np.abs(polished.x[:m * m].reshape(m, m))
    P = np.zeros((m, m))
    P[1:, 1:] = polished.x[m * m:].reshape(m - 1, m - 1)
    recovered = unitarize(Af * np.exp(1j * P))

    final = _visibility_vector(recovered, pi, pi2, pj, pj2) - vmeas
    residual = float(np.sqrt(np.mean(final ** 2)))
    report = ReconstructionReport(
        success=residual <= residual_threshold,
        unitary=GaugeFixedUnitary(canonical_form(recovered)),
        residual=residual,
        threshold=residual_threshold,
        restarts_used=used,
    )
    return report


def compare_to_truth(candidate, truth, amplitude_floor: float = 1e-6):
    """Per-entry amplitude and phase errors between canonical forms.

    Phase errors are only evaluated where the true amplitude exceeds
    amplitude_floor (the phase of a vanishing entry is meaningless).
    """
    C = canonical_form(candidate)
    T = canonical_form(truth)
    if C.shape != T.shape:
        raise DimensionError(f"shape mismatch: {C.shape} vs {T.shape}")
    amplitude_errors = np.abs(np.abs(C) - np.abs(T))
    phase_errors = np.zeros_like(amplitude_errors)
    mask = np.abs(T) > amplitude_floor
    phase_errors[mask] = np.abs(np.angle(C[mask] * np.conj(T[mask])))
    return amplitude_errors, phase_errors
