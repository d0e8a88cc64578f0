"""Command-line front end: every pipeline as a reproducible, scriptable command.

Subcommands: walk (end-to-end encrypted protocol), attack (random-basis
eavesdropping curve), security (Holevo and trace-distance analysis),
reconstruct (characterization round trip), devices (embedded interferometers).

All output is machine-first JSON (``--csv`` gives flat tables for the walk and
attack commands). Every report echoes its fully resolved configuration, and a
given seed + configuration always produces byte-identical output. The
QHE_THREADS environment variable caps sampling parallelism; it never changes
results, so it is deliberately absent from the echoed configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .numerics import unitarize
from .polarization import PolarizationKey, as_bits, linear_key, sample_haar_key
from .reconstruct import (MeasurementNoise, MeasurementSet, compare_to_truth,
                          reconstruct_unitary, synthesize_measurements)
from .security import (encrypted_density, attack_asymptote, attack_success,
                       hidden_bits_linear_asymptotic, holevo, holevo_poincare_limit,
                       linear_ensemble, parse_ensemble, simulate_attack,
                       trace_distance, von_neumann_entropy)
from .walk import (NoiseModel, bhattacharyya_fidelity, occupation_to_bits,
                   protocol_distribution, run_protocol, unitary_from_payload,
                   unitary_to_payload)

BUILTIN_DEVICES = ("identity4", "u1", "u2")
ATTACK_CURVE_D = (2, 3, 4, 6, 12)
HEDGE_ENSEMBLES = ("linear:180", "poincare:64,64,64")


def make_rng(seed: int) -> np.random.Generator:
    """Single 64-bit seed -> counter-based generator; spawnable for batches."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def thread_count() -> int:
    raw = os.environ.get("QHE_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"QHE_THREADS must be an integer, got {raw!r}") from None
        return max(1, n)
    return max(1, min(4, os.cpu_count() or 1))


@dataclass
class Device:
    name: str
    m: int
    unitary: np.ndarray
    projection_distance: float
    source: str


def load_device(name_or_path: str) -> Device:
    """Load a builtin device by name or any device JSON by path.

    Printed device matrices are rounded, so the stored matrix is projected to
    the closest unitary on load; projection_distance records how far it moved.
    """
    if name_or_path in BUILTIN_DEVICES:
        text = resources.files("qhewalk").joinpath(f"devices/{name_or_path}.json").read_text()
        name, source = name_or_path, "builtin"
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise ValueError(f"unknown device {name_or_path!r}: not a builtin "
                             f"({', '.join(BUILTIN_DEVICES)}) and not a file")
        text = path.read_text()
        name, source = path.stem, str(path)
    raw = unitary_from_payload(json.loads(text))
    exact = unitarize(raw)
    distance = float(np.max(np.abs(exact - raw)))
    return Device(name, raw.shape[0], exact, distance, source)


def device_echo(device: Device) -> dict:
    return {
        "name": device.name,
        "m": device.m,
        "source": device.source,
        "projection_distance": device.projection_distance,
    }


def parse_key_spec(spec: str, random_source) -> tuple[PolarizationKey, dict]:
    """Key specs: linear:K/D | euler:ALPHA,BETA,GAMMA | haar[:D1,D2,D3]."""
    kind, sep, rest = spec.partition(":")
    if kind == "linear":
        k_str, slash, d_str = rest.partition("/")
        if not slash:
            raise ValueError(f"linear key must look like linear:K/D, got {spec!r}")
        key = linear_key(int(k_str), int(d_str))
    elif kind == "euler":
        parts = rest.split(",")
        if len(parts) != 3:
            raise ValueError(f"euler key must look like euler:A,B,G, got {spec!r}")
        key = PolarizationKey(*(float(p) for p in parts))
    elif kind == "haar":
        dims = (64, 64, 64)
        if sep:
            parts = rest.split(",")
            if len(parts) != 3:
                raise ValueError(f"haar key grid must look like haar:D1,D2,D3, got {spec!r}")
            dims = tuple(int(p) for p in parts)
        key = sample_haar_key(random_source, *dims)
    else:
        raise ValueError(f"unknown key spec {spec!r} (expected linear:K/D, euler:A,B,G or haar)")
    echo = {"spec": spec, "alpha": float(key.alpha), "beta": float(key.beta),
            "gamma": float(key.gamma)}
    return key, echo


def occupation_label(occ) -> str:
    return "[" + ",".join(str(int(c)) for c in occ) + "]"


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _json_text(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


# ----------------------------------------------------------------- commands

def cmd_walk(args) -> int:
    rng = make_rng(args.seed)
    device = load_device(args.device)
    bits = as_bits(args.input)
    if len(bits) != device.m:
        raise ValueError(f"input length {len(bits)} does not match device m = {device.m}")
    key, key_echo = parse_key_spec(args.key, rng)
    noise = NoiseModel(args.visibility, args.higher_order_rate)

    result = run_protocol(device.unitary, bits, key, args.shots, rng,
                          noise=noise, threads=thread_count())

    exact_occ = protocol_distribution(device.unitary, bits, noise)
    collision_probability = sum(p for occ, p in exact_occ.items() if any(c > 1 for c in occ))
    kept = 1.0 - collision_probability
    exact_bits = {}
    if kept > 0.0:
        exact_bits = {occupation_to_bits(occ): p / kept
                      for occ, p in exact_occ.items() if not any(c > 1 for c in occ)}

    empirical_occ = result.empirical_occupations()
    empirical_bits = result.empirical_bitstrings()
    fidelity_occ = bhattacharyya_fidelity(
        {occupation_label(o): p for o, p in exact_occ.items()},
        {occupation_label(o): p for o, p in empirical_occ.items()})
    fidelity_bits = bhattacharyya_fidelity(exact_bits, empirical_bits)

    report = {
        "command": "walk",
        "config": {
            "device": args.device,
            "input": "".join(str(b) for b in bits),
            "key": key_echo,
            "shots": int(args.shots),
            "seed": int(args.seed),
            "noise": {"hom_visibility": noise.hom_visibility,
                      "higher_order_rate": noise.higher_order_rate},
        },
        "device": device_echo(device),
        "exact": {
            "occupations": {occupation_label(o): float(p) for o, p in sorted(exact_occ.items())},
            "bitstrings": {b: float(p) for b, p in sorted(exact_bits.items())},
            "collision_probability": float(collision_probability),
        },
        "empirical": {
            "occupations": {occupation_label(o): float(p) for o, p in sorted(empirical_occ.items())},
            "bitstrings": {b: float(p) for b, p in sorted(empirical_bits.items())},
            "collisions": int(result.collisions),
            "collision_fraction": result.collisions / result.shots,
        },
        "fidelity": {
            "occupations": float(fidelity_occ),
            "bitstrings": float(fidelity_bits),
        },
    }
    if args.csv:
        emp = {occupation_label(o): p for o, p in empirical_occ.items()}
        rows = [(label, repr(float(p)), repr(float(emp.get(label, 0.0))))
                for label, p in sorted((occupation_label(o), p) for o, p in exact_occ.items())]
        _emit(_csv_text(["outcome", "exact", "empirical"], rows), args.out)
    else:
        _emit(_json_text(report), args.out)
    return 0


def cmd_attack(args) -> int:
    if args.m < 1:
        raise ValueError("m must be >= 1")
    rng = make_rng(args.seed)
    plaintext = None
    if not args.asymptote_only or args.plaintext is not None:
        plaintext = args.plaintext if args.plaintext is not None else "0" * args.m
        if len(as_bits(plaintext)) != args.m:
            raise ValueError(f"plaintext length {len(plaintext)} does not match m = {args.m}")

    ds: list[int] = []
    if not args.asymptote_only:
        ds = [int(p) for p in str(args.d).split(",") if p.strip()]
        if not ds:
            raise ValueError("no d values given (use --asymptote-only to skip the curve)")

    curve = []
    for d in ds:
        exact = attack_success(args.m, d)
        empirical = simulate_attack(args.m, d, plaintext, args.trials, rng)
        stderr = float(np.sqrt(empirical * (1.0 - empirical) / args.trials))
        curve.append({"d": d, "p_exact": float(exact), "p_empirical": float(empirical),
                      "stderr": stderr, "trials": int(args.trials)})

    report = {
        "command": "attack",
        "config": {
            "m": int(args.m),
            "d": ds,
            "plaintext": plaintext,
            "trials": int(args.trials),
            "seed": int(args.seed),
            "asymptote_only": bool(args.asymptote_only),
        },
        "p_asymptote": float(attack_asymptote(args.m)),
        "curve": curve,
    }
    if args.csv:
        rows = [(r["d"], repr(r["p_exact"]), repr(r["p_empirical"]), repr(r["stderr"]),
                 r["trials"]) for r in curve]
        _emit(_csv_text(["d", "p_exact", "p_empirical", "stderr", "trials"], rows), args.out)
    else:
        _emit(_json_text(report), args.out)
    return 0


def _hamming_trace_distances(m: int, ensemble) -> dict:
    """T(rho_00..0, rho with w trailing ones) for w = 1..min(3, m)."""
    rho0 = encrypted_density("0" * m, ensemble)
    out = {}
    for w in range(1, min(3, m) + 1):
        x = "0" * (m - w) + "1" * w
        out[f"hamming_{w}"] = float(trace_distance(rho0, encrypted_density(x, ensemble)))
    return out


def cmd_security(args) -> int:
    if args.m < 1:
        raise ValueError("m must be >= 1")
    ensemble = parse_ensemble(args.ensemble)
    rng = make_rng(args.seed)
    m = args.m

    rho0 = encrypted_density("0" * m, ensemble)
    entropy = von_neumann_entropy(rho0)
    report = {
        "command": "security",
        "config": {
            "m": int(m),
            "ensemble": ensemble.label,
            "explicit": bool(args.explicit),
            "attack_trials": int(args.attack_trials),
            "seed": int(args.seed),
        },
        "m": int(m),
        "ensemble": ensemble.label,
        "holevo_bits": float(m - entropy),
        "entropy_bits": float(entropy),
        "holevo_reference": {
            "linear:12": float(holevo(m, linear_ensemble(12))),
            "linear:180": float(holevo(m, linear_ensemble(180))),
        },
        "limits": {
            "holevo_poincare_limit_bits": float(holevo_poincare_limit(m)),
            "hidden_bits_linear_asymptotic": float(hidden_bits_linear_asymptotic(m)),
        },
    }
    if args.explicit:
        report["holevo_explicit_bits"] = float(holevo(m, ensemble, explicit=True))

    curve = []
    for d in ATTACK_CURVE_D:
        exact = attack_success(m, d)
        empirical = simulate_attack(m, d, "0" * m, args.attack_trials, rng)
        stderr = float(np.sqrt(empirical * (1.0 - empirical) / args.attack_trials))
        curve.append({"d": d, "p_exact": float(exact),
                      "p_empirical": float(empirical), "stderr": stderr})
    report["attack_curve"] = curve

    report["trace_distances"] = _hamming_trace_distances(m, ensemble)
    if m <= 6:
        # both candidate ensembles, recorded side by side
        hedge = {}
        for label in HEDGE_ENSEMBLES:
            hedge[label] = _hamming_trace_distances(m, parse_ensemble(label))
        report["trace_distances_by_ensemble"] = hedge

    _emit(_json_text(report), args.out)
    return 0


def cmd_reconstruct(args) -> int:
    rng = make_rng(args.seed)
    if args.noise == "poisson" and args.counts is None:
        raise ValueError("--noise poisson requires --counts")
    if args.noise == "none" and args.counts is not None:
        raise ValueError("--noise none contradicts --counts")

    device = load_device(args.device) if args.device else None

    if args.measurements:
        payload = json.loads(Path(args.measurements).read_text())
        meas = MeasurementSet.from_payload(payload)
        noise_echo = "file"
    elif device is not None:
        noise = None
        if args.counts is not None or args.distinguishability < 1.0:
            counts = float(args.counts) if args.counts is not None else None
            noise = MeasurementNoise(counts_scale=counts,
                                     distinguishability=args.distinguishability)
        meas = synthesize_measurements(device.unitary, noise, rng)
        noise_echo = "none" if noise is None else "poisson"
    else:
        raise ValueError("reconstruct needs --device or --measurements")

    result = reconstruct_unitary(meas, restarts=args.restarts, seed=args.seed,
                                 residual_threshold=args.threshold)
    recovered = result.unitary.matrix

    report = {
        "command": "reconstruct",
        "config": {
            "device": args.device,
            "measurements": args.measurements,
            "noise": noise_echo,
            "counts": None if args.counts is None else float(args.counts),
            "distinguishability": float(args.distinguishability),
            "restarts": int(args.restarts),
            "threshold": float(args.threshold),
            "seed": int(args.seed),
        },
        "device": device_echo(device) if device is not None else None,
        "measurements": meas.to_payload(),
        "result": {
            "success": bool(result.success),
            "residual": float(result.residual),
            "restarts_used": int(result.restarts_used),
            "unitary": unitary_to_payload(recovered),
        },
    }
    if device is not None:
        amp_err, phase_err = compare_to_truth(recovered, device.unitary)
        report["comparison"] = {
            "max_amplitude_error": float(np.max(amp_err)),
            "max_phase_error_rad": float(np.max(phase_err)),
            "amplitude_errors": [[float(v) for v in row] for row in amp_err],
            "phase_errors": [[float(v) for v in row] for row in phase_err],
        }
    _emit(_json_text(report), args.out)
    return 0 if result.success else 3


def cmd_devices(args) -> int:
    if args.dump:
        if args.dump not in BUILTIN_DEVICES:
            raise ValueError(f"unknown builtin device {args.dump!r}")
        text = resources.files("qhewalk").joinpath(f"devices/{args.dump}.json").read_text()
        payload = json.loads(text)
        _emit(_json_text(payload), args.out)
        return 0
    report = {
        "command": "devices",
        "devices": [device_echo(load_device(name)) for name in BUILTIN_DEVICES],
    }
    _emit(_json_text(report), args.out)
    return 0


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qhewalk",
        description="Simulator and analysis toolkit for the encrypted photonic walk protocol.")
    sub = parser.add_subparsers(dest="command", required=True)

    walk = sub.add_parser("walk", help="run the encrypted protocol end to end")
    walk.add_argument("--device", required=True, help="builtin name (u1, u2, identity4) or JSON path")
    walk.add_argument("--input", required=True, help="plaintext bit-string, e.g. 0111")
    walk.add_argument("--key", default="linear:0/1",
                      help="linear:K/D | euler:A,B,G | haar[:D1,D2,D3] (default linear:0/1)")
    walk.add_argument("--shots", type=int, default=100000)
    walk.add_argument("--seed", type=int, default=0)
    walk.add_argument("--visibility", type=float, default=1.0,
                      help="two-photon interference visibility (default 1.0)")
    walk.add_argument("--higher-order-rate", type=float, default=0.0,
                      help="probability a shot is replaced by a spurious uniform outcome")
    walk.add_argument("--csv", action="store_true", help="flat outcome table instead of JSON")
    walk.add_argument("--out", help="write output to this path instead of stdout")
    walk.set_defaults(func=cmd_walk)

    attack = sub.add_parser("attack", help="random-basis eavesdropping success curve")
    attack.add_argument("--m", type=int, required=True)
    attack.add_argument("--d", default="2,3,4,6,12", help="comma list of key-set sizes")
    attack.add_argument("--plaintext", default=None, help="default all zeros")
    attack.add_argument("--trials", type=int, default=100000)
    attack.add_argument("--seed", type=int, default=0)
    attack.add_argument("--asymptote-only", action="store_true",
                        help="report just the 1/sqrt(pi m) asymptote")
    attack.add_argument("--csv", action="store_true")
    attack.add_argument("--out")
    attack.set_defaults(func=cmd_attack)

    security = sub.add_parser("security", help="Holevo quantity and trace-distance analysis")
    security.add_argument("--m", type=int, required=True)
    security.add_argument("--ensemble", default="linear:180",
                          help="linear:<d> or poincare:<d1>,<d2>,<d3> (default linear:180)")
    security.add_argument("--explicit", action="store_true",
                          help="cross-check Holevo from all 2^m plaintext densities")
    security.add_argument("--attack-trials", type=int, default=100000)
    security.add_argument("--seed", type=int, default=0)
    security.add_argument("--out")
    security.set_defaults(func=cmd_security)

    rec = sub.add_parser("reconstruct", help="synthesize measurements and recover the unitary")
    rec.add_argument("--device", help="ground-truth device (builtin name or JSON path)")
    rec.add_argument("--measurements", help="measurement-set JSON path (skips synthesis)")
    rec.add_argument("--noise", choices=["none", "poisson"], default=None)
    rec.add_argument("--counts", type=float, default=None,
                     help="expected detections per setting (implies Poisson noise)")
    rec.add_argument("--distinguishability", type=float, default=1.0,
                     help="spectral overlap damping all visibilities (default 1.0)")
    rec.add_argument("--restarts", type=int, default=16)
    rec.add_argument("--threshold", type=float, default=0.05,
                     help="visibility-residual threshold for success")
    rec.add_argument("--seed", type=int, default=0)
    rec.add_argument("--out")
    rec.set_defaults(func=cmd_reconstruct)

    devices = sub.add_parser("devices", help="list or dump the embedded devices")
    devices.add_argument("--dump", help="print one builtin device file verbatim")
    devices.add_argument("--out")
    devices.set_defaults(func=cmd_devices)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
