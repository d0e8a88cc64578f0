import json
import os
import subprocess
import sys

import numpy as np
import pytest

from qhewalk.cli import main


def run_cli(*argv, threads=None):
    env = dict(os.environ)
    env.pop("QHE_THREADS", None)
    if threads is not None:
        env["QHE_THREADS"] = str(threads)
    return subprocess.run([sys.executable, "-m", "qhewalk", *argv],
                          capture_output=True, text=True, env=env)


def run_json(*argv, **kw):
    proc = run_cli(*argv, **kw)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout)


class TestWalkCommand:
    def test_identity_device_returns_plaintext(self):
        report = run_json("walk", "--device", "identity4", "--input", "1010", "--shots", "10")
        assert report["empirical"]["bitstrings"] == {"1010": 1.0}
        assert report["empirical"]["collisions"] == 0
        assert report["exact"]["occupations"]["[0,1,0,1]"] == 1.0

    def test_single_walker_fidelity(self):
        report = run_json("walk", "--device", "u1", "--input", "0111",
                          "--shots", "100000", "--seed", "7")
        assert report["fidelity"]["occupations"] >= 0.995
        assert report["fidelity"]["bitstrings"] >= 0.995

    def test_exact_distribution_is_key_independent(self):
        base = run_json("walk", "--device", "u2", "--input", "0111",
                        "--shots", "1000", "--key", "linear:0/1")
        other = run_json("walk", "--device", "u2", "--input", "0111",
                         "--shots", "1000", "--key", "linear:1/4")
        assert base["exact"] == other["exact"]

    def test_haar_key_accepted(self):
        report = run_json("walk", "--device", "u1", "--input", "0011",
                          "--shots", "500", "--key", "haar", "--seed", "5")
        assert report["config"]["key"]["spec"] == "haar"
        assert 0.0 <= report["config"]["key"]["beta"] <= np.pi

    def test_csv_output(self):
        proc = run_cli("walk", "--device", "identity4", "--input", "0000",
                       "--shots", "10", "--csv")
        assert proc.returncode == 0
        lines = proc.stdout.strip().splitlines()
        assert lines[0] == "outcome,exact,empirical"
        assert any(line.startswith('"[1,1,1,1]"') for line in lines[1:])

    def test_input_length_mismatch_exits_2(self):
        proc = run_cli("walk", "--device", "u1", "--input", "011", "--shots", "10")
        assert proc.returncode == 2
        assert "error:" in proc.stderr

    def test_unknown_device_exits_2(self):
        proc = run_cli("walk", "--device", "bogus", "--input", "0000", "--shots", "1")
        assert proc.returncode == 2
        assert "bogus" in proc.stderr


class TestAttackCommand:
    def test_single_basis_always_succeeds(self):
        report = run_json("attack", "--m", "4", "--d", "1", "--trials", "1000")
        row = report["curve"][0]
        assert row["p_exact"] == 1.0
        assert row["p_empirical"] == 1.0

    def test_curve_within_three_sigma(self):
        report = run_json("attack", "--m", "4", "--d", "2,3,4,6,12",
                          "--trials", "100000", "--seed", "1")
        for row in report["curve"]:
            sigma = (row["p_exact"] * (1 - row["p_exact"]) / row["trials"]) ** 0.5
            assert abs(row["p_empirical"] - row["p_exact"]) <= 3 * sigma

    def test_asymptote_only(self):
        report = run_json("attack", "--m", "3500", "--asymptote-only")
        assert report["p_asymptote"] == pytest.approx(0.009536544540177922, abs=1e-15)
        assert report["curve"] == []
        assert report["config"]["plaintext"] is None

    def test_csv_output(self):
        proc = run_cli("attack", "--m", "2", "--d", "2,4", "--trials", "100", "--csv")
        assert proc.returncode == 0
        lines = proc.stdout.strip().splitlines()
        assert lines[0] == "d,p_exact,p_empirical,stderr,trials"
        assert len(lines) == 3


class TestSecurityCommand:
    def test_linear_reference_value(self):
        report = run_json("security", "--m", "4", "--ensemble", "linear:180")
        assert abs(report["holevo_bits"] - 1.9694) <= 0.005
        td = report["trace_distances"]
        assert td["hamming_1"] == pytest.approx(td["hamming_3"], abs=1e-6)
        assert "linear:180" in report["trace_distances_by_ensemble"]
        assert "poincare:64,64,64" in report["trace_distances_by_ensemble"]

    def test_single_qubit_hides_everything(self):
        report = run_json("security", "--m", "1", "--ensemble", "linear:2")
        assert report["holevo_bits"] == pytest.approx(0.0, abs=1e-12)
        assert list(report["trace_distances"]) == ["hamming_1"]

    def test_explicit_flag(self):
        report = run_json("security", "--m", "2", "--ensemble", "linear:6", "--explicit")
        assert report["holevo_explicit_bits"] == pytest.approx(report["holevo_bits"], abs=1e-8)

    def test_attack_curve_field(self):
        report = run_json("security", "--m", "2", "--ensemble", "linear:8",
                          "--attack-trials", "2000")
        assert [row["d"] for row in report["attack_curve"]] == [2, 3, 4, 6, 12]
        for row in report["attack_curve"]:
            assert set(row) == {"d", "p_exact", "p_empirical", "stderr"}


class TestReconstructCommand:
    def test_noiseless_round_trip(self):
        report = run_json("reconstruct", "--device", "u1", "--noise", "none", "--seed", "3")
        assert report["result"]["success"]
        assert report["comparison"]["max_amplitude_error"] <= 1e-6
        assert report["comparison"]["max_phase_error_rad"] <= 1e-6

    def test_identity_round_trip(self):
        report = run_json("reconstruct", "--device", "identity4", "--noise", "none")
        assert report["result"]["success"]
        assert report["comparison"]["max_amplitude_error"] <= 1e-9

    def test_poisson_budget(self):
        report = run_json("reconstruct", "--device", "u1", "--counts", "1000000", "--seed", "3")
        assert report["result"]["success"]
        assert report["comparison"]["max_amplitude_error"] <= 0.01
        assert report["comparison"]["max_phase_error_rad"] <= 0.05

    def test_measurements_file_round_trip(self, tmp_path):
        synth = run_json("reconstruct", "--device", "u2", "--noise", "none")
        meas_path = tmp_path / "meas.json"
        meas_path.write_text(json.dumps(synth["measurements"]))
        report = run_json("reconstruct", "--measurements", str(meas_path), "--device", "u2")
        assert report["result"]["success"]
        assert report["comparison"]["max_amplitude_error"] <= 1e-6

    def test_corrupt_measurements_exit_3(self, tmp_path):
        synth = run_json("reconstruct", "--device", "u1", "--noise", "none")
        payload = synth["measurements"]
        for rec in payload["visibilities"]:
            rec["value"] = 0.93
        meas_path = tmp_path / "broken.json"
        meas_path.write_text(json.dumps(payload))
        proc = run_cli("reconstruct", "--measurements", str(meas_path))
        assert proc.returncode == 3
        report = json.loads(proc.stdout)
        assert not report["result"]["success"]
        assert report["result"]["residual"] > report["config"]["threshold"]

    def test_contradictory_noise_flags_exit_2(self):
        proc = run_cli("reconstruct", "--device", "u1", "--noise", "none", "--counts", "100")
        assert proc.returncode == 2
        proc = run_cli("reconstruct", "--device", "u1", "--noise", "poisson")
        assert proc.returncode == 2


class TestDevicesCommand:
    def test_list(self):
        report = run_json("devices")
        names = [d["name"] for d in report["devices"]]
        assert names == ["identity4", "u1", "u2"]
        by_name = {d["name"]: d for d in report["devices"]}
        assert by_name["identity4"]["projection_distance"] <= 1e-12
        assert by_name["u1"]["projection_distance"] == pytest.approx(0.109131, abs=1e-5)

    def test_dump(self):
        payload = run_json("devices", "--dump", "u2")
        assert payload["m"] == 4
        assert payload["unitary"][0][0] == [0.64, 0.0]

    def test_dump_unknown(self):
        proc = run_cli("devices", "--dump", "nope")
        assert proc.returncode == 2


class TestDeterminism:
    def test_byte_identical_reruns(self):
        cases = [
            ("walk", "--device", "u1", "--input", "0110", "--shots", "5000", "--seed", "9"),
            ("attack", "--m", "3", "--d", "2,5", "--trials", "5000", "--seed", "9"),
            ("security", "--m", "2", "--ensemble", "linear:16", "--seed", "9"),
            ("reconstruct", "--device", "u2", "--counts", "10000", "--seed", "9"),
        ]
        for argv in cases:
            a, b = run_cli(*argv), run_cli(*argv)
            assert a.returncode == b.returncode
            assert a.stdout == b.stdout, f"non-deterministic output for {argv}"

    def test_thread_count_never_changes_bytes(self):
        argv = ("walk", "--device", "u2", "--input", "1001", "--shots", "20000", "--seed", "2")
        outputs = {run_cli(*argv, threads=t).stdout for t in (1, 2, 8)}
        assert len(outputs) == 1

    def test_out_flag_writes_file(self, tmp_path):
        path = tmp_path / "report.json"
        proc = run_cli("walk", "--device", "identity4", "--input", "0101",
                       "--shots", "10", "--out", str(path))
        assert proc.returncode == 0
        assert proc.stdout == ""
        direct = run_cli("walk", "--device", "identity4", "--input", "0101", "--shots", "10")
        assert path.read_text() == direct.stdout


def test_main_callable_in_process(capsys):
    code = main(["attack", "--m", "2", "--d", "2", "--trials", "50", "--seed", "0"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["curve"][0]["p_exact"] == 0.5
