"""End-to-end runs of the bridge command line."""

import json
import subprocess
import sys


def run_bridge(*args):
    return subprocess.run(
        [sys.executable, "-m", "trainbridge.cli", *args],
        capture_output=True,
        text=True,
    )


class TestParityCommand:
    def test_pass_run_writes_report(self, small_bundles, tmp_path):
        report_path = tmp_path / "report.json"
        proc = run_bridge(
            "parity", "--bundle", str(small_bundles["f64"]),
            "--map", "0", "0", str(small_bundles["maps"][(0, 0)]),
            "--map", "0", "1", str(small_bundles["maps"][(0, 1)]),
            "--threshold", "1e-10", "--out", str(report_path),
        )
        assert proc.returncode == 0, proc.stderr
        assert "parity: PASS" in proc.stdout
        assert proc.stdout.count("max_abs_deviation") == 2
        report = json.loads(report_path.read_text())
        assert report["passed"] is True

    def test_impossible_threshold_fails(self, small_bundles):
        proc = run_bridge(
            "parity", "--bundle", str(small_bundles["f64"]),
            "--map", "0", "0", str(small_bundles["maps"][(0, 0)]),
            "--map", "0", "1", str(small_bundles["maps"][(0, 1)]),
            "--threshold", "0",
        )
        assert proc.returncode == 1
        assert "parity: FAIL" in proc.stdout

    def test_missing_map_flag_is_usage_error(self, small_bundles):
        proc = run_bridge("parity", "--bundle", str(small_bundles["f64"]))
        assert proc.returncode == 1
        assert "usage" in proc.stderr

    def test_missing_bundle_file(self, tmp_path, small_bundles):
        proc = run_bridge(
            "parity", "--bundle", str(tmp_path / "absent.bin"),
            "--map", "0", "0", str(small_bundles["maps"][(0, 0)]),
        )
        assert proc.returncode == 2
        assert "io error" in proc.stderr

    def test_corrupt_bundle_reports_error(self, tmp_path, small_bundles):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNK")
        proc = run_bridge(
            "parity", "--bundle", str(bad),
            "--map", "0", "0", str(small_bundles["maps"][(0, 0)]),
        )
        assert proc.returncode == 1
        assert "error:" in proc.stderr


class TestSmokeCommand:
    def test_two_epoch_run_emits_curves(self, vit_bundle, tmp_path):
        proc = run_bridge(
            "smoke", "--bundle", str(vit_bundle), "--epochs", "2",
            "--subset", "16", "--seed", "1", "--out-dir", str(tmp_path),
        )
        assert proc.returncode == 0, proc.stderr
        for name in ("structured", "baseline"):
            assert name in proc.stdout
            lines = (tmp_path / f"{name}_loss.csv").read_text().splitlines()
            assert lines[0] == "epoch,step,loss"
            assert len(lines) == 1 + 2 * 2
