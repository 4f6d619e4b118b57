import json
import math

import numpy as np
import pytest

from tdbilliards.cli import main
from tdbilliards.scenes import shipped_scene_path

TRIPLE = shipped_scene_path("finite_horizon_triple")
TWO = shipped_scene_path("finite_horizon_two_disks")


def write_scene(tmp_path, disks, t=2.0, phi=0.05, beta=0.01, name="tmp"):
    p = tmp_path / f"{name}.json"
    p.write_text(
        json.dumps(
            {
                "label": name,
                "disks": disks,
                "horizon": {"t": t, "phi": phi},
                "beta": beta,
            }
        )
    )
    return str(p)


class TestValidateScene:
    def test_valid_scene_exit_zero(self, capsys):
        rc = main(["validate-scene", TRIPLE, "--resolution", "0.02",
                   "--scenario", "drift", "--eps", "1e-3", "--steps", "10"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "tau_min" in out and "pass" in out

    def test_overlapping_exit_two(self, tmp_path, capsys):
        p = write_scene(
            tmp_path,
            [
                {"center": [0.3, 0.3], "radius": 0.2},
                {"center": [0.4, 0.4], "radius": 0.2},
            ],
        )
        assert main(["validate-scene", p]) == 2

    def test_parse_error_exit_two(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{")
        assert main(["validate-scene", str(p)]) == 2

    def test_drift_step_above_eps_exit_three(self, capsys):
        rc = main(["validate-scene", TRIPLE, "--resolution", "0.05",
                   "--scenario", "drift", "--eps", "1e-4", "--speed", "5e-4",
                   "--steps", "3"])
        assert rc == 3
        assert "step distance" in capsys.readouterr().out

    def test_horizon_failure_exit_four(self, capsys):
        rc = main(["validate-scene", TWO, "--resolution", "0.05"])
        assert rc == 4
        assert "witness" in capsys.readouterr().out


class TestCsvOutputs:
    def test_coupling_csv(self, tmp_path):
        out = tmp_path / "c.csv"
        rc = main([
            "coupling-recursion", "--zeta", "1/10", "--c", "2",
            "--lambda", "9/10", "--k-max", "30", "--out", str(out),
        ])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[3] == "k,P_k,Q_k,bound,ok"
        row2 = lines[5].split(",")
        assert float(row2[2]) == 0.9  # Q_2 = 1 - zeta exactly
        assert "exp_bound=True" in lines[-1]

    def test_tangent_audit_csv(self, tmp_path):
        out = tmp_path / "t.csv"
        rc = main([
            "tangent-audit", "--scene", TRIPLE, "--samples", "4000",
            "--fd-samples", "2000", "--out", str(out),
        ])
        assert rc == 0
        lines = out.read_text().splitlines()
        header = lines[3].split(",")
        assert header == ["scene", "n_samples", "det_max_abs_err",
                          "cone_violations", "fd_max_rel_err", "lambda_hat",
                          "c_cos_low", "c_cos_high"]
        row = lines[4].split(",")
        assert row[0] == "finite_horizon_triple"
        assert int(row[3]) == 0

    def test_memory_loss_csv_and_fit_footer(self, tmp_path):
        out = tmp_path / "m.csv"
        rc = main([
            "memory-loss", "--scene", TRIPLE, "--scenario", "drift",
            "--eps", "1e-3", "--n-max", "4", "--particles", "20000",
            "--seed", "3", "--out", str(out),
        ])
        assert rc == 0
        text = out.read_text()
        assert text.splitlines()[3] == "n,estimate_mu1,estimate_mu2,delta,stderr"
        assert "# fit:" in text

    def test_correlation_csv(self, tmp_path):
        out = tmp_path / "corr.csv"
        rc = main([
            "correlation", "--scene", TRIPLE, "--n-max", "3",
            "--particles", "20000", "--seed", "4", "--out", str(out),
        ])
        assert rc == 0
        assert "n,estimate_mu1,estimate_mu2,delta,stderr" in out.read_text()

    def test_curve_growth_and_svg(self, tmp_path):
        out = tmp_path / "g.csv"
        svg = tmp_path / "g.svg"
        rc = main([
            "curve-growth", "--scene", TRIPLE, "--n", "3",
            "--full-steps", "2", "--points", "300",
            "--eps-list", "1e-3,3e-3,1e-2",
            "--out", str(out), "--svg", str(svg),
        ])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[3].startswith("scene,n,eps,measure_below_eps,n_components")
        assert svg.read_text().startswith("<svg")

    def test_stable_proxy_csv(self, tmp_path):
        out = tmp_path / "s.csv"
        rc = main([
            "stable-proxy", "--scene", TRIPLE, "--horizon-n", "3",
            "--points", "60", "--lambda-hat", "5.3", "--out", str(out),
        ])
        assert rc == 0
        assert "bin_lo,bin_hi,count" in out.read_text()


class TestDeterminism:
    def run_memory(self, tmp_path, name, monkeypatch, threads):
        monkeypatch.setenv("TDB_THREADS", str(threads))
        out = tmp_path / name
        rc = main([
            "memory-loss", "--scene", TRIPLE, "--scenario", "drift",
            "--eps", "1e-3", "--n-max", "4", "--particles", "50000",
            "--seed", "9", "--out", str(out),
        ])
        assert rc == 0
        return out.read_bytes()

    def test_byte_identical_across_threads(self, tmp_path, monkeypatch):
        ref = self.run_memory(tmp_path, "a.csv", monkeypatch, 1)
        for i, threads in enumerate((4, 8)):
            got = self.run_memory(tmp_path, f"b{i}.csv", monkeypatch, threads)
            assert got == ref

    def test_rerun_byte_identical(self, tmp_path, monkeypatch):
        a = self.run_memory(tmp_path, "r1.csv", monkeypatch, 2)
        b = self.run_memory(tmp_path, "r2.csv", monkeypatch, 2)
        assert a == b

    def test_usage_error_exit_one(self):
        assert main(["memory-loss"]) == 1
