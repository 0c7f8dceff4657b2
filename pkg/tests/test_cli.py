import hashlib
import os

import numpy as np
import pytest

from ngwsim.cli import main


def run_cli(*args):
    return main([str(a) for a in args])


def read_csv(path):
    with open(path) as handle:
        lines = [line.rstrip("\n") for line in handle]
    assert lines[0].startswith("# ngw-sim v1, columns: ")
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return header, rows


def digest(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


class TestAnalytic:
    def test_scan_and_schema(self, tmp_path):
        out = tmp_path / "a"
        assert run_cli("analytic", "--scan", "displacement", "--sa-range", "1:2:0.5",
                       "--sb-range", "1:2:0.5", "--out", out) == 0
        header, rows = read_csv(out / "analytic_displacement.csv")
        assert header == ["s_a_db", "s_b_db", "r_a", "r_b", "e_q", "config_hash", "seed"]
        assert len(rows) == 9
        # diagonal matches the closed form 2 e^{2r}
        s_db = 1.0
        r = s_db * np.log(10) / 20
        first = rows[0]
        assert abs(float(first[4]) - 2 * np.exp(2 * r)) < 1e-12

    def test_rerun_byte_identical(self, tmp_path):
        args = ("analytic", "--scan", "phase", "--sa-range", "1:3:1",
                "--sb-range", "1:3:1")
        run_cli(*args, "--out", tmp_path / "r1")
        run_cli(*args, "--out", tmp_path / "r2")
        assert digest(tmp_path / "r1" / "analytic_phase.csv") == \
            digest(tmp_path / "r2" / "analytic_phase.csv")

    def test_unknown_generator(self, tmp_path, capsys):
        assert run_cli("analytic", "--scan", "warp", "--out", tmp_path) == 1
        assert "unknown generator" in capsys.readouterr().err


class TestConfigFile:
    def test_file_and_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("scan = displacement\nsa-range = 1:2:1\nsb-range = 1:2:1\n"
                       "phi = 0.7853981633974483  # quarter pi\n")
        out = tmp_path / "o1"
        assert run_cli("analytic", "--config", cfg, "--out", out) == 0
        header, rows = read_csv(out / "analytic_displacement.csv")
        assert len(rows) == 4
        out2 = tmp_path / "o2"
        assert run_cli("analytic", "--config", cfg, "--sa-range", "1:3:1",
                       "--out", out2) == 0
        _, rows2 = read_csv(out2 / "analytic_displacement.csv")
        assert len(rows2) == 6

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("frobnicate = 3\n")
        assert run_cli("analytic", "--config", cfg, "--out", tmp_path) == 1
        assert "unknown key" in capsys.readouterr().err

    def test_r_and_db_exclusive(self, tmp_path, capsys):
        assert run_cli("fi", "--ra", 0.2, "--sa-db", 1.0, "--out", tmp_path) == 1
        assert "not both" in capsys.readouterr().err


class TestFi:
    def test_displacement_value(self, tmp_path, capsys):
        out = tmp_path / "fi"
        assert run_cli("fi", "--gen", "displacement", "--ra", 0.2, "--rb", 0.2,
                       "--out", out) == 0
        header, rows = read_csv(out / "fi.csv")
        values = dict(zip(header, rows[0]))
        assert abs(float(values["fi"]) - 6 * np.exp(0.4)) < 1e-4
        assert abs(float(values["qfi"]) - 6 * np.exp(0.4)) < 1e-9
        assert abs(float(values["e_value"]) - 2 * np.exp(0.4)) < 1e-4

    def test_fi_angles_map(self, tmp_path):
        out = tmp_path / "angles"
        assert run_cli("fi-angles", "--gen", "shear", "--ra", -0.2, "--rb", -0.2,
                       "--step", np.pi / 4, "--out", out) == 0
        header, rows = read_csv(out / "fi_angles_shear.csv")
        assert header[:3] == ["phi_a", "phi_b", "fi"]
        assert len(rows) == 16


class TestSampleEstimate:
    def test_sample_csv_and_manifest(self, tmp_path):
        out = tmp_path / "s"
        assert run_cli("sample", "--ra", 0.2, "--rb", 0.2, "--samples", 2000,
                       "--seed", 9, "--out", out) == 0
        text = (out / "samples.csv").read_text().splitlines()
        assert text[0] == "x_a,x_b"
        assert len(text) == 2001
        manifest = (out / "samples.manifest").read_text()
        assert "acceptance-rate" in manifest and "sha256" in manifest

    def test_estimate_outputs(self, tmp_path):
        out = tmp_path / "e"
        assert run_cli("estimate", "--ra", 0.2, "--rb", 0.2, "--samples", 40000,
                       "--reps", 3, "--bin", 0.2, "--seed", 5, "--out", out) == 0
        _, reps = read_csv(out / "estimate_replicates.csv")
        assert len(reps) == 3
        header, rows = read_csv(out / "estimate_summary.csv")
        summary = dict(zip(header, rows[0]))
        assert float(summary["theory_e"]) == pytest.approx(2 * np.exp(0.4), abs=1e-4)

    def test_estimate_deterministic(self, tmp_path):
        args = ("estimate", "--ra", 0.2, "--rb", 0.2, "--samples", 30000,
                "--reps", 2, "--bin", 0.2, "--seed", 5)
        run_cli(*args, "--out", tmp_path / "d1")
        run_cli(*args, "--out", tmp_path / "d2")
        assert digest(tmp_path / "d1" / "estimate_replicates.csv") == \
            digest(tmp_path / "d2" / "estimate_replicates.csv")


class TestReproduce:
    def test_fig2_bundle(self, tmp_path):
        out = tmp_path / "fig2"
        assert run_cli("reproduce", "fig2", "--out", out) == 0
        header, rows = read_csv(out / "fig2_max_witness.csv")
        assert "displacement_inphase" in header
        assert (out / "plot_fig2.py").exists()
        assert (out / "fig2.manifest").exists()
        # displacement dominates at low squeezing; phase estimation overtakes
        # it near 5.3 dB (shearing crosses just past the 6 dB edge)
        data = {h: [float(r[i]) for r in rows] for i, h in enumerate(header[:-2])}
        s = np.array(data["s_db"])
        disp = np.array(data["displacement_inphase"])
        phase = np.array(data["phase"])
        shear = np.array(data["shear_inphase"])
        assert np.all(disp[s < 5.0] > phase[s < 5.0])
        assert phase[-1] > disp[-1]
        assert np.all(disp > shear)

    def test_fig3a_grid(self, tmp_path):
        out = tmp_path / "fig3"
        assert run_cli("reproduce", "fig3a", "--out", out) == 0
        header, rows = read_csv(out / "fig3a_displacement_inphase.csv")
        assert len(rows) == 60 * 60

    def test_fig5_deterministic(self, tmp_path):
        out1, out2 = tmp_path / "f1", tmp_path / "f2"
        assert run_cli("reproduce", "fig5", "--seed", 4, "--out", out1) == 0
        assert run_cli("reproduce", "fig5", "--seed", 4, "--out", out2) == 0
        for name in ("fig5a_frequencies.csv", "fig5b_frequencies.csv"):
            assert digest(out1 / name) == digest(out2 / name)

    def test_appA_delta_curves(self, tmp_path):
        out = tmp_path / "appA"
        assert run_cli("reproduce", "appA", "--out", out) == 0
        header, rows = read_csv(out / "appA_delta_unbalancing.csv")
        by_phi = {}
        for row in rows:
            by_phi.setdefault(float(row[0]), []).append((float(row[1]), float(row[2])))
        for phi, pts in by_phi.items():
            deltas = np.array([p[0] for p in pts])
            values = np.array([p[1] for p in pts])
            base = values[np.argmin(np.abs(deltas))]
            assert np.max(np.abs(values - base * np.cos(2 * deltas))) < 1e-10

    def test_fig6_reduced_grid(self, tmp_path):
        out = tmp_path / "fig6"
        assert run_cli("reproduce", "fig6", "--out", out, "--reps", 2,
                       "--sample-counts", "40000", "--deltas", "0.2") == 0
        _, rows = read_csv(out / "fig6_discretization.csv")
        assert len(rows) == 4  # two states x two loss values

    def test_threads_env_smoke(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NGW_THREADS", "2")
        out = tmp_path / "angles"
        assert run_cli("fi-angles", "--gen", "phase", "--ra", 0.2, "--rb", 0.2,
                       "--step", np.pi / 2, "--out", out) == 0
        _, rows = read_csv(out / "fi_angles_phase.csv")
        assert len(rows) == 4
