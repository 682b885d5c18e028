"""Config loading, validation, and the command-line surface."""

import csv
import json
import math

import numpy as np
import pytest

from erneflux.cli import main
from erneflux.config import load_config
from erneflux.errors import ConfigError, InfeasibleGeometryError
from erneflux.fixtures import square_masks, synthetic_cells
from erneflux.geometry import Cone


class TestLoadConfig:
    def test_defaults_from_absent_file(self):
        cfg = load_config(None)
        assert cfg.cell.k == 40
        assert cfg.cell.V_ER_um3 == 200.0
        assert cfg.cell.V_NE_um3 == 30.0
        assert isinstance(cfg.junction, Cone)
        assert cfg.junction.R_um == pytest.approx(11e-3)
        assert cfg.junction.L_um == pytest.approx(10e-3)
        assert cfg.junction.alpha_rad == pytest.approx(math.radians(25.0))
        assert cfg.reporter.name == "small"
        assert cfg.reporter.D_um2_s == 3.3
        assert cfg.n_cells == 64
        assert cfg.dt_s == 1e-3
        assert cfg.mode == "full"
        assert cfg.sweep_L_um == (5e-3, 10e-3, 20e-3)
        assert len(cfg.sweep_reporters) == 2

    def test_empty_file_equals_defaults(self, tmp_path):
        path = tmp_path / "empty.ini"
        path.write_text("")
        assert load_config(path).config_hash() == load_config(None).config_hash()

    def test_file_values_override_defaults(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text(
            "[cell]\nk = 20\n"
            "[junction]\nalpha_deg = 50  # steeper\n"
            "[reporter]\nname = large\n"
            "[solver]\nn_cells = 32\nt_end_s = 12.5\n"
        )
        cfg = load_config(path)
        assert cfg.cell.k == 20
        assert cfg.junction.alpha_rad == pytest.approx(math.radians(50.0))
        assert cfg.reporter.D_um2_s == 0.52  # large-reporter default
        assert cfg.n_cells == 32
        assert cfg.t_end_s == 12.5

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[cell]\nvolume = 1\n")
        with pytest.raises(ConfigError, match="volume"):
            load_config(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[turbo]\nx = 1\n")
        with pytest.raises(ConfigError, match="turbo"):
            load_config(path)

    def test_angle_at_least_90_rejected(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[junction]\nalpha_deg = 95\n")
        with pytest.raises(ConfigError, match="alpha"):
            load_config(path)

    def test_oversized_reporter_rejected_at_load(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[junction]\nR_um = 0.011\n[reporter]\nname = custom\n"
                        "D_um2_s = 1.0\nr_um = 0.012\n")
        with pytest.raises(InfeasibleGeometryError):
            load_config(path)

    def test_flag_overrides_beat_file(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[junction]\nL_um = 0.02\n")
        cfg = load_config(path, overrides={"junction.L_um": "0.005"})
        assert cfg.junction.L_um == pytest.approx(0.005)

    def test_tabulated_junction(self, tmp_path):
        profile = tmp_path / "profile.csv"
        profile.write_text("z_um,radius_um\n0,0.011\n0.01,0.013\n")
        path = tmp_path / "run.ini"
        path.write_text(f"[junction]\nkind = tabulated\nprofile_csv = {profile}\n")
        cfg = load_config(path)
        assert cfg.junction.L_um == pytest.approx(0.01)

    def test_custom_reporter_requires_d_and_r(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[reporter]\nname = medium\n")
        with pytest.raises(ConfigError, match="medium"):
            load_config(path)

    def test_sweep_reporter_radius_variants(self, tmp_path):
        # "<base>@<r_um>" explores the large reporter's plausible radius range
        path = tmp_path / "run.ini"
        path.write_text("[sweep]\nreporters = small, large, large@0.006\n")
        cfg = load_config(path)
        variant = cfg.sweep_reporters[2]
        assert variant.name == "large_r0.006"
        assert variant.D_um2_s == 0.52
        assert variant.r_um == pytest.approx(6e-3)

    def test_hash_is_stable_and_sensitive(self, tmp_path):
        base = load_config(None).config_hash()
        assert base == load_config(None).config_hash()
        changed = load_config(None, overrides={"cell.k": "41"}).config_hash()
        assert changed != base


class TestCliCommands:
    def test_kappa_prints_rate_and_diagnostics(self, capsys):
        assert main(["kappa"]) == 0
        out = capsys.readouterr().out
        assert "kappa_per_s = 0.177897" in out
        assert "delta2 = 0.15" in out
        assert "not << 1" in out

    def test_kappa_flag_overrides(self, capsys):
        assert main(["kappa", "--reporter", "large", "--alpha-deg", "25"]) == 0
        out = capsys.readouterr().out
        assert "kappa_per_s = 0.0243707" in out

    def test_simulate_writes_timeseries(self, tmp_path, capsys):
        code = main([
            "simulate", "--output-dir", str(tmp_path / "out"),
            "--t-end-s", "0.5", "--dump-junction",
        ])
        assert code == 0
        with open(tmp_path / "out" / "timeseries.csv") as fh:
            reader = csv.reader(fh)
            assert next(reader) == ["t_s", "rho_NE", "rho_ER"]
            body = list(reader)
        assert len(body) == 501
        assert float(body[-1][0]) == pytest.approx(0.5)
        junction = (tmp_path / "out" / "junction.csv").read_text().splitlines()
        assert junction[0].startswith("t_s,z_")
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert "config_sha256" in manifest

    def test_sweep_writes_summary_and_curves(self, tmp_path, capsys):
        code = main(["sweep", "--output-dir", str(tmp_path / "sw"), "--jobs", "2"])
        assert code == 0
        summary = (tmp_path / "sw" / "summary.csv").read_text().splitlines()
        assert len(summary) == 19
        curves = sorted((tmp_path / "sw" / "curves").glob("*.csv"))
        assert len(curves) == 18

    def test_fit_on_synthetic_cells(self, tmp_path, capsys):
        cells_dir = tmp_path / "cells"
        synthetic_cells(cells_dir, n_cells=6, kappa_per_s=0.1779,
                        noise_sd=0.05, seed=42)
        code = main([
            "fit", "--cells-dir", str(cells_dir),
            "--reference", str(cells_dir / "reference.csv"),
            "--background", "50.0",
            "--output-dir", str(tmp_path / "fit_out"),
        ])
        assert code == 0
        with open(tmp_path / "fit_out" / "fit_results.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        kappas = np.array([float(r["kappa_per_s"]) for r in rows])
        assert all(r["converged"] == "true" for r in rows)
        assert np.mean(kappas) == pytest.approx(0.1779, rel=0.05)

    def test_frap2d_estimates_diffusivity(self, tmp_path, capsys):
        from erneflux.fixtures import free_square_recovery

        inside_path, bleach_path = square_masks(tmp_path, size_px=96, bleach_px=24)
        pixel = 0.106
        t = np.arange(1, 40) * 0.05
        observed = free_square_recovery(
            t, bleach_edge_um=24 * pixel, d_um2_s=2.0,
            equilibrium_fraction=24 * 24 / 96**2,
        )
        observed.to_csv(tmp_path / "observed.csv")
        code = main([
            "frap2d", "--mask", str(inside_path), "--bleach", str(bleach_path),
            "--pixel-um", str(pixel), "--observed", str(tmp_path / "observed.csv"),
            "--particles", "50000", "--steps", "2048",
            "--output-dir", str(tmp_path / "f2d"), "--seed", "7",
        ])
        assert code == 0
        out = capsys.readouterr().out
        d_line = next(line for line in out.splitlines() if "D_um2_s" in line)
        d_hat = float(d_line.split("=")[1])
        assert d_hat == pytest.approx(2.0, rel=0.15)
        assert (tmp_path / "f2d" / "frap2d_curve.csv").exists()

    def test_check_passes_on_clean_build(self, capsys):
        assert main(["check"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert out.count("PASS") >= 5

    def test_error_is_single_line_on_stderr(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[cell]\nk = -3\n")
        code = main(["kappa", "-c", str(bad)])
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert len(err.strip().splitlines()) == 1

    def test_set_override(self, capsys):
        assert main(["kappa", "--set", "junction.alpha_deg=0"]) == 0
        out = capsys.readouterr().out
        # cylinder: kappa = k D pi R*^2 / (V_NE L)
        expected = 40 * 3.3 * math.pi * 9.25e-3**2 / (30.0 * 0.01)
        line = next(l for l in out.splitlines() if l.startswith("kappa_per_s"))
        assert float(line.split("=")[1]) == pytest.approx(expected, rel=1e-4)
