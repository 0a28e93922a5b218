"""Configuration, persistence, presets, and CLI tests."""

import os

import numpy as np
import pytest

from fracdrift.analysis import norm_report
from fracdrift.cli import main as cli_main
from fracdrift.errors import ConfigError, ParameterError, SnapshotFormatError
from fracdrift.harness import (
    DiagnosticsRecord,
    parse_config,
    positive_bump_field,
    random_smooth_field,
    read_snapshot,
    run_preset,
    shear_velocity,
    write_diagnostics_csv,
    write_snapshot,
)
from fracdrift.spectral import Grid, field_from_values

MINIMAL = """
[grid]
n = 32

[equation]
alpha = 0.25
"""


class TestParseConfig:
    def test_minimal_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.grid.points_per_axis == 32
        assert cfg.alpha == 0.25
        assert cfg.velocity == "sqg"
        assert cfg.dt == 1e-3
        assert cfg.molecule is None

    def test_unknown_key_lists_valid(self):
        with pytest.raises(ConfigError) as err:
            parse_config(MINIMAL + "\n[output]\nbogus = 1\n")
        assert "csv_every" in str(err.value)

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL + "\n[nonsense]\nx = 1\n")

    def test_sigma_bound_violation_named(self):
        text = MINIMAL + "\n[molecule]\nr = 0.05\nsigma = 0.5\nomega = 0.4\n"
        with pytest.raises(ParameterError) as err:
            parse_config(text)
        assert "sigma" in str(err.value)

    def test_omega_bound_violation_named(self):
        text = MINIMAL + "\n[molecule]\nr = 0.05\nsigma = 0.9\nomega = 0.6\n"
        with pytest.raises(ParameterError) as err:
            parse_config(text)
        assert "2*alpha" in str(err.value)

    def test_missing_alpha(self):
        with pytest.raises(ConfigError):
            parse_config("[grid]\nn = 32\n")

    def test_bad_alpha_range(self):
        with pytest.raises(ParameterError):
            parse_config("[grid]\nn = 32\n\n[equation]\nalpha = 0.8\n")


class TestSnapshotIO:
    def test_round_trip_bit_exact(self, tmp_path):
        g = Grid(2, 32, 5.0)
        f = random_smooth_field(g, 3)
        path = str(tmp_path / "field.fdt")
        write_snapshot(f, path)
        back = read_snapshot(path)
        assert back.grid == g
        assert np.array_equal(back.values, f.values)

    def test_wrong_magic(self, tmp_path):
        path = str(tmp_path / "bad.fdt")
        with open(path, "wb") as fh:
            fh.write(b"NOPE" + b"\x00" * 32)
        with pytest.raises(SnapshotFormatError):
            read_snapshot(path)

    def test_non_power_of_two_header(self, tmp_path):
        import struct

        path = str(tmp_path / "bad_n.fdt")
        with open(path, "wb") as fh:
            fh.write(b"FDT1")
            fh.write(struct.pack("<II", 2, 24))
            fh.write(struct.pack("<d", 1.0))
        with pytest.raises(SnapshotFormatError):
            read_snapshot(path)

    def test_truncated(self, tmp_path):
        import struct

        path = str(tmp_path / "short.fdt")
        with open(path, "wb") as fh:
            fh.write(b"FDT1")
            fh.write(struct.pack("<II", 2, 16))
            fh.write(struct.pack("<d", 1.0))
            fh.write(b"\x00" * 64)  # far fewer than 16*16*8 bytes
        with pytest.raises(SnapshotFormatError):
            read_snapshot(path)


class TestDiagnosticsCsv:
    def _record(self, t, seed):
        g = Grid(2, 16, 3.0)
        f = random_smooth_field(g, seed)
        return DiagnosticsRecord(t, norm_report(f, alpha=0.25, heavy=False), 1e-5)

    def test_empty_stream_header_only(self, tmp_path):
        path = str(tmp_path / "d.csv")
        write_diagnostics_csv([], path)
        lines = open(path).read().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("time,l1,l2,l4,linf,")

    def test_two_records_three_lines(self, tmp_path):
        path = str(tmp_path / "d.csv")
        write_diagnostics_csv([self._record(0.0, 1), self._record(0.1, 2)], path)
        assert len(open(path).read().splitlines()) == 3

    def test_seventeen_digit_round_trip(self, tmp_path):
        path = str(tmp_path / "d.csv")
        rec = self._record(0.1234567890123456789, 3)
        write_diagnostics_csv([rec], path)
        lines = open(path).read().splitlines()
        values = lines[1].split(",")
        assert float(values[0]) == rec.time
        assert float(values[1]) == rec.norms.lp[1.0]
        assert float(values[2]) == rec.norms.lp[2.0]


class TestFieldFactories:
    def test_smooth_field_grid_independent(self):
        # same seed samples the same function at different resolutions
        coarse = random_smooth_field(Grid(2, 32, 2 * np.pi), seed=5)
        fine = random_smooth_field(Grid(2, 64, 2 * np.pi), seed=5)
        assert np.max(np.abs(fine.values[::2, ::2] - coarse.values)) < 1e-12

    def test_smooth_field_mean_zero_bounded(self):
        f = random_smooth_field(Grid(2, 64, 2 * np.pi), seed=6, amplitude=0.7)
        assert abs(f.values.mean()) < 1e-13
        sup = np.max(np.abs(f.values))
        assert 0.05 < sup <= 0.7 + 1e-12

    def test_positive_bump_range(self):
        f = positive_bump_field(Grid(2, 64, 2 * np.pi))
        assert f.values.min() >= 0.0
        assert f.values.max() <= 1.0 + 1e-15
        # band-limited: only modes 0 and +-1 per axis
        spec = f.to_spectral().values
        spec_masked = spec.copy()
        spec_masked[:2, :2] = 0
        spec_masked[-1, :2] = 0
        assert np.max(np.abs(spec_masked)) < 1e-15

    def test_shear_divergence_free(self):
        v = shear_velocity(Grid(2, 64, 2 * np.pi), 2.0)
        assert np.max(np.abs(v.at(0.0)[0].values)) == pytest.approx(2.0, rel=1e-12)


class TestPresets:
    def test_transfer_zero_velocity_preset(self, tmp_path):
        status = run_preset("transfer", str(tmp_path), n=256, dt=5e-3, velocity="zero")
        assert status == 0
        summary = open(tmp_path / "transfer" / "summary.txt").read()
        assert "PASS" in summary and "FAIL" not in summary

    def test_besov_chain_preset_deterministic(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_preset("besov_chain", str(out1), n=32) == 0
        assert run_preset("besov_chain", str(out2), n=32) == 0
        csv1 = (out1 / "besov_chain" / "besov_chain.csv").read_bytes()
        csv2 = (out2 / "besov_chain" / "besov_chain.csv").read_bytes()
        assert csv1 == csv2

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            run_preset("nope")


class TestCli:
    def test_validate_ok(self, tmp_path, capsys):
        cfile = tmp_path / "run.ini"
        cfile.write_text(MINIMAL)
        assert cli_main(["validate", str(cfile)]) == 0
        assert "OK" in capsys.readouterr().out

    def test_validate_bad_config(self, tmp_path, capsys):
        cfile = tmp_path / "run.ini"
        cfile.write_text(MINIMAL + "\n[molecule]\nsigma = 0.5\nomega = 0.4\n")
        assert cli_main(["validate", str(cfile)]) == 2
        assert "sigma" in capsys.readouterr().err

    def test_run_small(self, tmp_path, capsys):
        cfile = tmp_path / "run.ini"
        cfile.write_text(
            "[grid]\nn = 32\n\n[equation]\nalpha = 0.25\ndt = 0.005\nt_end = 0.05\n"
            f"\n[output]\ndir = {tmp_path}/out\nsnapshot_every = 5\n"
        )
        assert cli_main(["run", str(cfile)]) == 0
        assert os.path.exists(tmp_path / "out" / "diagnostics.csv")
        assert os.path.exists(tmp_path / "out" / "summary.txt")
        snaps = [p for p in os.listdir(tmp_path / "out") if p.endswith(".fdt")]
        assert snaps

    def test_preset_cli(self, tmp_path, capsys):
        status = cli_main(["preset", "transfer", "--out", str(tmp_path),
                           "--n", "256", "--dt", "0.005", "--velocity", "zero"])
        assert status == 0
        assert "PASS" in capsys.readouterr().out


class TestMorePresets:
    def test_linfty_truncation_preset(self, tmp_path):
        status = run_preset("linfty_truncation", str(tmp_path), n=64, dt=5e-3)
        assert status == 0
        out = tmp_path / "linfty_truncation"
        assert (out / "truncation.csv").exists()
        body = (out / "truncation.csv").read_text().splitlines()
        assert body[0] == "R,twoR,sup_diff_half_box,max_sup_step_increase"
        assert float(body[1].split(",")[2]) >= 0.0

    def test_sqg_maxprinciple_preset_smoke(self, tmp_path):
        status = run_preset("sqg_maxprinciple", str(tmp_path), n=32, alpha=0.25,
                            dt=5e-3)
        assert status == 0
        summary = (tmp_path / "sqg_maxprinciple" / "summary.txt").read_text()
        assert "positivity" in summary and "FAIL" not in summary

    def test_failing_criterion_gives_nonzero_status(self, tmp_path, monkeypatch):
        from fracdrift import harness

        monkeypatch.setattr(
            harness, "_preset_besov_chain",
            lambda out, n: {"forced_failure": (False, dict(reason="synthetic"))},
        )
        status = run_preset("besov_chain", str(tmp_path), n=32)
        assert status == 1
        summary = (tmp_path / "besov_chain" / "summary.txt").read_text()
        assert summary.startswith("FAIL forced_failure")


class TestThreadCap:
    def test_env_var_caps_fft_workers(self, monkeypatch):
        from fracdrift.spectral import fft_workers

        monkeypatch.delenv("FRACDRIFT_THREADS", raising=False)
        assert fft_workers() == 1
        monkeypatch.setenv("FRACDRIFT_THREADS", "3")
        assert fft_workers() == 3
        monkeypatch.setenv("FRACDRIFT_THREADS", "junk")
        assert fft_workers() == 1
