"""Command-line interface: configs, CSV output, exit codes, validation."""

import csv
import io
import json
import math

import pytest
from click.testing import CliRunner

from coupled_opo.cli import CSV_COLUMNS, load_config, main

EQ_REF = 0.1551371393349197


@pytest.fixture()
def runner():
    return CliRunner()


def write_config(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


SINGLE_PUMP = """
[run]
k = 2
R_x = 0.9
g = 1.0
eta = 0.99
single_sided = true
delta = 1.0
theta = auto
tau = auto
"""


class TestLoadConfig:
    def test_case_sensitive_keys(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "[run]\nR_x = 0.5\n"))
        assert cfg["run"]["R_x"] == "0.5"

    def test_unknown_key(self, tmp_path):
        from coupled_opo.cli import ConfigError

        with pytest.raises(ConfigError, match="unknown key"):
            load_config(write_config(tmp_path, "[run]\nbogus = 1\n"))

    def test_unknown_section(self, tmp_path):
        from coupled_opo.cli import ConfigError

        with pytest.raises(ConfigError, match="unknown config section"):
            load_config(write_config(tmp_path, "[plot]\nx = 1\n"))

    def test_duplicate_key(self, tmp_path):
        from coupled_opo.cli import ConfigError

        with pytest.raises(ConfigError, match="cannot parse"):
            load_config(write_config(tmp_path, "[run]\ng = 1\ng = 2\n"))


class TestEval:
    def test_single_pump_reference(self, runner, tmp_path):
        cfg = write_config(tmp_path, SINGLE_PUMP)
        res = runner.invoke(main, ["eval", "--config", cfg])
        assert res.exit_code == 0
        rows = parse_csv(res.output)
        assert len(rows) == 1
        assert float(rows[0]["I"]) == pytest.approx(EQ_REF, abs=2e-4)
        assert rows[0]["regime"] == "async"
        assert rows[0]["error"] == ""

    def test_csv_schema(self, runner, tmp_path):
        cfg = write_config(tmp_path, SINGLE_PUMP)
        res = runner.invoke(main, ["eval", "--config", cfg])
        header = res.output.splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)

    def test_out_file_and_sidecar(self, runner, tmp_path):
        cfg = write_config(tmp_path, SINGLE_PUMP)
        out = tmp_path / "point.csv"
        res = runner.invoke(main, ["eval", "--config", cfg, "--out", str(out)])
        assert res.exit_code == 0
        assert out.exists()
        meta = json.loads((tmp_path / "point.csv.meta.json").read_text())
        assert meta["command"] == "eval"

    def test_precision_flag(self, runner, tmp_path):
        cfg = write_config(tmp_path, SINGLE_PUMP)
        res = runner.invoke(main, ["eval", "--config", cfg, "--precision", "3"])
        row = parse_csv(res.output)[0]
        assert len(row["I"].replace(".", "").lstrip("0")) <= 3

    def test_above_threshold_rejected(self, runner, tmp_path):
        cfg = write_config(tmp_path, "[run]\nR_x = 1.0\n")
        res = runner.invoke(main, ["eval", "--config", cfg])
        assert res.exit_code == 2
        assert "threshold" in res.output

    def test_dphi_phi_y_conflict(self, runner, tmp_path):
        cfg = write_config(tmp_path, "[run]\ndphi = 0.5\nphi_y = 0.5\n")
        res = runner.invoke(main, ["eval", "--config", cfg])
        assert res.exit_code == 2
        assert "either dphi or phi_y" in res.output

    def test_bad_eta(self, runner, tmp_path):
        cfg = write_config(tmp_path, "[run]\nR_x = 0.5\neta = 1.5\n")
        res = runner.invoke(main, ["eval", "--config", cfg])
        assert res.exit_code == 2
        assert "eta" in res.output


class TestOptimize:
    def test_matches_eval_auto(self, runner, tmp_path):
        cfg = write_config(tmp_path, SINGLE_PUMP.replace("theta = auto\ntau = auto\n", ""))
        res = runner.invoke(
            main, ["optimize", "--config", cfg, "--over", "theta,tau"]
        )
        assert res.exit_code == 0
        row = parse_csv(res.output)[0]
        assert float(row["I"]) == pytest.approx(EQ_REF, abs=2e-4)
        # the optimal delay phase is pi/2 modulo pi (3pi/2 is the mirrored
        # optimum inside the [0, 2pi) delay window)
        s = abs(float(row["tau"]) * float(row["delta"])) % math.pi
        assert s == pytest.approx(math.pi / 2.0, abs=1e-3)

    def test_bad_coordinate(self, runner, tmp_path):
        cfg = write_config(tmp_path, SINGLE_PUMP)
        res = runner.invoke(main, ["optimize", "--config", cfg, "--over", "eta"])
        assert res.exit_code == 2
        assert "cannot optimize" in res.output


class TestSweep:
    CFG = """
[run]
k = 2
R_x = 0.9
R_y = 0.9
g = 1.0
eta = 0.99
[sweep]
axes = delta=0:2:5
optimize = theta
"""

    def test_axes_sweep(self, runner, tmp_path):
        cfg = write_config(tmp_path, self.CFG)
        res = runner.invoke(main, ["sweep", "--config", cfg])
        assert res.exit_code == 0
        rows = parse_csv(res.output)
        assert [float(r["delta"]) for r in rows] == [0.0, 0.5, 1.0, 1.5, 2.0]
        assert all(float(r["I"]) < 1.0 for r in rows)

    def test_missing_axes(self, runner, tmp_path):
        cfg = write_config(tmp_path, "[run]\nR_x = 0.5\n[sweep]\n")
        res = runner.invoke(main, ["sweep", "--config", cfg])
        assert res.exit_code == 2
        assert "axes" in res.output

    def test_bad_axis_token(self, runner, tmp_path):
        cfg = write_config(
            tmp_path, "[run]\nR_x = 0.5\n[sweep]\naxes = delta=0:2\n"
        )
        res = runner.invoke(main, ["sweep", "--config", cfg])
        assert res.exit_code == 2
        assert "bad axis spec" in res.output

    def test_metadata_sidecar(self, runner, tmp_path):
        cfg = write_config(tmp_path, self.CFG)
        out = tmp_path / "s.csv"
        res = runner.invoke(main, ["sweep", "--config", cfg, "--out", str(out)])
        assert res.exit_code == 0
        meta = json.loads((tmp_path / "s.csv.meta.json").read_text())
        assert meta["rows"] == 5
        assert meta["optimize_over"] == ["theta"]

    def test_worker_determinism(self, runner, tmp_path):
        cfg = write_config(tmp_path, self.CFG)
        outs = []
        for workers in (1, 3):
            res = runner.invoke(
                main, ["sweep", "--config", cfg, "--workers", str(workers)]
            )
            assert res.exit_code == 0
            outs.append(res.output)
        assert outs[0] == outs[1]

    def test_axis_override(self, runner, tmp_path):
        cfg = write_config(tmp_path, self.CFG)
        res = runner.invoke(
            main, ["sweep", "--config", cfg, "--axis", "delta=0:1:3"]
        )
        rows = parse_csv(res.output)
        assert [float(r["delta"]) for r in rows] == [0.0, 0.5, 1.0]


class TestFigure:
    def test_preset_runs(self, runner):
        res = runner.invoke(main, ["figure", "fig2-sync", "--resolution", "3"])
        assert res.exit_code == 0
        rows = parse_csv(res.output)
        assert len(rows) == 9

    def test_unknown_preset(self, runner):
        res = runner.invoke(main, ["figure", "fig9"])
        assert res.exit_code == 2


class TestValidate:
    def test_passes(self, runner):
        res = runner.invoke(main, ["validate", "--skip-langevin"])
        assert res.exit_code == 0
        assert res.output.count("[PASS]") == 3
        assert "[FAIL]" not in res.output

    def test_reports_failure(self, runner):
        res = runner.invoke(
            main, ["validate", "--skip-langevin", "--break-tolerance"]
        )
        assert res.exit_code == 1
        assert "[FAIL] analytic-oracle" in res.output

    def test_repeatable(self, runner):
        a = runner.invoke(main, ["validate", "--skip-langevin", "--seed", "7"])
        b = runner.invoke(main, ["validate", "--skip-langevin", "--seed", "7"])
        assert a.output == b.output


def test_version(runner):
    res = runner.invoke(main, ["--version"])
    assert res.exit_code == 0
