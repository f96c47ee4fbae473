import subprocess
import sys

import pytest

from nlcl import diagnostics as dg
from nlcl import harness
from nlcl.cli import main
from nlcl.grid import Datum, Grid
from nlcl.local_solver import FluxModel, LocalRunConfig, run_local


def test_check_kernel(capsys):
    assert main(["check-kernel", "--kernel", "exp", "--eta", "0.125"]) == 0
    out = capsys.readouterr().out
    assert "c_eta(0.125) = 8" in out and "bracket = [8, " in out


def test_check_kernel_rejects_unnormalized(capsys):
    assert main(["check-kernel", "--kernel", "hat", "--eta", "0.25"]) == 2
    assert "normalized" in capsys.readouterr().err
    assert main(["check-kernel", "--kernel", "nope", "--eta", "0.25"]) == 2


def test_preset_with_env_output(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(harness.OUTPUT_ENV, str(tmp_path))
    assert main(["preset", "kernel_bounds"]) == 0
    assert (tmp_path / "kernel_bounds.csv").exists()
    assert main(["preset", "kernel_bounds", "--set", "eta_list"]) == 2


def test_simulate_bad_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("preset=max_principle\nresolution=high\n")
    assert main(["simulate", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "resolution" in err and "2" in err
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_simulate_velocity_range_violation(tmp_path, capsys):
    # density 2 drives W beyond the LWR admissible range [0, 1.5]
    cfg = tmp_path / "hot.cfg"
    cfg.write_text(f"kernel=exp\neta_list=0.5\ndatum=0:1:2\nx_min=-1\nx_max=3\nn_cells=80\nt_end=0.1\n"
                   f"output_dir={tmp_path / 'out'}\n")
    assert main(["simulate", "--config", str(cfg)]) == 3


def test_entropy_audit_exit_codes(tmp_path, capsys):
    g = Grid(-2.0, 2.0, 400)
    r = run_local(LocalRunConfig(g, Datum.riemann(1.0, 0.0), FluxModel.lwr(), 1.0, record_steps=True))
    harness.write_trajectory(tmp_path / "fan", r.trajectory)
    assert main(["entropy-audit", "--trajectory", str(tmp_path / "fan")]) == 0
    bad = dg.frozen_jump_trajectory(g, 1.0, 0.0, 0.0, 1.0, 400)
    harness.write_trajectory(tmp_path / "jump", bad)
    assert main(["entropy-audit", "--trajectory", str(tmp_path / "jump")]) == 3
    assert "FAILED" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "nlcl.cli", "check-kernel", "--kernel", "fig3_piecewise",
                          "--eta", "0.25"], capture_output=True, text=True, cwd=tmp_path)
    assert out.returncode == 0
    assert "admissible" in out.stdout


@pytest.mark.parametrize("argv", [[], ["preset", "fig9"]])
def test_argparse_errors(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
