import numpy as np
import pytest

from roughwall.cli import EXIT_CONFIG, EXIT_OK, load_config, main

COARSE = ["--set", "mesh.cells_per_period=8", "--set", "mesh.ny=16", "--set", "mesh.n_rough=2", "--set", "mesh.n_wall=6"]


def _write(tmp_path, text):
    p = tmp_path / "run.yaml"
    p.write_text(text)
    return str(p)


def test_check_accepts_defaults(capsys):
    assert main(["check"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "cells_per_period: 32" in out


@pytest.mark.parametrize(
    "override, message",
    [
        ("flow.eps=0.3", "positive integer"),
        ("profile.amplitude=1.5", "below -1"),
        ("mesh.bogus=1", "Extra inputs"),
        ("ell=0.9", "ell"),
    ],
)
def test_check_rejects_bad_config(capsys, override, message):
    assert main(["check", "--set", override]) == EXIT_CONFIG
    assert message in capsys.readouterr().err


def test_yaml_errors_report_line_numbers(tmp_path, capsys):
    path = _write(tmp_path, "profile:\n  kind: cosine\n  amplitud: 0.2\n")
    assert main(["check", "--config", path]) == EXIT_CONFIG
    assert f"{path}:3: profile.amplitud" in capsys.readouterr().err


def test_flags_override_file(tmp_path):
    path = _write(tmp_path, "out: from_file\nworkers: 2\n")
    cfg = load_config(path, ["flow.eps=0.0625"], out="from_flag", workers=3)
    assert (cfg.out, cfg.workers, cfg.flow.eps) == ("from_flag", 3, 0.0625)


def test_sweep_needs_three_periods(capsys):
    assert main(["sweep", "--set", "flow.eps_list=[0.125, 0.0625]"]) == EXIT_CONFIG
    assert "need ≥3 for rate fit" in capsys.readouterr().err


def test_steady_flat_flux(tmp_path, capsys):
    code = main(["steady", "--out", str(tmp_path), "--set", "profile.kind=flat", *COARSE])
    assert code == EXIT_OK
    rows = (tmp_path / "steady_summary.csv").read_text().splitlines()
    flux = float(rows[1].split(",")[1])
    assert flux == pytest.approx(1 / 12, abs=1e-10)
    assert (tmp_path / "steady_field.txt").exists()


def test_cell_flat_and_shifted(tmp_path):
    out = tmp_path / "flat"
    assert main(["cell", "--out", str(out), "--set", "profile.kind=flat", "--set", "cell.H=4", *COARSE]) == EXIT_OK
    assert "# alpha1 0\n" in (out / "cell_summary.csv").read_text()
    out = tmp_path / "shift"
    args = ["cell", "--out", str(out), "--set", "profile.kind=shifted_flat", "--set", "profile.amplitude=0.5", "--set", "cell.H=4"]
    assert main(args + COARSE) == EXIT_OK
    alpha = float((out / "cell_summary.csv").read_text().splitlines()[2].split()[-1])
    assert alpha == pytest.approx(0.5, abs=1e-8)


def test_cell_output_is_byte_identical(tmp_path):
    args = ["--set", "cell.H=6", "--set", "cell.H_list=[4, 6]", *COARSE]
    assert main(["cell", "--out", str(tmp_path / "a"), *args]) == EXIT_OK
    assert main(["cell", "--out", str(tmp_path / "b"), *args]) == EXIT_OK
    for name in ("cell_summary.csv", "cell_alpha_stability.csv", "cell_decay.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_unsteady_steady_exact(tmp_path):
    args = ["unsteady", "--out", str(tmp_path), "--set", "unsteady.initial=steady_exact", "--set", "unsteady.T_end=0.2",
            "--set", "unsteady.dt=0.05", "--set", "flow.eps=0.25", "--set", "cell.H=4", *COARSE]
    assert main(args) == EXIT_OK
    data = np.loadtxt(tmp_path / "decay_trace.csv", delimiter=",", skiprows=1)
    assert np.all(data[:, 1] <= 1e-16)
    assert (tmp_path / "final_field.txt").exists()


def test_sweep_writes_report_and_plots(tmp_path):
    args = ["sweep", "--out", str(tmp_path), "--set", "flow.eps_list=[0.5, 0.25, 0.125]", "--set", "cell.H=4", *COARSE]
    assert main(args) == EXIT_OK
    assert (tmp_path / "sweep.csv").read_text().splitlines()[1].startswith("eps,alpha1,")
    for name in ("errors_eff", "errors_W", "errors_perturbation", "side_layers"):
        assert (tmp_path / f"sweep_{name}.svg").exists()


def test_numerical_failure_exit_code(capsys):
    args = ["steady", "--set", "flow.mode=navier_stokes", "--set", "solver.tol=1e-300", "--set", "solver.max_iters=1",
            "--set", "flow.eps=0.25", *COARSE]
    assert main(args) == 2
    assert "numerical failure" in capsys.readouterr().err
