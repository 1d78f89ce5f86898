import filecmp
import os

import numpy as np
import pytest

from mertonrr import cli
from mertonrr.analytics import structural_recovery

SMALL = ["--realizations", "300", "--portfolio-size", "100", "--steps", "50", "--quiet"]


def run(*args):
    return cli.main([str(a) for a in args])


def test_analytic_outputs(tmp_path, capsys):
    assert run("analytic", "--out-dir", tmp_path) == 0
    names = sorted(os.listdir(tmp_path))
    assert names == ["analytic_report.txt", "loss_pdf_analytic.csv", "structural_curves.csv",
                     "xm_curves.csv"]
    for n in names:
        assert (tmp_path / n).read_text().startswith("# config: ")
    assert "method = analytic-xm" in capsys.readouterr().out


def test_analytic_b_sweep(tmp_path):
    assert run("analytic", "--out-dir", tmp_path, *sum((["--b", b] for b in
                                                        (0.1, 0.2, 0.3, 0.4, 0.5)), [])) == 0
    rows = np.genfromtxt(tmp_path / "structural_curves.csv", delimiter=",", skip_header=2)
    assert sorted(set(rows[:, 0])) == [0.1, 0.2, 0.3, 0.4, 0.5]
    sel = rows[:, 0] == 0.3
    assert np.allclose(rows[sel, 2], structural_recovery(rows[sel, 1], 0.3))


def test_degenerate_correlation_is_config_error(tmp_path, capsys):
    assert run("analytic", "--corr", 1, "--out-dir", tmp_path) == cli.EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_bad_flag_value_is_config_error(tmp_path):
    assert run("simulate", "--portfolio-size", 0, "--out-dir", tmp_path) == cli.EXIT_CONFIG
    assert run("simulate", "--steps", "2.5", "--out-dir", tmp_path) == cli.EXIT_CONFIG


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run("analytic", "--out-dir", blocker) == cli.EXIT_IO


def test_simulate_outputs_and_thread_independence(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("simulate", *SMALL, "--threads", 1, "--out-dir", a) == 0
    assert run("simulate", *SMALL, "--threads", 3, "--out-dir", b) == 0
    names = sorted(os.listdir(a))
    assert names == ["binned_curves.csv", "loss_histogram.csv", "loss_pdf_transformed.csv",
                     "outcomes.csv", "pd_histogram.csv", "simulation_report.txt"]
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert mismatch == [] and errors == []
    header = (a / "outcomes.csv").read_text().splitlines()[:2]
    assert "threads" not in header[0] and "seed=" in header[0]
    assert header[1] == "realization,x_m,n_default,pd_hat,loss_hat,recovery_hat"


@pytest.mark.parametrize("process", ["jump-diffusion", "garch"])
def test_simulate_other_processes(tmp_path, process):
    assert run("simulate", *SMALL, "--process", process, "--out-dir", tmp_path) == 0
    assert (tmp_path / "simulation_report.txt").exists()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("realizations = 200\nportfolio-size = 50\nsteps = 20\nseed = 7\n")
    assert run("simulate", "--config", cfg, "--seed", 8, "--quiet", "--out-dir", tmp_path) == 0
    head = (tmp_path / "outcomes.csv").read_text().splitlines()[0]
    assert "realizations=200" in head and "seed=8" in head and "portfolio_size=50" in head


def test_config_file_unknown_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[run]\nvolatility = 0.2\n")
    assert run("analytic", "--config", cfg, "--out-dir", tmp_path) == cli.EXIT_CONFIG


def test_report_from_outcomes(tmp_path, capsys):
    assert run("simulate", *SMALL, "--out-dir", tmp_path) == 0
    capsys.readouterr()
    assert run("report", "--input", tmp_path / "outcomes.csv", "--portfolio-size", 100,
               "--steps", 50, "--out-dir", tmp_path / "r") == 0
    out = capsys.readouterr().out
    sim = (tmp_path / "simulation_report.txt").read_text().split("\n", 1)[1]
    assert out.split("\n\n")[0] == sim.split("\n\n")[0]


def test_calibrate_noiseless(tmp_path):
    pd = np.linspace(0.01, 0.5, 20)
    lines = ["year,default_rate,recovery_rate"]
    lines += [f"{1980 + i},{float(p)!r},{float(r)!r}" for i, (p, r) in enumerate(zip(pd, structural_recovery(pd, 0.3)))]
    lines.append("2000,0.0,0.6")
    src = tmp_path / "obs.csv"
    src.write_text("\n".join(lines) + "\n")
    with pytest.warns(UserWarning, match="line 22"):
        assert run("calibrate", "--input", src, "--out-dir", tmp_path) == 0
    rep = (tmp_path / "fit_report.txt").read_text()
    b_hat = float(next(l for l in rep.splitlines() if l.startswith("b_hat")).split("=")[1])
    assert b_hat == pytest.approx(0.3, abs=1e-6)
    assert (tmp_path / "fitted_curve.csv").exists()


def test_calibrate_malformed_row(tmp_path, capsys):
    src = tmp_path / "obs.csv"
    src.write_text("default_rate,recovery_rate\n0.1,0.5\n0.2,oops\n")
    assert run("calibrate", "--input", src, "--out-dir", tmp_path) == cli.EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err


def test_calibrate_missing_file(tmp_path):
    assert run("calibrate", "--input", tmp_path / "nope.csv", "--out-dir", tmp_path) == cli.EXIT_IO


def test_curves(tmp_path):
    assert run("curves", "--b", 0.2, "--out-dir", tmp_path) == 0
    rows = np.genfromtxt(tmp_path / "structural_curves.csv", delimiter=",", skip_header=2)
    assert set(rows[:, 0]) == {0.2}


def test_help_exits_cleanly(capsys):
    assert cli.main(["--help"]) == 0
