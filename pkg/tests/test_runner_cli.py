import subprocess
import sys

import numpy as np
import pytest

from camnet import cli, runner
from camnet.scenario import bundled, load_scenario, serialize
from camnet.verify import lemma_suite

REQUIRED_SYMBOLS = ("rho_p", "rho_R", "phi_m", "zeta", "beta", "W", "diam",
                    "epsilon_R", "epsilon_R_prime", "alpha_R")


@pytest.fixture(scope="module")
def short(golden):
    return golden.with_overrides(t_final=0.5)


@pytest.fixture(scope="module")
def short_run(short, tmp_path_factory):
    out = tmp_path_factory.mktemp("short")
    return runner.run(short, out), out


def test_series_header_and_shape(short_run):
    res, out = short_run
    lines = (out / "series.csv").read_text().splitlines()
    assert lines[0].startswith("# t [s]")
    header = lines[1].split(",")
    assert header == runner.series_header(5)
    assert len(header) == 1 + 6 * 5 + 4
    assert header[:7] == ["t", "p1x", "p1y", "p1z", "r1x", "r1y", "r1z"]
    assert header[-4:] == ["U_p", "U_R", "lambda_size", "in_S"]
    _, data = runner.read_series(out / "series.csv")
    assert data.shape == (len(res.trajectory), len(header))
    assert data[-1, 0] == pytest.approx(0.5)


def test_series_values_match_trajectory(short_run):
    res, out = short_run
    _, data = runner.read_series(out / "series.csv")
    assert np.array_equal(data[:, 0], res.trajectory.t)
    assert np.array_equal(data[:, 1:4], res.trajectory.p[:, 0])
    assert np.array_equal(data[:, -4], res.report.U_p)


def test_zero_duration_gives_one_row(short, tmp_path):
    runner.run(short.with_overrides(t_final=0.0), tmp_path)
    _, data = runner.read_series(tmp_path / "series.csv")
    assert data.shape[0] == 1 and data[0, 0] == 0.0


def test_rerun_is_byte_identical(short, short_run, tmp_path):
    runner.run(short, tmp_path)
    assert (tmp_path / "series.csv").read_bytes() == (short_run[1] / "series.csv").read_bytes()
    assert (tmp_path / "summary.txt").read_bytes() == (short_run[1] / "summary.txt").read_bytes()


def test_summary_contents(short_run):
    res, out = short_run
    text = (out / "summary.txt").read_text()
    keys = [ln.split(" = ")[0] for ln in text.splitlines()]
    for sym in REQUIRED_SYMBOLS:
        assert sym in keys
    assert res.summary["W"] == 3 and res.summary["diam"] == 2
    assert res.summary["viewing"] == "1 2 3"
    # at k = 1, sqrt(k W) exceeds sqrt(beta): only the refined bound is undefined
    assert res.summary["theorem_applicable"] is True
    assert "epsilon_R_prime = nan" in text


def test_recompute_agrees_with_run(short, short_run):
    res, out = short_run
    d = runner.recompute(out / "series.csv", short)
    assert d["records"] == len(res.trajectory)
    sp, sR = res.settled()
    assert d["settled_U_p"] == pytest.approx(sp, rel=1e-12)
    assert d["settled_U_R"] == pytest.approx(sR, rel=1e-9)
    assert d["max_abs_dev_U_p"] < 1e-14 and d["max_abs_dev_U_R"] < 1e-13


def test_recompute_rejects_mismatched_scenario(short_run):
    single = load_scenario(bundled("single.scn"))
    with pytest.raises(ValueError):
        runner.recompute(short_run[1] / "series.csv", single)


def test_read_series_rejects_ragged_rows(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# units\nt,U_p\n0,1\n1\n")
    with pytest.raises(ValueError):
        runner.read_series(p)


def test_suite_outcomes():
    assert lemma_suite(42, 200).passed
    assert not lemma_suite(42, 200, _corrupt=True).passed
    with pytest.warns(UserWarning):
        rep = lemma_suite(42, 0)
    assert rep.passed and not rep.checks


# command line

def test_cli_simulate(short, tmp_path, capsys):
    scn = tmp_path / "s.scn"
    scn.write_text(serialize(short))
    code = cli.main(["simulate", str(scn), "--out", str(tmp_path / "o"), "--ks", "50", "--tfinal", "0.2"])
    assert code == runner.EXIT_OK
    out = capsys.readouterr().out
    assert "k_s = 50" in out and "t_final = 0.20000000000000001" in out
    assert (tmp_path / "o" / "series.csv").is_file()


def test_cli_report_and_mean(short, short_run, tmp_path, capsys):
    scn = tmp_path / "s.scn"
    scn.write_text(serialize(short))
    assert cli.main(["report", str(short_run[1] / "series.csv"), str(scn)]) == runner.EXIT_OK
    assert "settled_U_p = " in capsys.readouterr().out
    assert cli.main(["mean", str(bundled("five_camera.scn"))]) == runner.EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("p_star = 0.47") and "W = 3" in out


def test_cli_input_errors(tmp_path, capsys):
    assert cli.main(["simulate", str(tmp_path / "missing.scn")]) == runner.EXIT_INPUT
    bad = tmp_path / "bad.scn"
    bad.write_text("[gains]\nk_e = x\n")
    assert cli.main(["mean", str(bad)]) == runner.EXIT_INPUT
    assert "line 2, column 7" in capsys.readouterr().err
    assert cli.main(["simulate", str(bundled("five_camera.scn")), "--ks", "-1",
                     "--out", str(tmp_path)]) == runner.EXIT_INPUT


def test_cli_simulation_abort(tmp_path, capsys):
    code = cli.main(["simulate", str(bundled("five_camera.scn")), "--error-mode", "visual",
                     "--out", str(tmp_path)])
    assert code == runner.EXIT_SIMULATION
    assert "camera 1" in capsys.readouterr().err


def test_cli_verify(monkeypatch, capsys):
    assert cli.main(["verify", "--trials", "100"]) == runner.EXIT_OK
    assert "result = PASS" in capsys.readouterr().out
    with pytest.warns(UserWarning):
        assert cli.main(["verify", "--trials", "0"]) == runner.EXIT_OK
    assert "WARNING" in capsys.readouterr().out
    monkeypatch.setattr(cli, "lemma_suite", lambda seed, trials: lemma_suite(seed, trials, _corrupt=True))
    assert cli.main(["verify", "--trials", "100"]) == runner.EXIT_SUITE


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "camnet", "mean", str(bundled("five_camera.scn"))],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0 and "rho_p = " in r.stdout
