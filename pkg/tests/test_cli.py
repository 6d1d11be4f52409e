import csv
import io

import numpy as np
import pytest

from squashlab import cli
from squashlab.config import ScenarioConfig, build_config, load_config


def run(argv, capsys):
    err = io.StringIO()
    status = cli.run(argv, err=err)
    return status, capsys.readouterr().out, err.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_spectra_worked_example(capsys):
    status, out, _ = run(["--mode", "spectra", "--L", "0.25", "--ey", "0.95", "--ex", "0",
                          "--n-bins", "3"], capsys)
    assert status == 0
    r = rows(out)[0]
    assert list(r) == ["omega", "Sx", "Sy", "product", "sum"]
    assert float(r["Sx"]) == 0.25
    assert float(r["Sy"]) == pytest.approx(0.051948, abs=1e-6)
    assert float(r["sum"]) == pytest.approx(0.301948, abs=1e-6)


def test_atom_vacuum_decay(capsys):
    status, out, _ = run(["--mode", "atom", "--eta", "0", "--L", "1", "--z0", "1", "--t-max", "5"], capsys)
    assert status == 0
    data = rows(out)
    t = np.array([float(r["t"]) for r in data])
    z = np.array([float(r["z"]) for r in data])
    np.testing.assert_allclose(z, 2 * np.exp(-t) - 1, atol=1e-11)


def test_csv_format_and_file_output(tmp_path, capsys):
    path = tmp_path / "out.csv"
    status, out, _ = run(["--mode", "spectra", "--L", "0.5", "--ex", "0.5", "--n-bins", "5",
                          "--out", str(path)], capsys)
    assert status == 0 and out == ""
    lines = path.read_text().splitlines()
    assert lines[0] == "omega,Sx,Sy,product,sum"
    assert len(lines) == 6
    assert lines[1].split(",")[1] == f"{1 / 3:.12g}"


def test_config_file_override(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# scenario\nmode = spectra\nL = 0.25\n")
    cfg = build_config(load_config(cfg_file), {"L": 0.5})
    assert cfg.L == 0.5
    assert build_config(load_config(cfg_file)).L == 0.25


def test_infeasible_config_names_lines(tmp_path, capsys):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text("mode = spectra\nepsilon_x = 0.6\nepsilon_y = 0.6\n")
    status, _, err = run(["--config", str(cfg_file)], capsys)
    assert status == 1
    assert "epsilon_x + epsilon_y > 1" in err
    assert "line 2" in err and "line 3" in err


def test_infeasible_flags(capsys):
    status, _, err = run(["--mode", "spectra", "--ex", "0.7", "--ey", "0.4"], capsys)
    assert status == 1
    assert "epsilon_x + epsilon_y > 1 (--ex, --ey)" in err


def test_empty_file_uses_defaults(tmp_path, capsys):
    cfg_file = tmp_path / "empty.cfg"
    cfg_file.write_text("")
    status, _, err = run(["--config", str(cfg_file), "--mode", "atom"], capsys)
    assert status == 0
    for line in ScenarioConfig(mode="atom").echo().splitlines():
        assert line in err
    assert "tau = 0.001" in err and "bandwidth = 100.0" in err


@pytest.mark.parametrize("text,match", [
    ("mode = spectra\nfoo = 1\n", "line 2: unknown key 'foo'"),
    ("mode = spectra\nL = 0,25\n", "line 2: malformed number for 'L'"),
    ("mode = spectra\nL\n", "line 2: expected 'key = value'"),
])
def test_config_errors(tmp_path, capsys, text, match):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text(text)
    status, _, err = run(["--config", str(cfg_file)], capsys)
    assert status == 1
    assert match in err


def test_bad_flags(capsys):
    assert run(["--mode", "nonsense"], capsys)[0] == 1
    assert run(["--L", "1"], capsys)[0] == 1  # no mode
    assert run(["--mode", "spectra", "--L", "-1"], capsys)[0] == 1
    assert run(["--mode", "spectra", "--gx", "1"], capsys)[0] == 1
    assert run(["--config", "/nonexistent/file.cfg"], capsys)[0] == 1


def test_seed_environment_fallback(monkeypatch):
    monkeypatch.setenv("SQUASHLAB_SEED", "42")
    assert build_config({}, {"mode": "loop-sim"}).seed == 42
    assert build_config({}, {"mode": "loop-sim", "seed": 7}).seed == 7
    monkeypatch.delenv("SQUASHLAB_SEED")
    assert build_config({}, {"mode": "loop-sim"}).seed == 0


LOOP = ["--mode", "loop-sim", "--ex", "0.5", "--gx", "-1", "--samples", str(2**16),
        "--segment-length", "1024", "--omega-max", "2000"]


def test_loop_sim_deterministic(capsys, monkeypatch):
    status, out1, err = run(LOOP + ["--seed", "3"], capsys)
    assert status == 0
    assert "within 3 SE" in err
    _, out2, _ = run(LOOP + ["--seed", "3"], capsys)
    _, out3, _ = run(LOOP + ["--seed", "4"], capsys)
    assert out1 == out2 and out1 != out3
    monkeypatch.setenv("SQUASHLAB_SEED", "3")
    assert run(LOOP, capsys)[1] == out1
    data = rows(out1)
    assert list(data[0]) == ["omega", "S_est", "S_err", "S_analytic"]
    assert float(data[0]["S_analytic"]) == pytest.approx(0.5)
    assert all(0.0 <= float(r["omega"]) <= 2000 for r in data)


def test_loop_sim_unstable_is_numerical_failure(capsys):
    status, _, err = run(["--mode", "loop-sim", "--ex", "0.5", "--gx", "1.5", "--samples", str(2**14),
                          "--segment-length", "1024"], capsys)
    assert status == 2
    assert "unstable" in err


def test_fluorescence_columns(capsys):
    status, out, _ = run(["--mode", "fluorescence", "--eta", "0.5", "--L", "0.5", "--omega-min", "-5",
                          "--omega-max", "5", "--n-bins", "11"], capsys)
    assert status == 0
    data = rows(out)
    assert list(data[0]) == ["omega", "P_closed_form", "P_regression", "ratio"]
    mid = data[5]
    assert float(mid["omega"]) == 0.0
    assert float(mid["P_closed_form"]) == pytest.approx(0.008842, abs=1e-6)
    ratios = [float(r["ratio"]) for r in data]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-6)


def test_spectra_notes_unstable_gain(capsys):
    status, _, err = run(["--mode", "spectra", "--ex", "0.5", "--gx", "-5", "--tau", "0.02"], capsys)
    assert status == 0
    assert "loop stability check: unstable" in err


def test_auto_gain_perfect_detector_needs_explicit_gain(capsys):
    status, _, err = run(["--mode", "spectra", "--ex", "1"], capsys)
    assert status == 1 and "gx = auto" in err
    assert run(["--mode", "spectra", "--ex", "1", "--gx", "-10"], capsys)[0] == 0


def test_verify_mode(capsys):
    status, out, _ = run(["--mode", "verify"], capsys)
    lines = [ln for ln in out.splitlines() if ln.startswith("[")]
    assert len(lines) == 9
    assert all(ln.startswith("[PASS]") for ln in lines)
    assert status == 0
    assert "9/9 criteria passed" in out


def test_main_exit_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["--mode", "spectra", "--ex", "0.9", "--ey", "0.9"])
    assert exc.value.code == 1
