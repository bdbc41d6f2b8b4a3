import csv
import json

import pytest

from iptdesign.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, format_number, main

from conftest import TABLE1_PATH


def _lines(capsys):
    out = capsys.readouterr().out
    return dict(l.split(" = ", 1) for l in out.splitlines() if " = " in l)


def test_design_constants_class_e(tmp_path, capsys):
    assert main(["design-constants", "--variant", "class-e", "--out", str(tmp_path)]) == EXIT_OK
    kv = _lines(capsys)
    assert float(kv["q"]) == pytest.approx(1.2915, rel=5e-3)
    assert kv["physical"] == "true"
    data = json.loads((tmp_path / "design_constants.json").read_text())
    assert data["q"] == pytest.approx(float(kv["q"]), rel=1e-11)


def test_design_constants_class_ef_warns(capsys):
    assert main(["design-constants", "--variant", "class-ef"]) == EXIT_OK
    cap = capsys.readouterr()
    assert "warning" in cap.err
    assert "q2 = " in cap.out and "x_norm_label = w*X*C1" in cap.out


@pytest.mark.parametrize("argv", [
    ["design-constants", "--duty", "1.5"],
    ["design-constants", "--variant", "class-g"],
    ["solve", "--config", str(TABLE1_PATH), "--k", "1.0"],
    ["solve", "--config", str(TABLE1_PATH), "--harmonics", "0"],
    ["solve"],
    [],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == EXIT_USAGE


def test_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.conf"
    bad.write_text("topology.nonsense = 1\n")
    assert main(["solve", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "bad.conf:1" in capsys.readouterr().err


def test_solve_outputs(tmp_path, capsys):
    assert main(["solve", "--config", str(TABLE1_PATH), "--out", str(tmp_path)]) == EXIT_OK
    with open(tmp_path / "waveforms.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["theta_rad", "v_ds_V", "i_o_A", "v_load_V"]
    assert len(rows) == 4097
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["N"] == 30 and rep["residual"] < 1e-10
    gap = rep["p_in_W"] - rep["p_out_W"] - sum(rep["losses_W"].values())
    assert abs(gap) < 1e-3 * rep["p_in_W"]
    assert rep["config"]["topology"]["k"] == 0.05


def test_solve_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["solve", "--config", str(TABLE1_PATH), "--k", "0.06", "--out", str(d)]) == 0
    assert (a / "waveforms.csv").read_bytes() == (b / "waveforms.csv").read_bytes()
    # the reports differ only in the echoed output directory
    ra, rb = (json.loads((d / "report.json").read_text()) for d in (a, b))
    assert ra["config"]["output"].pop("directory") == str(a)
    rb["config"]["output"].pop("directory")
    assert ra == rb


def test_oracle_command(tmp_path, capsys):
    argv = ["oracle", "--config", str(TABLE1_PATH), "--k", "0.05", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    rep = json.loads((tmp_path / "oracle_report.json").read_text())
    assert rep["converged"] and rep["periodicity_residual"] < 1e-6
    assert (tmp_path / "trajectory.csv").exists()


def test_oracle_non_convergence_exit_code(tmp_path, capsys):
    conf = tmp_path / "short.conf"
    conf.write_text(TABLE1_PATH.read_text().replace("oracle.cycles          = 5000",
                                                     "oracle.cycles          = 3"))
    argv = ["oracle", "--config", str(conf), "--out", str(tmp_path)]
    assert main(argv) == EXIT_NUMERIC
    rep = json.loads((tmp_path / "oracle_report.json").read_text())
    assert not rep["converged"] and len(rep["residual_history"]) == 3


def test_small_sweep(tmp_path, capsys):
    conf = tmp_path / "small.conf"
    text = TABLE1_PATH.read_text()
    for old, new in [("sweep.k_steps     = 13", "sweep.k_steps     = 4"),
                     ("sweep.delta_steps = 25", "sweep.delta_steps = 3"),
                     ("sweep.x_steps     = 11", "sweep.x_steps     = 2")]:
        assert old in text
        text = text.replace(old, new)
    conf.write_text(text)
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(conf), "--out", str(out), "--harmonics", "10"]) == 0
    with open(out / "candidates.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert list(rows[0]) == ["delta", "x_ohm", "beta_fluct", "mean_eff", "reflected_sign"]
    betas = [float(r["beta_fluct"]) for r in rows]
    assert betas == sorted(betas)
    with open(out / "curves.csv", newline="") as fh:
        assert sum(1 for _ in fh) == 1 + 6 * 4
    assert len(list((out / "plot_data").glob("rank*.dat"))) == 6
    rep = json.loads((out / "sweep_report.json").read_text())
    assert rep["candidates_evaluated"] == 6
    assert rep["top"]["delta"] == float(rows[0]["delta"])


@pytest.mark.parametrize("x, text", [(0.1, "0.1"), (1 / 3, "0.333333333333"),
                                     (1e-15, "1e-15"), (float("inf"), "inf")])
def test_format_number(x, text):
    assert format_number(x) == text


def _small_config(tmp_path, **edits):
    text = TABLE1_PATH.read_text()
    for old, new in edits.items():
        line = next(l for l in text.splitlines() if l.startswith(old + " ") or l.startswith(old + "="))
        text = text.replace(line, f"{old} = {new}")
    conf = tmp_path / "edited.conf"
    conf.write_text(text)
    return conf


def test_solve_zero_coupling(tmp_path, capsys):
    assert main(["solve", "--config", str(TABLE1_PATH), "--k", "0", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["p_out_W"] == 0.0
    assert 0 < rep["p_in_W"]


def test_sweep_single_point_grid_with_verify(tmp_path, capsys):
    conf = _small_config(tmp_path, **{"sweep.delta_steps": 1, "sweep.delta_min": 1.0,
                                      "sweep.delta_max": 1.0, "sweep.x_steps": 1,
                                      "sweep.k_steps": 4})
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(conf), "--out", str(out), "--verify"]) == 0
    with open(out / "candidates.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert list(rows[0])[-1] == "oracle_p_out_dev"
    assert float(rows[0]["oracle_p_out_dev"]) < 0.02


def test_mismatched_variant_keys_exit_2(tmp_path, capsys):
    conf = _small_config(tmp_path, **{"topology.variant": "class_ef"})
    assert main(["oracle", "--config", str(conf), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "l1" in capsys.readouterr().err
