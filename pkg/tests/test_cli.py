"""End-to-end command-line behavior, run in process."""

import csv

import pytest

from delaycomp.cli import main, monitor_header, state_header

from conftest import SCALAR_SCENARIO, TWOLINK_SCENARIO

BASE = """\
[plant]
name = "scalar"

[trajectory]
kind = "rest_to_sway"
amp = 0.3
omega = 1.0

[disturbance]
kind = "sinusoidal"
d0 = 0.2
omega = 0.5

[delays.input]
kind = "constant"
value = 0.02

[delays.state]
kind = "constant"
value = 0.04

[gains]
alpha1 = 1.5
alpha2 = 2.1
ks = 10.0
gamma1 = 1.2
gamma2 = 1.0
omega = 0.5

[bounding]
rho1 = 2.0
rho2 = 1.0
nd_bound = 5.0

[sim]
t_end = 1.0
h = 0.01
"""


def write_scn(tmp_path, text=BASE, name="scn.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_kv(path):
    pairs = {}
    for line in path.read_text().splitlines():
        key, _, val = line.partition("=")
        pairs[key] = val
    return pairs


def test_check_gains_on_shipped_benchmark(capsys):
    assert main(["check-gains", str(SCALAR_SCENARIO)]) == 0
    out = capsys.readouterr().out
    assert "regime: global" in out
    assert "all conditions satisfied" in out
    assert "FAIL" not in out
    for key in ("sigma = ", "delta = ", "ultimate_bound = ",
                "decay_active_radius = ", "validity_radius = ",
                "safe_start_radius = "):
        assert key in out


def test_check_gains_on_twolink_is_local_regime(capsys):
    assert main(["check-gains", str(TWOLINK_SCENARIO)]) == 0
    out = capsys.readouterr().out
    assert "regime: local" in out
    assert "all conditions satisfied" in out


def test_check_gains_failure_names_the_condition(tmp_path, capsys):
    scn = write_scn(tmp_path, BASE.replace("alpha2 = 2.1", "alpha2 = 1.9"))
    assert main(["check-gains", scn]) == 1
    out = capsys.readouterr().out
    assert "FAIL  alpha2 > 2" in out
    assert "one or more conditions FAILED" in out


def test_missing_scenario_exits_2(capsys):
    assert main(["check-gains", "/no/such/file.toml"]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_scenario_key_exits_2(tmp_path, capsys):
    scn = write_scn(tmp_path, BASE.replace("ks = 10.0", "kp = 10.0"))
    assert main(["simulate", scn]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_simulate_writes_all_outputs(tmp_path, capsys):
    scn = write_scn(tmp_path)
    out = tmp_path / "results"
    assert main(["simulate", scn, "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "verdict:" in stdout and "wrote" in stdout

    with open(out / "state.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == state_header(1)
    assert rows[0][:4] == ["t", "x1", "xdot1", "xd1"]
    assert len(rows) == 1 + 101
    # 17 significant digits round-trip: re-rendering reproduces each cell
    for cell in rows[3]:
        assert "%.17g" % float(cell) == cell

    with open(out / "monitor.csv", newline="") as fh:
        mrows = list(csv.reader(fh))
    assert mrows[0] == monitor_header(1)
    assert mrows[0][-2:] == ["decay_ok", "inside_safe"]
    assert len(mrows) == 1 + 101
    assert set(r[-1] for r in mrows[1:]) <= {"0", "1"}

    kv = read_kv(out / "report.kv")
    assert kv["verdict"] == "inconclusive"  # one-second horizon
    assert kv["steps_recorded"] == "100"
    assert kv["regime"] == "global"
    assert kv["condition.alpha1_>_1"].startswith("PASS")
    txt = (out / "report.txt").read_text()
    assert txt.startswith("# simulation report\n")
    # aligned key column: every row has " = " at the same offset
    offsets = {line.index(" = ") for line in txt.splitlines()[1:] if line}
    assert len(offsets) == 1


def test_simulate_default_out_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    scn = write_scn(tmp_path)
    assert main(["simulate", scn]) == 0
    assert (tmp_path / "out" / "state.csv").exists()
    capsys.readouterr()


def test_simulate_no_monitor(tmp_path, capsys):
    scn = write_scn(tmp_path)
    out = tmp_path / "nm"
    assert main(["simulate", scn, "--out", str(out), "--no-monitor"]) == 0
    assert not (out / "monitor.csv").exists()
    assert (out / "state.csv").exists()
    kv = read_kv(out / "report.kv")
    assert kv["verdict"] == "not monitored"
    assert "monitor.csv" not in capsys.readouterr().out


def test_divergent_run_exits_3_and_keeps_partial_output(tmp_path, capsys):
    text = (BASE.replace("value = 0.02", "value = 0.5")
                .replace("ks = 10.0", "ks = 80.0")
                .replace("t_end = 1.0", "t_end = 20.0")
                .replace("h = 0.01", "h = 0.01\ninput_delay_scale = 0.05"))
    scn = write_scn(tmp_path, text)
    out = tmp_path / "div"
    assert main(["simulate", scn, "--out", str(out)]) == 3
    captured = capsys.readouterr()
    assert "divergence at" in captured.err
    assert "partial results retained" in captured.err
    kv = read_kv(out / "report.kv")
    assert kv["verdict"] == "diverged"
    assert kv["exit_status"] == "3"
    with open(out / "state.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert 2 < len(rows) < 2002  # aborted before the full horizon


def test_sweep_cli(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DELAYCOMP_THREADS", "1")
    scn = write_scn(tmp_path)
    out = tmp_path / "sw"
    assert main(["sweep", scn, "--axis", "controller.input_delay_scale",
                 "--values", "1.0,1.1", "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "controller.input_delay_scale=1:" in stdout
    assert "wrote" in stdout
    with open(out / "sweep.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["value", "verdict", "steady_y_norm",
                       "max_pos_err_tail", "error"]
    assert len(rows) == 3
    assert [r[0] for r in rows[1:]] == ["1", "1.1000000000000001"]


def test_sweep_bad_axis_exits_2(tmp_path, capsys):
    scn = write_scn(tmp_path)
    assert main(["sweep", scn, "--axis", "gains.kp",
                 "--values", "1.0"]) == 2
    assert "unknown sweep axis" in capsys.readouterr().err


def test_sweep_empty_values_exits_2(tmp_path, capsys):
    scn = write_scn(tmp_path)
    assert main(["sweep", scn, "--axis", "gains.ks", "--values", " , "]) == 2
    assert "no sweep values" in capsys.readouterr().err


def test_sweep_unparseable_value_exits_2(tmp_path, capsys):
    scn = write_scn(tmp_path)
    assert main(["sweep", scn, "--axis", "gains.ks",
                 "--values", "1.0,abc"]) == 2
    assert "bad sweep value" in capsys.readouterr().err


def test_help_and_usage_exit_codes(capsys):
    assert main(["--help"]) == 0
    assert main([]) == 2
    assert main(["unknown-command"]) == 2
    capsys.readouterr()
