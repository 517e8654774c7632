import csv
import io
import subprocess
import sys

import pytest

from milac.cli import main

SMALL = """system.n_antennas = 8
system.n_users = 2
system.n_rf_chains = 2
solver.frontier_weights = 0,0.5,1
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return str(path)


def test_power_breakdown_static(capsys):
    assert main(["power-breakdown", "--static-only"]) == 0
    out = capsys.readouterr().out
    table, _, csv_text = out.partition("\n\n")
    assert "5.530" in table and "0.200" in table
    rows = list(csv.DictReader(io.StringIO(csv_text)))
    assert [r["arch"] for r in rows] == ["milac", "digital", "hybrid-fc", "hybrid-sc"]


def test_sweep_writes_csv(small_cfg, tmp_path):
    out = tmp_path / "s.csv"
    code = main(["sweep", "--config", small_cfg, "--param", "pmax_dbm", "--values", "10,20",
                 "--archs", "milac,digital", "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len([r for r in rows if r["realization"] != "mean"]) == 4


def test_sweep_deterministic(small_cfg, tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert main(["sweep", "--config", small_cfg, "--param", "dac_bits", "--values", "3",
                     "--seed", "7", "--runs", "2", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_ee_and_frontier(small_cfg, capsys):
    assert main(["ee", "--config", small_cfg, "--arch", "milac"]) == 0
    assert "milac,pmax_dbm" in capsys.readouterr().out
    assert main(["frontier", "--config", small_cfg, "--archs", "hybrid-sc"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [float(r["eta"]) for r in rows] == [0.0, 0.5, 1.0]


def test_all_rows_failing_is_solver_error(small_cfg):
    assert main(["sweep", "--config", small_cfg, "--param", "users", "--values", "9",
                 "--archs", "milac"]) == 2


@pytest.mark.parametrize("argv", [
    ["sweep", "--param", "pmax_dbm", "--values", "a,b"],
    ["ee", "--arch", "analog"],
    ["power-breakdown", "--config", "/nonexistent.cfg"],
    ["selftest", "--suites", "9z"],
])
def test_config_errors_exit_1(argv, capsys):
    assert main(argv) == 1


@pytest.mark.parametrize("argv", [[], ["frontier", "--unknown"],
                                  ["sweep", "--param", "bogus", "--values", "1"]])
def test_usage_error_exit_code(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_bad_config_key(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("power.p_ps = 1\n")
    assert main(["power-breakdown", "--static-only", "--config", str(path)]) == 1
    assert "power.p_ps" in capsys.readouterr().err


def test_selftest_subset(capsys):
    assert main(["selftest", "--suites", "1,2,3g"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 3
    assert main(["selftest", "--suites", "1,3g", "--inject-fault", "3g"]) == 3
    out = capsys.readouterr().out
    assert "[FAIL] 3g" in out and "[PASS] 1" in out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "milac", "power-breakdown", "--static-only"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0
    assert "hybrid-sc" in res.stdout
