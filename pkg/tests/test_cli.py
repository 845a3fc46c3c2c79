import json
import subprocess
import sys

import pytest

from chainbell.bounds import eta_crit, gamma_crit
from chainbell.cli import main
from chainbell.lhv import ModelParams, exact_gamma


def run_cli(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def test_table_reproduces_critical_values(capsys):
    code, out, _ = run_cli(capsys, "table", "5")
    assert code == 0
    rows = out.strip().splitlines()[1:]
    assert len(rows) == 4
    assert rows[0].startswith("2 (CHSH)")
    expected = [("87.87", "82.84"), ("89.32", "86.99"), ("90.96", "89.61"), ("92.26", "91.37")]
    for row, (g, e) in zip(rows, expected):
        assert row.split()[-2:] == [g + "%", e + "%"]


def test_table_single_chsh_row(capsys):
    _, out, _ = run_cli(capsys, "table", "2")
    rows = out.strip().splitlines()[1:]
    assert [r.split() for r in rows] == [["2", "(CHSH)", "87.87%", "82.84%"]]


def test_table_json_rows_increase(capsys, tmp_path):
    path = tmp_path / "t.json"
    code, _, _ = run_cli(capsys, "table", "100", "--json", str(path))
    rows = json.loads(path.read_text())["rows"]
    assert code == 0 and len(rows) == 99
    assert rows[-1]["gamma_crit"] < 1 and rows[-1]["gamma_crit"] > rows[-2]["gamma_crit"]
    assert rows[0]["gamma_crit"] == pytest.approx(gamma_crit(2), abs=1e-14)
    assert rows[3]["eta_crit"] == pytest.approx(eta_crit(5), abs=1e-14)


def test_table_rejects_small_n(capsys):
    assert run_cli(capsys, "table", "1")[0] == 1


def test_bounds_output(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "bounds", "--n", "2")
    assert code == 0
    assert "2.828427" in out and "87.87%" in out and "local bound       2.000000" in out
    code, out, _ = run_cli(capsys, "bounds", "--n", "2", "--gamma", "0.7")
    assert "raw 4.571429" in out and "clamped 4.000000" in out and "vacuous" in out
    path = tmp_path / "b.json"
    code, out, _ = run_cli(capsys, "bounds", "--n", "3", "--gamma", "0.893164", "--out", str(path))
    assert "raw 5.196152" in out and "vacuous" not in out
    assert json.loads(path.read_text())["coincidence_bound"]["raw"] == pytest.approx(5.196152, abs=1e-6)


@pytest.mark.parametrize("gamma", ["0", "1.5", "abc"])
def test_bounds_bad_gamma_is_usage_error(capsys, gamma):
    assert run_cli(capsys, "bounds", "--n", "2", "--gamma", gamma)[0] == 1


def test_usage_errors(capsys):
    assert run_cli(capsys)[0] == 1
    assert run_cli(capsys, "frobnicate")[0] == 1
    assert run_cli(capsys, "simulate", "--n", "2", "--p", "0.5", "--trials", "0", "--out", "x")[0] == 1
    assert run_cli(capsys, "simulate", "--n", "2", "--p", "0.5", "--gamma", "0.8", "--trials", "5",
                   "--out", "x")[0] == 1


def test_simulate_rejects_gamma_above_critical(capsys, tmp_path):
    code, _, err = run_cli(capsys, "simulate", "--n", "2", "--gamma", "0.95", "--trials", "10",
                           "--out", str(tmp_path / "o"))
    assert code == 2
    assert "gamma_crit,2 = 87.87%" in err


def test_simulate_needs_a_target(capsys, tmp_path):
    assert run_cli(capsys, "simulate", "--n", "2", "--trials", "10", "--out", str(tmp_path))[0] == 2


def test_simulate_unwritable_path(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, _ = run_cli(capsys, "simulate", "--n", "2", "--p", "0.5", "--trials", "10",
                         "--out", str(blocker / "sub"))
    assert code == 2


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    code = main(["simulate", "--n", "2", "--p", "0.5147", "--trials", "100000", "--seed", "7",
                 "--out", str(out)])
    assert code == 0
    return out


def test_simulate_writes_report(simulated):
    rep = json.loads((simulated / "report.json").read_text())
    assert (simulated / "events.csv").exists()
    assert abs(rep["s_hat"] - 2.828) < 4 * rep["s_se"] + 1e-3
    assert len(rep["config_hash"]) == 16 and rep["version"]


@pytest.mark.parametrize("mode", ["sync", "stream"])
def test_simulate_then_analyze_tallies_identical(simulated, capsys, tmp_path, mode):
    out = tmp_path / f"an_{mode}.json"
    code, _, _ = run_cli(capsys, "analyze", str(simulated / "events.csv"), "--n", "2",
                         "--mode", mode, "--out", str(out))
    assert code == 0
    gen = json.loads((simulated / "report.json").read_text())
    ana = json.loads(out.read_text())
    keys = ("index", "trials", "coincidences", "corr_sum")
    assert [{k: p[k] for k in keys} for p in ana["pairs"]] == [{k: p[k] for k in keys} for p in gen["pairs"]]
    assert ana["s_hat"] == gen["s_hat"]


def test_narrow_window_drops_coincidences(simulated, capsys, tmp_path):
    out = tmp_path / "narrow.json"
    code, _, _ = run_cli(capsys, "analyze", str(simulated / "events.csv"), "--n", "2",
                         "--delta-t", "0.5", "--out", str(out))
    assert code == 0
    gen = json.loads((simulated / "report.json").read_text())
    ana = json.loads(out.read_text())
    predicted = exact_gamma(ModelParams(2, 0.5147), delta_t=0.5)
    assert predicted == pytest.approx(0.5147, abs=1e-12)
    assert ana["gamma_hat"] < gen["gamma_hat"]
    se = (predicted * (1 - predicted) / 100_000) ** 0.5
    assert abs(ana["gamma_hat"] - predicted) < 4 * se


def test_simulate_is_byte_identical_across_runs(capsys, tmp_path):
    args = ["--n", "3", "--gamma", "0.85", "--trials", "2000", "--seed", "5"]
    run_cli(capsys, "simulate", *args, "--out", str(tmp_path / "a"))
    run_cli(capsys, "simulate", *args, "--out", str(tmp_path / "b"))
    for name in ("events.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_analyze_bad_files(capsys, tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    code, _, err = run_cli(capsys, "analyze", str(empty), "--n", "2")
    assert code == 2 and "empty" in err
    bad = tmp_path / "bad.csv"
    bad.write_text("trial,side,setting,outcome,time\n0,A,1,1,0.0\n0,B,1,3,0.0\n")
    code, _, err = run_cli(capsys, "analyze", str(bad), "--n", "2")
    assert code == 2 and "line 3" in err
    assert run_cli(capsys, "analyze", str(tmp_path / "missing.csv"), "--n", "2")[0] == 2


def test_analyze_warns_on_non_chained(capsys, tmp_path):
    f = tmp_path / "e.csv"
    rows = ["trial,side,setting,outcome,time"]
    for t, (a, b) in enumerate([(1, 1), (2, 1), (2, 2), (1, 2), (1, 3)]):
        rows += [f"{t},A,{a},1,{40.0 * t:.9f}", f"{t},B,{b},1,{40.0 * t:.9f}"]
    f.write_text("\n".join(rows) + "\n")
    code, _, err = run_cli(capsys, "analyze", str(f), "--n", "3")
    assert "warning: 1 coincidences with non-chained settings" in err
    code, _, err = run_cli(capsys, "analyze", str(f), "--n", "3", "--out", str(tmp_path / "r.json"))
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["non_chained"] == 1
    assert rep["error"]  # pairs (3,2), (3,3) have no data
    assert code == 2


def test_analyze_rejects_settings_above_n(capsys, tmp_path):
    f = tmp_path / "e.csv"
    f.write_text("trial,side,setting,outcome,time\n0,A,4,1,0.0\n0,B,1,1,0.0\n")
    assert run_cli(capsys, "analyze", str(f), "--n", "3")[0] == 2


def test_sweep_rows(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    grid = "0.70,0.75,0.80,0.85,0.878680"
    code, stdout, _ = run_cli(capsys, "sweep", "--n", "2", "--gammas", grid, "--trials", "100000",
                              "--seed", "3", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "gamma,s_hat,se,bound,quantum,gamma_hat,error"
    assert len(lines) == 6
    for line in lines[1:]:
        g, s, se, bound, q, gh, err = line.split(",")
        assert err == ""
        assert abs(float(s) - 2.828427) < 4 * float(se)
    assert lines[-1].startswith("0.87868,")


def test_sweep_row_error(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    code, _, err = run_cli(capsys, "sweep", "--n", "2", "--gammas", "0.8,0.95", "--trials", "1000",
                           "--out", str(out))
    assert code == 2
    lines = out.read_text().splitlines()
    assert len(lines) == 3 and lines[1].endswith(",") and "87.87%" in lines[2]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "chainbell", "table", "3"], capture_output=True, text=True)
    assert proc.returncode == 0 and "89.32%" in proc.stdout
