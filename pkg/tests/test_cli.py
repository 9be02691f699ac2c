import json
import subprocess
import sys
from fractions import Fraction

import pytest

from shadowlab.actions import bs_action, point
from shadowlab.cli import EXIT_CONTRADICTED, EXIT_OK, EXIT_USAGE, main
from shadowlab.groups import ball
from shadowlab.pseudo import CounterexampleParams, bs_counterexample, exact_orbit, write_trajectory


def test_run_writes_outputs(tmp_path, capsys):
    code = main(["run", "--experiment", "E7", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert out.startswith("E7 PASS")
    assert {p.name for p in tmp_path.iterdir()} == {"E7.csv", "E7_report.json", "E7_timings.json"}


def test_run_from_config(tmp_path, capsys):
    cfg = tmp_path / "e4.json"
    cfg.write_text(json.dumps({"experiment": "E4", "sweep": {"radii": "2..5"},
                               "output": {"dir": str(tmp_path / "o"), "formats": "csv"}}))
    assert main(["run", "--config", str(cfg)]) == EXIT_OK
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["E4.csv", "E4_timings.json"]
    assert "threshold_R: 4" in capsys.readouterr().out


def test_experiment_config_mismatch(tmp_path, capsys):
    cfg = tmp_path / "e4.json"
    cfg.write_text(json.dumps({"experiment": "E4"}))
    assert main(["run", "--config", str(cfg), "--experiment", "E1", "--out", str(tmp_path)]) == EXIT_USAGE
    assert "disagrees" in capsys.readouterr().err


def test_bad_config_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"experiment": "E1", "nope": 1}))
    assert main(["run", "--config", str(cfg)]) == EXIT_USAGE
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_USAGE
    assert main(["run", "--out", str(tmp_path)]) == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_sweep_per_radius_stems(tmp_path, capsys):
    cfg = tmp_path / "e7.json"
    cfg.write_text(json.dumps({"experiment": "E7", "pairs": 10}))
    code = main(["sweep", "--config", str(cfg), "--radius", "2,3", "--out", str(tmp_path / "o"),
                 "--format", "json"])
    assert code == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert "E7_R2_report.json" in names and "E7_R3_report.json" in names


def test_sweep_single_report(tmp_path):
    code = main(["sweep", "--experiment", "E1", "--radius", "4..6", "--out", str(tmp_path)])
    assert code == EXIT_OK
    rows = json.loads((tmp_path / "E1_report.json").read_text())["rows"]
    assert [r["R"] for r in rows] == [4, 5, 6]


def test_verify_feasible_and_infeasible(tmp_path, capsys):
    act = bs_action(2, 2)
    b = ball(act.spec, None, 6)
    good = tmp_path / "good.txt"
    write_trajectory(good, exact_orbit(act, b, point(1, 1)), act)
    assert main(["verify", "--trajectory", str(good), "--epsilon", "1/10"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["verdict"]["feasible"] is True and out["max_defect"] == "0"

    bad = tmp_path / "bad.txt"
    write_trajectory(bad, bs_counterexample(CounterexampleParams(2, 2, Fraction(1, 10), 6), b), act)
    assert main(["verify", "--trajectory", str(bad), "--epsilon", "1"]) == EXIT_CONTRADICTED
    out = json.loads(capsys.readouterr().out)
    assert out["verdict"]["feasible"] is False
    assert out["certificate_checked"] is True
    assert 1 <= len(out["verdict"]["certificate"]) <= 3
    assert out["max_defect"] == "1/15"


def test_verify_needs_action(tmp_path, capsys):
    act = bs_action(2, 2)
    path = tmp_path / "t.txt"
    write_trajectory(path, exact_orbit(act, ball(act.spec, None, 2), point(1, 1)))
    assert main(["verify", "--trajectory", str(path), "--epsilon", "1"]) == EXIT_USAGE
    desc = tmp_path / "act.json"
    desc.write_text(json.dumps(act.descriptor()))
    assert main(["verify", "--trajectory", str(path), "--epsilon", "1", "--action", str(desc)]) == EXIT_OK
    assert main(["verify", "--trajectory", str(path), "--epsilon", "0",
                 "--action", str(desc)]) == EXIT_USAGE


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "shadowlab.cli", "run", "--experiment", "E7",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "E7 PASS" in proc.stdout
