import csv
import io
import json
from fractions import Fraction

import pytest

from shadowlab.actions import RationalMatrix
from shadowlab.errors import ParameterError
from shadowlab.experiments import (
    CSV_COLUMNS,
    EXPERIMENTS,
    ExperimentConfig,
    drifting_window,
    emit,
    expansivity_margin,
    parse_radii,
    run,
    sweep,
)

SMALL = {
    "E1": {"radii": "4..6"},
    "E2": {"seeds": 3, "radius": 3, "window_K": 3},
    "E3": {"radii": "6..7"},
    "E4": {"radii": "2..5"},
    "E5": {"seeds": 3, "radius": 6, "inner_radius": 1, "window_K": 2},
    "E6": {"seeds": 3, "radius": 6, "traj_radius": 3},
    "E7": {"pairs": 20},
}


@pytest.fixture(scope="module")
def small_reports():
    return {e: run(ExperimentConfig.default(e, **SMALL[e])) for e in EXPERIMENTS}


# -- configuration ------------------------------------------------------------------------


def test_parse_radii():
    assert parse_radii("4..7") == (4, 5, 6, 7)
    assert parse_radii("4,6,8") == (4, 6, 8)
    assert parse_radii(5) == (5,)
    assert parse_radii([1, 2]) == (1, 2)
    with pytest.raises(ParameterError):
        parse_radii("5..4")


def test_nested_config_with_aliases(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "experiment": "e1",
        "group": {"n": 2},
        "map": {"lambda": "3/2", "d": "1/10"},
        "solver": {"eps": "1", "radii": "4..6"},
        "output": {"dir": str(tmp_path / "o"), "formats": ["json"]},
    }))
    cfg = ExperimentConfig.load(path)
    assert cfg.experiment == "E1" and cfg.lam == Fraction(3, 2) and cfg.epsilon == 1
    assert cfg.radii == (4, 5, 6) and cfg.formats == ("json",)
    assert cfg.out_dir == str(tmp_path / "o")


def test_defaults_filled():
    cfg = ExperimentConfig.default("E2")
    assert (cfg.n, cfg.lam, cfg.d, cfg.radius, cfg.seeds) == (2, 3, Fraction(1, 100), 6, 50)


@pytest.mark.parametrize("data, match", [
    ({"experiment": "E1", "bogus": 1}, "unknown config keys"),
    ({"experiment": "E9"}, "unknown experiment"),
    ({"n": 2}, "must name"),
    ({"experiment": "E1", "a": {"d": "1/10"}, "b": {"d": "1/5"}}, "more than one section"),
    ({"experiment": "E1", "lam": "3"}, "lambda in"),
    ({"experiment": "E2", "lam": "2"}, "lambda > n"),
    ({"experiment": "E1", "d": "-1"}, "positive"),
    ({"experiment": "E5", "radius": 3}, "radius >="),
    ({"experiment": "E2", "radius": 2}, "window_K"),
    ({"experiment": "E7", "radius": 1.5}, "integer"),
    ({"experiment": "E7", "formats": ["xml"]}, "format"),
])
def test_config_errors(data, match):
    with pytest.raises(ParameterError, match=match):
        ExperimentConfig.from_dict(data)


def test_float_rejected_in_config():
    with pytest.raises(TypeError):
        ExperimentConfig.from_dict({"experiment": "E1", "d": 0.1})


def test_echo_is_json_plain():
    echo = ExperimentConfig.default("E5").echo()
    assert echo["x0"] == ["1/3", "2/7"] and echo["d"] == "1/100"
    json.dumps(echo)


# -- runs -------------------------------------------------------------------------------------


@pytest.mark.parametrize("exp", EXPERIMENTS)
def test_small_runs_pass(small_reports, exp):
    report = small_reports[exp]
    assert report.passed, report.summary
    assert report.rows


def test_small_run_summaries(small_reports):
    assert small_reports["E1"].summary["threshold_R"] == 5
    assert small_reports["E1"].summary["max_defect"] == Fraction(1, 15)
    assert small_reports["E3"].summary["threshold_R"] == 7
    assert small_reports["E6"].summary["constant"] == 2
    assert small_reports["E7"].summary["members_in_ball"] == 41


@pytest.mark.parametrize("exp", EXPERIMENTS)
def test_csv_headers(small_reports, exp):
    rows = list(csv.reader(io.StringIO(small_reports[exp].to_csv())))
    assert tuple(rows[0]) == CSV_COLUMNS[exp]
    assert len(rows) == len(small_reports[exp].rows) + 1


def test_emit_files(tmp_path, small_reports):
    report = small_reports["E7"]
    paths = emit(report, tmp_path, ("json", "csv"))
    assert sorted(p.name for p in paths) == ["E7.csv", "E7_report.json", "E7_timings.json"]
    data = json.loads((tmp_path / "E7_report.json").read_text())
    assert data["passed"] is True and "timings" not in data
    assert "total" in json.loads((tmp_path / "E7_timings.json").read_text())
    only = emit(report, tmp_path / "j", ("json",), stem="x")
    assert sorted(p.name for p in only) == ["x_report.json", "x_timings.json"]


@pytest.mark.parametrize("exp", ["E1", "E2", "E4", "E7"])
def test_runs_are_byte_reproducible(tmp_path, exp):
    cfg = ExperimentConfig.default(exp, **SMALL[exp])
    emit(run(cfg), tmp_path / "a", ("json", "csv"))
    emit(run(cfg), tmp_path / "b", ("json", "csv"))
    for name in (f"{exp}.csv", f"{exp}_report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_shapes():
    one = sweep(ExperimentConfig.default("E4"), "2..4")
    assert len(one) == 1 and [r["R"] for r in one[0].rows] == [2, 3, 4]
    many = sweep(ExperimentConfig.default("E2", seeds=2, radius=3, window_K=3), "2,3")
    assert [r.config["radius"] for r in many] == [2, 3]
    assert many[0].config["window_K"] == 2


# -- helpers ------------------------------------------------------------------------------------


def test_expansivity_margin_formula():
    assert expansivity_margin(Fraction(1, 20), Fraction(2), Fraction(2), 0) == 0
    # R = 1: 1 + 2/2
    assert expansivity_margin(Fraction(1, 20), Fraction(2), Fraction(2), 1) == Fraction(1, 40)
    margins = [expansivity_margin(Fraction(1, 20), Fraction(2), Fraction(2), R) for R in range(1, 8)]
    assert margins == sorted(margins)


def test_drifting_window_recursion():
    A = RationalMatrix.of([[1, 0], [1, 1]])
    w = drifting_window(A, Fraction(1, 20), 4)
    assert sorted(w) == list(range(-4, 5))
    for k in range(-4, 4):
        assert w[k + 1] == tuple(c + s for c, s in zip(A @ w[k], (Fraction(1, 20), 0)))
