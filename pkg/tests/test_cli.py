import filecmp
from pathlib import Path

import numpy as np
import pytest

from nmpl.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, run
from nmpl.config import build_measure, build_nonlinearity, from_tables, load, Table
from nmpl.csvio import fmt, read_csv, write_csv
from nmpl.errors import ConfigError
from nmpl.expr import parse
from nmpl.measures import HalfSpaceStable, PushForward, RadialStable

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def command_of(path):
    return load(path).command


def write_cfg(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


MEASURE_1D = """
[measure]
kind = radial_stable
beta = 1.5
dim = 1
"""


# -- expressions --------------------------------------------------------------------

@pytest.mark.parametrize("src, want", [
    ("1 + 2 * 3", 7.0),
    ("(1 + 2) * 3", 9.0),
    ("2 ^ 3 ^ 2", 512.0),
    ("-2 ^ 2", -4.0),
    ("8 / 4 / 2", 1.0),
    ("1 - 2 - 3", -4.0),
    ("1.5e1 + .5", 15.5),
    ("cos(pi)", -1.0),
    ("exp(1) - e", 0.0),
    ("max(1, min(3, 2))", 2.0),
    ("abs(-3) + --1", 4.0),
])
def test_expression_values(src, want):
    e = parse(src)
    assert e.is_constant
    assert float(e()) == pytest.approx(want, abs=1e-15)


def test_expression_variables_vectorized():
    e = parse("x1 * x2 + t + x")
    y = np.array([[1.0, 2.0], [3.0, -1.0]])
    assert np.allclose(e(y, 0.5), y[:, 0] * y[:, 1] + 0.5 + y[:, 0])
    assert e.dim_needed == 2 and not e.is_constant
    assert parse("cos(x1)")(np.zeros((4, 3, 1))).shape == (4, 3)
    assert parse("2")(np.zeros((5, 1))).shape == (5,)


@pytest.mark.parametrize("src", ["1 +", "foo(1)", "cos(1, 2)", "min(1)", "1 $ 2", "(1 + 2", "y",
                                 "1 2"])
def test_expression_errors(src):
    with pytest.raises(ConfigError):
        parse(src)


def test_expression_dimension_error():
    with pytest.raises(ConfigError):
        parse("x2")(np.zeros((3, 1)))


# -- config tables ------------------------------------------------------------------

def test_build_measure_kinds():
    assert isinstance(build_measure(Table("measure", {"kind": "radial_stable", "beta": "1.2"})),
                      RadialStable)
    hs = build_measure(Table("measure", {"kind": "half_space", "dim": "2"}))
    assert isinstance(hs, HalfSpaceStable) and hs.dim == 2
    pf = build_measure(Table("measure", {"kind": "radial_stable", "jump_scale": "0.5"}))
    assert isinstance(pf, PushForward)
    for bad in ({"kind": "nope"}, {"kind": "radial_stable", "beta": "0"},
                {"kind": "radial_stable", "beta": "abc"}, {"kind": "radial_stable", "dim": "0"}):
        with pytest.raises(ConfigError):
            build_measure(Table("measure", bad))


def test_build_nonlinearity_coefficients():
    f = build_nonlinearity(Table("nl", {"form": "gradient_power", "b": "1 + x1", "m": "0.5"}))
    assert f.b(np.array([2.0]), 0.0) == pytest.approx(3.0)
    q = build_nonlinearity(Table("nl", {"form": "quasilinear", "dim": "2", "A12": "0.5",
                                        "A21": "0.5"}))
    assert np.array_equal(q.A, [[1.0, 0.5], [0.5, 1.0]])
    with pytest.raises(ConfigError):
        build_nonlinearity(Table("nl", {"form": "unknown"}))
    with pytest.raises(ConfigError):
        build_nonlinearity(Table("nl", {"form": "mixed_local_nonlocal", "dim": "1"}))


def test_from_tables_validation():
    with pytest.raises(ConfigError, match=r"\[measure\]"):
        from_tables({"experiment": {"command": "check-measure"}})
    with pytest.raises(ConfigError, match="unknown command"):
        from_tables({"experiment": {"command": "fly"}})
    with pytest.raises(ConfigError, match="grid"):
        from_tables({"experiment": {"command": "reachability"},
                     "measure": {"kind": "radial_stable"},
                     "grid": {"lower": "0", "upper": "1, 2", "shape": "5"}})
    cfg = from_tables({"experiment": {"command": "check-measure", "seed": "4"},
                       "measure": {"kind": "radial_stable"}})
    assert cfg.seed == 4


def test_csv_format_round_trip(tmp_path):
    x = 0.1 + 0.2
    assert float(fmt(x)) == x and fmt(True) == "true" and fmt(np.int64(3)) == "3"
    p = write_csv(tmp_path / "a" / "b.csv", ["v"], [[x], [np.pi]])
    header, rows = read_csv(p)
    assert header == ["v"] and [float(r[0]) for r in rows] == [x, np.pi]


# -- run --------------------------------------------------------------------------------

@pytest.mark.parametrize("cfg", sorted(p.name for p in CONFIGS.glob("*.ini")))
def test_shipped_configs_pass(cfg, tmp_path, capsys):
    path = CONFIGS / cfg
    assert run([command_of(path), str(path), "--out", str(tmp_path)]) == EXIT_OK
    header, rows = read_csv(tmp_path / "summary.csv")
    assert header == ["name", "value", "threshold", "pass"]
    assert all(r[3] == "pass" for r in rows)
    assert rows[-1][0] == "seed"


def test_check_measure_summary_row(tmp_path, capsys):
    path = write_cfg(tmp_path, "[experiment]\ncommand = check-measure\n" + MEASURE_1D)
    assert run(["check-measure", str(path), "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = {r[0]: r for r in read_csv(tmp_path / "o" / "summary.csv")[1]}
    name, value, threshold, ok = rows["C_mu_tilde"]
    assert float(value) == pytest.approx(4 + 2 / 1.5, rel=1e-10)
    assert threshold == "finite" and ok == "pass"


def test_half_line_reachability_outputs(tmp_path, capsys):
    path = CONFIGS / "half_line.ini"
    assert run(["reachability", str(path), "--out", str(tmp_path)]) == EXIT_OK
    rows = {r[0]: r for r in read_csv(tmp_path / "summary.csv")[1]}
    assert rows["covers_domain"][1] == "false"
    header, mask = read_csv(tmp_path / "reach_mask.csv")
    assert len(mask) == 21


def test_missing_table_exit_usage(tmp_path, capsys):
    path = write_cfg(tmp_path, "[experiment]\ncommand = check-measure\n")
    assert run(["check-measure", str(path), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "[measure]" in capsys.readouterr().err


def test_usage_errors(tmp_path, capsys):
    assert run(["check-measure"]) == EXIT_USAGE
    assert run(["fly", str(CONFIGS / "check_measure.ini")]) == EXIT_USAGE
    assert run(["check-measure", str(tmp_path / "absent.ini")]) == EXIT_USAGE
    bad = write_cfg(tmp_path, "no section header\n")
    assert run(["check-measure", str(bad)]) == EXIT_USAGE
    # the config names another command
    assert run(["simulate", str(CONFIGS / "check_measure.ini")]) == EXIT_USAGE


def test_threads_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("NMPL_THREADS", "many")
    assert run(["check-measure", str(CONFIGS / "check_measure.ini"),
                "--out", str(tmp_path)]) == EXIT_USAGE


def test_failed_check_exit_code(tmp_path, capsys):
    # a full-support kernel covers the grid, so expecting no cover fails
    text = ("[experiment]\ncommand = reachability\n" + MEASURE_1D
            + "[grid]\nlower = -1\nupper = 1\nshape = 11\n[reachability]\nx0 = 0\n"
            "expect_cover = false\n")
    path = write_cfg(tmp_path, text)
    assert run(["reachability", str(path), "--out", str(tmp_path / "o")]) == EXIT_FAIL
    rows = read_csv(tmp_path / "o" / "summary.csv")[1]
    assert any(r[3] == "fail" for r in rows)


def test_numerical_failure_exit_code(tmp_path, capsys):
    text = ("[experiment]\ncommand = verify-barrier\n" + MEASURE_1D
            + "[barrier]\nkind = horizontal\ncenter = 0\nt0 = 0\nR = 1\neta = 0.5\n"
            "gamma_factor = 100\nsamples = 5\n")
    path = write_cfg(tmp_path, text)
    assert run(["verify-barrier", str(path), "--out", str(tmp_path / "o")]) == EXIT_FAIL
    assert "FloatingPointError" in capsys.readouterr().err
    rows = read_csv(tmp_path / "o" / "summary.csv")[1]
    assert rows[0][0] == "verify-barrier_completed" and rows[0][3] == "fail"


@pytest.mark.parametrize("cfg", ["compare.ini", "probe_half_space.ini", "fractional_heat.ini",
                                 "scaling.ini", "barrier.ini"])
def test_runs_are_byte_identical(cfg, tmp_path, capsys):
    path = CONFIGS / cfg
    cmd = command_of(path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run([cmd, str(path), "--out", str(a), "--seed", "11"]) == EXIT_OK
    assert run([cmd, str(path), "--out", str(b), "--seed", "11"]) == EXIT_OK
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir()) and "summary.csv" in names
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors
    assert ["seed", "11", "recorded", "pass"] in read_csv(a / "summary.csv")[1]
