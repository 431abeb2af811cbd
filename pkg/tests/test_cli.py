import json
import os

import numpy as np
import pytest

from edspec import cli


def run(tmp_path, command, cfg=None, extra=(), name="out"):
    out = tmp_path / name
    args = [command, "--out", str(out), *extra]
    if cfg is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(cfg))
        args += ["--config", str(path)]
    return cli.main(args), out


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ")
    meta = json.loads(lines[0][2:])
    return meta, lines[1].split(","), [line.split(",") for line in lines[2:]]


def test_recurrence_truncated(tmp_path):
    code, out = run(tmp_path, "recurrence", {"weight": {"x_max": 15.0}, "n": 201})
    assert code == 0
    meta, cols, rows = read_csv(out / "recurrence.csv")
    assert cols == ["k", "a_k", "b_k", "log2_c_k"] and len(rows) == 201
    assert meta["precision"] == "double" and len(meta["config_hash"]) == 64
    assert "reference" in meta
    assert meta["asymptote"]["fit"]["L"] == pytest.approx(14.0625, abs=1e-2)
    table = json.loads((out / "recurrence_table.json").read_text())
    assert len(table["a"]) == 201


def test_recurrence_half_line_and_closed_form(tmp_path):
    code, out = run(tmp_path, "recurrence", {"n": 120}, name="hl")
    assert code == 0
    meta, _, _ = read_csv(out / "recurrence.csv")
    assert meta["asymptote"]["fit"]["A"] == pytest.approx(1 / 6, rel=1e-2)
    code, out = run(tmp_path, "recurrence",
                    {"n": 10, "weight": {"parity": "even"}, "closed_form": True}, name="cf")
    assert code == 0
    _, _, rows = read_csv(out / "recurrence.csv")
    assert [float(r[1]) for r in rows] == [2 * j + 1.5 for j in range(10)]
    assert [float(r[2]) for r in rows[1:]] == [j * (j + 0.5) for j in range(1, 10)]


def test_evolve_outputs(tmp_path):
    cfg = {"n": 24, "example": 2, "times": {"kind": "list", "values": [0.0, 0.7, 10.0]},
           "x": [0.0, 1.0, 2.0], "tolerances": {"mode_floor": 1e-40}}
    code, out = run(tmp_path, "evolve", cfg)
    assert code == 0
    meta, cols, rows = read_csv(out / "evolution.csv")
    assert cols == ["t", "x", "u", "u_scaled", "mass", "entropy"] and len(rows) == 9
    mass = np.array([float(r[4]) for r in rows])
    assert np.max(np.abs(mass / mass[0] - 1)) <= 1e-12
    assert float(rows[1][2]) == pytest.approx(1.0, abs=1e-12)  # u(1, 0) = 1
    mmeta, mcols, mrows = read_csv(out / "modes.csv")
    assert mcols == ["t", "j", "abs_alpha", "s2", "abs_gamma"] and len(mrows) == 3 * 24
    assert mmeta["mode_floor"] == 1e-40
    assert mmeta["active_modes"][0] == 3 and len(mmeta["active_modes"]) == 3
    assert min(float(r[2]) for r in mrows) >= 1e-40


def test_evolve_expression_matches_example(tmp_path):
    base = {"n": 16, "times": {"kind": "list", "values": [0.5]}, "x": [0.5, 1.5]}
    _, a = run(tmp_path, "evolve", dict(base, example=2), name="a")
    _, b = run(tmp_path, "evolve", dict(base, initial="x**2"), name="b")
    ra = read_csv(a / "evolution.csv")[2]
    rb = read_csv(b / "evolution.csv")[2]
    assert np.allclose(np.array(ra, float), np.array(rb, float), rtol=1e-13)


def test_compare_small(tmp_path):
    cfg = {"example": 1, "ns": [8], "n_ref": 60, "times": {"kind": "log", "start": 1e-3,
                                                           "stop": 1.0, "count": 5}}
    code, out = run(tmp_path, "compare", cfg, extra=["--threads", "2"])
    assert code == 0
    meta, cols, rows = read_csv(out / "compare.csv")
    assert cols == ["scheme", "n", "t", "h_error", "entropy_error"]
    assert {r[0] for r in rows} == {"full", "even", "gs2"} and len(rows) == 15
    assert meta["reference"].startswith("truncated [0,15] full nu=2 Galerkin, n=60")


def test_eigfun_small(tmp_path):
    cfg = {"n": 60, "target": 1.0, "ode_x_max": 15.0, "x_points": 51}
    code, out = run(tmp_path, "eigfun", cfg)
    assert code == 0
    meta, cols, rows = read_csv(out / "eigfun.csv")
    assert cols == ["x", "u_p_scaled", "u_scaled", "r", "envelope"] and len(rows) == 51
    assert meta["eigenvalue"] > 0 and "gibbs" in meta
    assert meta["envelope"]["A0"] == pytest.approx(0.4439, abs=5e-2)
    _, ccols, crows = read_csv(out / "coefficients.csv")
    assert ccols == ["j", "alpha_j"] and len(crows) == 60
    assert (out / "residual_extrema.csv").exists()


def test_bench_schema(tmp_path):
    cfg = {"ns": [8, 16], "repeats": 1, "times": {"kind": "list", "values": [0.1, 1.0]}}
    code, out = run(tmp_path, "bench", cfg)
    assert code == 0
    doc = json.loads((out / "bench.json").read_text())
    assert [r["n"] for r in doc["rows"]] == [8, 16]
    for r in doc["rows"]:
        assert set(r) == {"n", "GS2", "OP"}
        assert set(r["GS2"]) == {"A_ms", "B_ms"} and set(r["OP"]) == {"A_ms", "B_ms"}
    assert "config_hash" in doc["meta"]


def test_determinism(tmp_path):
    cfg = {"n": 20, "example": 1, "times": {"kind": "log", "start": 1e-3, "stop": 10.0,
                                            "count": 4}, "x_points": 7}
    _, a = run(tmp_path, "evolve", cfg, name="a")
    _, b = run(tmp_path, "evolve", cfg, name="b", extra=["--threads", "3"])
    for f in ("evolution.csv", "modes.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_config_out_field(tmp_path, monkeypatch):
    target = tmp_path / "cfgout"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 5, "out": str(target)}))
    assert cli.main(["recurrence", "--config", str(cfg)]) == 0
    assert (target / "recurrence.csv").exists()


@pytest.mark.parametrize("cfg", [
    {"bogus": 1},
    {"n": 0},
    {"weight": {"parity": "even", "x_max": 5.0}},
    {"example": 1, "initial": "x"},
    {"times": {"kind": "log", "start": 0.0}},
    {"command": "evolve"},
])
def test_config_errors_exit_2(tmp_path, cfg):
    code, _ = run(tmp_path, "recurrence", cfg)
    assert code == 2


def test_other_exit_2_cases(tmp_path):
    assert cli.main(["recurrence", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["recurrence", "--config", str(bad)]) == 2
    assert cli.main(["recurrence", "--threads", "0"]) == 2
    code, _ = run(tmp_path, "evolve", {"n": 8, "initial": "x + y"}, name="y")
    assert code == 2


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_numeric_failure_exit_3(tmp_path):
    # target 0 selects the zero eigenvalue, which has no oscillatory partner
    code, _ = run(tmp_path, "eigfun", {"n": 10, "target": 0.0})
    assert code == 3
    # an initial condition that overflows at the quadrature nodes
    code, _ = run(tmp_path, "evolve", {"n": 8, "initial": "exp(x**3)"}, name="inf")
    assert code == 3
    code, _ = run(tmp_path, "evolve", {"n": 8, "initial": "1/(x-x)"}, name="zoo")
    assert code == 2


def test_help_and_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "edspec" in capsys.readouterr().out
    for cmd in cli.COMMANDS:
        with pytest.raises(SystemExit):
            cli.main([cmd, "--help"])
    assert os.path.basename(cli.__file__) == "cli.py"
