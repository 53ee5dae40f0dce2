import json
import textwrap

import numpy as np
import pytest

from fractrans.cli import ConfigError, config_from_dict, load_config, main, read_solution_csv, run
from fractrans.core import AdmissibilityError
from fractrans.solver import solve_ibvp

SOLVE = """
[problem]
x_max = 1.0
T = 1.0
nx = {nx}
nt = {nt}
time_terms = [{{order = 0.5, coeff = "1"}}]
space_terms = [{{order = 0.5, coeff = "1"}}]
r = {r}
F = {F}
a = {a}
g = {g}
"""


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def solve_config(tmp_path, nx=128, nt=128, r='"-1"', F='"2"', a='"2"', g='"2"', extra=""):
    return write(tmp_path, SOLVE.format(nx=nx, nt=nt, r=r, F=F, a=a, g=g) + extra)


def test_minimal_solve_config(tmp_path):
    cfg = load_config(solve_config(tmp_path), "solve")
    spec = cfg.problem_spec()
    assert len(spec.time_terms) == len(spec.space_terms) == 1
    assert spec.domain.shape == (129, 129)


def test_unknown_key(tmp_path):
    path = write(tmp_path, "[problem]\nordr = 0.5\n")
    with pytest.raises(ConfigError, match=r"unknown key 'ordr' in \[problem\]"):
        load_config(path, "solve")


def test_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        config_from_dict({"probelm": {}}, "solve")


def test_expression_error_names_key_and_position(tmp_path):
    path = solve_config(tmp_path, F='"2 * (x + "')
    with pytest.raises(ConfigError, match=r"problem\.F: .*position"):
        load_config(path, "solve")


def test_positive_reaction_is_inadmissible(tmp_path, capsys):
    path = solve_config(tmp_path, r='"+1"')
    cfg = load_config(path, "solve")
    with pytest.raises(AdmissibilityError, match=r"\(2\.3\)"):
        run(cfg)
    assert main(["solve", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "(2.3)" in capsys.readouterr().err


def test_seed_must_be_u64(tmp_path):
    path = write(tmp_path, "[verify]\nseed = -1\n")
    with pytest.raises(ConfigError, match="64-bit"):
        load_config(path, "fuzz")
    with pytest.raises(SystemExit):
        main(["fuzz", "--config", str(path), "--seed", str(2**64)])


def test_solve_constant_problem(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", "--config", str(solve_config(tmp_path, nx=16, nt=16)), "--out", str(out)]) == 0
    lines = (out / "solution.csv").read_text().splitlines()
    assert lines[0] == "x,t,u"
    assert len(lines) == 1 + 17 * 17
    assert {line.split(",")[2] for line in lines[1:]} == {"2.0000000000000000e+00"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["grid"]["Nx"] == 16 and manifest["time_orders"] == [0.5]
    assert not (out / "timings.json").exists()


def test_timings_are_opt_in(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACTRANS_TIMINGS", "1")
    out = tmp_path / "out"
    assert main(["solve", "--config", str(solve_config(tmp_path, nx=8, nt=8)), "--out", str(out)]) == 0
    assert json.loads((out / "timings.json").read_text())["solve_seconds"] >= 0


def test_csv_round_trip(tmp_path):
    path = solve_config(tmp_path, nx=12, nt=9, F='"sin(3*x) - t"', a='"cos(x)"', g='"1 + t^2"')
    cfg = load_config(path, "solve")
    cfg.output["dir"] = str(tmp_path / "o")
    assert run(cfg) == 0
    field = solve_ibvp(cfg.problem_spec())
    back = read_solution_csv(tmp_path / "o" / "solution.csv", field.grid)
    assert np.array_equal(back.values, field.values)
    inferred = read_solution_csv(tmp_path / "o" / "solution.csv")
    assert inferred.grid.shape == field.grid.shape


def test_grid_flags_override(tmp_path):
    out = tmp_path / "o"
    main(["solve", "--config", str(solve_config(tmp_path)), "--out", str(out), "--nx", "5", "--nt", "3"])
    assert len((out / "solution.csv").read_text().splitlines()) == 1 + 6 * 4


def test_verify_decaying_oracle(tmp_path):
    # E_{1/2}(-t^{1/2}) = exp(t) erfc(sqrt(t))
    path = solve_config(tmp_path, nx=8, nt=64, F="0", a='"1"', g='"exp(t)*erfc(sqrt(t))"',
                        extra='\n[verify]\nprinciples = ["max_principle"]\n')
    out = tmp_path / "o"
    assert main(["verify", "--config", str(path), "--out", str(out)]) == 0
    reports = json.loads((out / "reports.json").read_text())
    assert [r["verdict"] for r in reports] == ["pass"]
    assert reports[0]["details"]["grid_max"] == 1.0


def test_failing_check_exits_nonzero(tmp_path, capsys):
    path = solve_config(
        tmp_path, nx=4, nt=32, r='"-1"', F='"0"', a='"0"', g='"0"',
        extra='\n[convergence]\nexact = "0"\nlevels = [[4, 32], [4, 64]]\nexpected_order = [1.3, 1.7]\n',
    )
    # an exact zero solution passes regardless of order
    assert main(["convergence", "--config", str(path), "--out", str(tmp_path / "a")]) == 0
    path = solve_config(
        tmp_path, nx=4, nt=32, r='"-1"', F='"2*t + t^2 + x"', a='"x"', g='"t^2"',
        extra='\n[convergence]\nexact = "t^2 + x"\nlevels = [[4, 32], [4, 64]]\nexpected_order = [1.3, 1.7]\n',
    )
    # the space order 0.5 term is not in the forcing, so the computed solution misses the exact one
    assert main(["convergence", "--config", str(path), "--out", str(tmp_path / "b")]) == 1
    err = capsys.readouterr().err
    assert '"verdict": "fail"' in err
    table = (tmp_path / "b" / "convergence.csv").read_text().splitlines()
    assert table[0] == "level,Nx,Nt,sup_error,observed_order"


def test_fuzz_is_deterministic(tmp_path):
    path = write(tmp_path, "[verify]\nfuzz_count = 12\nnx = 16\nnt = 16\n")
    for name in ("a", "b"):
        assert main(["fuzz", "--config", str(path), "--seed", "42", "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "reports.json").read_bytes()
    assert a == (tmp_path / "b" / "reports.json").read_bytes()
    assert len(json.loads(a)) == 12


def test_mlf_prints_value(tmp_path, capsys):
    assert main(["mlf", "--alpha", "0.5", "--z", "-1"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.42758357615, abs=1e-11)
    path = write(tmp_path, "[mlf]\nalpha = 1.0\nz = 1.0\n")
    assert main(["mlf", "--config", str(path)]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(np.e, abs=1e-12)


def test_cauchy_gaussian_profile(tmp_path):
    path = write(tmp_path, '[cauchy]\nscenario = "gaussian_profile"\nalpha = 0.5\nnx = 128\nnt = 64\n')
    assert main(["cauchy", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "reports.json").read_text())[0]
    assert rep["principle"] == "cauchy_sup" and rep["verdict"] == "pass"


def test_compare_command(tmp_path):
    path = solve_config(tmp_path, nx=16, nt=16, r='"-0.5"', F="0", a='"1"', g='"1"',
                        extra='\n[compare]\nr = "-1"\nmode = "ii"\n')
    assert main(["compare", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
