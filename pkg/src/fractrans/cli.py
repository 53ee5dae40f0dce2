"""Command-line front end.

Usage::

    fractrans <command> --config run.toml [--out DIR] [--seed N] [--nx N] [--nt N]

Commands: ``solve``, ``verify``, ``compare``, ``cauchy``, ``convergence``,
``mlf``, ``fuzz``.  The log level comes from ``FRACTRANS_LOG`` (default
``WARNING``).  ``FRACTRANS_TIMINGS=1`` additionally writes wall-clock times
to ``timings.json``; they are left out by default so that reruns produce
byte-identical files.  The exit status is 0 iff every requested check passes.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import (
    AdmissibilityError,
    ProblemSpec,
    SolutionField,
    UniformGrid,
    VerificationReport,
    validate_problem,
)
from .exprlang import ExprError, compile_expr
from .mlf import mittag_leffler
from .solver import CauchySpec, SemilinearTerm, solve_ibvp, solve_semilinear
from .verify import (
    DEFAULT_TOL,
    GridLadder,
    check_cauchy_sup,
    check_comparison,
    check_max_principle,
    check_semilinear_comparison,
    check_uniqueness,
    convergence_report,
    convergence_study,
    gaussian_profile_scenario,
    fuzz_max_principle,
)

logger = logging.getLogger("fractrans")

COMMANDS = ("solve", "verify", "compare", "cauchy", "convergence", "mlf", "fuzz")
U64_MAX = 2**64 - 1


class ConfigError(ValueError):
    pass


# allowed keys per section; values are (required, type or types)
_TERM_KEYS = {"order": (True, (int, float)), "coeff": (True, (str, int, float))}
_SCHEMA: dict[str, dict[str, tuple[bool, Any]]] = {
    "problem": {
        "x_min": (False, (int, float)),
        "x_max": (True, (int, float)),
        "T": (True, (int, float)),
        "nx": (True, int),
        "nt": (True, int),
        "time_terms": (True, list),
        "space_terms": (True, list),
        "r": (True, (str, int, float)),
        "F": (True, (str, int, float)),
        "a": (True, (str, int, float)),
        "g": (True, (str, int, float)),
        "compat_tol": (False, (int, float)),
    },
    "verify": {
        "principles": (False, list),
        "tol": (False, (int, float)),
        "f_sign": (False, str),
        "mode": (False, str),
        "fuzz_count": (False, int),
        "seed": (False, int),
        "workers": (False, int),
        "nx": (False, int),
        "nt": (False, int),
        "picard_tol": (False, (int, float)),
        "max_iter": (False, int),
    },
    "compare": {
        "r": (False, (str, int, float)),
        "F": (False, (str, int, float)),
        "a": (False, (str, int, float)),
        "g": (False, (str, int, float)),
        "f": (False, str),
        "mode": (False, str),
    },
    "semilinear": {
        "f": (True, str),
        "u_lo": (True, (int, float)),
        "u_hi": (True, (int, float)),
        "picard_tol": (False, (int, float)),
        "max_iter": (False, int),
        "damping": (False, (int, float)),
    },
    "cauchy": {
        "scenario": (False, str),
        "alpha": (True, (int, float)),
        "q": (False, (str, int, float)),
        "a": (False, (str, int, float)),
        "F": (False, (str, int, float)),
        "X_left": (False, (int, float)),
        "X_right": (False, (int, float)),
        "w_left": (False, (int, float)),
        "w_right": (False, (int, float)),
        "T": (False, (int, float)),
        "nx": (False, int),
        "nt": (False, int),
        "f_sign": (False, str),
        "tol": (False, (int, float)),
    },
    "convergence": {
        "exact": (True, str),
        "levels": (True, list),
        "expected_order": (False, list),
    },
    "mlf": {
        "alpha": (True, (int, float)),
        "beta": (False, (int, float)),
        "z": (True, (int, float)),
    },
    "output": {
        "dir": (False, str),
    },
}


@dataclass
class RunConfig:
    command: str
    problem: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)
    semilinear: dict = field(default_factory=dict)
    cauchy: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)
    mlf: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    source: str | None = None

    @property
    def seed(self) -> int:
        return int(self.verify.get("seed", 0))

    @property
    def out_dir(self) -> Path:
        return Path(self.output.get("dir", "."))

    def problem_spec(self) -> ProblemSpec:
        return _build_problem(self.problem)


def _check_section(name: str, data: dict, schema: dict) -> None:
    for key in data:
        if key not in schema:
            raise ConfigError(f"unknown key '{key}' in [{name}]")
    for key, (required, types) in schema.items():
        if key not in data:
            if required:
                raise ConfigError(f"missing required key '{key}' in [{name}]")
            continue
        value = data[key]
        if isinstance(value, bool) or not isinstance(value, types):
            raise ConfigError(f"key '{key}' in [{name}] has the wrong type ({type(value).__name__})")


def _check_expr(path: str, source, variables=("x", "t")) -> None:
    if isinstance(source, (int, float)):
        return
    try:
        compile_expr(source, variables)
    except ExprError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _validate(cfg: dict) -> None:
    for name, data in cfg.items():
        if name == "command":
            continue
        if name not in _SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        if not isinstance(data, dict):
            raise ConfigError(f"[{name}] must be a table")
        _check_section(name, data, _SCHEMA[name])
    prob = cfg.get("problem", {})
    for kind in ("time_terms", "space_terms"):
        for k, term in enumerate(prob.get(kind, [])):
            if not isinstance(term, dict):
                raise ConfigError(f"problem.{kind}[{k}] must be a table with 'order' and 'coeff'")
            _check_section(f"problem.{kind}[{k}]", term, _TERM_KEYS)
            _check_expr(f"problem.{kind}[{k}].coeff", term["coeff"])
    for key, variables in (("r", ("x", "t")), ("F", ("x", "t")), ("a", ("x",)), ("g", ("t",))):
        if key in prob:
            _check_expr(f"problem.{key}", prob[key], variables)
    for key, variables in (("r", ("x", "t")), ("F", ("x", "t")), ("a", ("x",)), ("g", ("t",))):
        if key in cfg.get("compare", {}):
            _check_expr(f"compare.{key}", cfg["compare"][key], variables)
    if "f" in cfg.get("semilinear", {}):
        _check_expr("semilinear.f", cfg["semilinear"]["f"], ("u",))
    if "f" in cfg.get("compare", {}):
        _check_expr("compare.f", cfg["compare"]["f"], ("u",))
    for key, variables in (("q", ("x", "t")), ("F", ("x", "t")), ("a", ("x",))):
        if key in cfg.get("cauchy", {}):
            _check_expr(f"cauchy.{key}", cfg["cauchy"][key], variables)
    if "exact" in cfg.get("convergence", {}):
        _check_expr("convergence.exact", cfg["convergence"]["exact"])
    seed = cfg.get("verify", {}).get("seed")
    if seed is not None and not 0 <= seed <= U64_MAX:
        raise ConfigError("verify.seed must be an unsigned 64-bit integer")


def load_config(path, command: str | None = None) -> RunConfig:
    """Read and validate a TOML run configuration.

    ``command`` (from the command line) takes precedence over a top-level
    ``command`` key in the file.
    """
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, command, source=str(path))


def config_from_dict(raw: dict, command: str | None = None, source: str | None = None) -> RunConfig:
    raw = dict(raw)
    file_command = raw.pop("command", None)
    command = command or file_command
    if command not in COMMANDS:
        raise ConfigError(f"unknown or missing command {command!r}; expected one of {', '.join(COMMANDS)}")
    _validate(raw)
    needs_problem = command in ("solve", "verify", "compare", "convergence")
    if needs_problem and "problem" not in raw:
        raise ConfigError(f"command '{command}' needs a [problem] section")
    if command == "cauchy" and "cauchy" not in raw:
        raise ConfigError("command 'cauchy' needs a [cauchy] section")
    if command == "convergence" and "convergence" not in raw:
        raise ConfigError("command 'convergence' needs a [convergence] section")
    if command == "mlf" and "mlf" not in raw:
        raise ConfigError("command 'mlf' needs an [mlf] section")
    return RunConfig(command=command, source=source, **{k: dict(v) for k, v in raw.items()})


def _build_problem(prob: dict, overrides: dict | None = None) -> ProblemSpec:
    data = dict(prob)
    data.update(overrides or {})
    grid = UniformGrid(float(data.get("x_min", 0.0)), float(data["x_max"]), float(data["T"]), data["nx"], data["nt"])
    return ProblemSpec.build(
        [(t["order"], _as_source(t["coeff"])) for t in data["time_terms"]],
        [(t["order"], _as_source(t["coeff"])) for t in data["space_terms"]],
        _as_source(data["r"]),
        _as_source(data["F"]),
        _as_source(data["a"]),
        _as_source(data["g"]),
        grid,
        data.get("compat_tol"),
    )


def _as_source(value):
    return repr(float(value)) if isinstance(value, (int, float)) else value


# --- output helpers ---------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.16e}"


def write_solution_csv(field: SolutionField, path) -> None:
    """CSV with header ``x,t,u``; rows ordered by time level, then by space index."""
    x, t, v = field.grid.x, field.grid.t, field.values
    lines = ["x,t,u"]
    for n in range(field.grid.Nt + 1):
        tn = _fmt(t[n])
        lines.extend(f"{_fmt(x[i])},{tn},{_fmt(v[i, n])}" for i in range(field.grid.Nx + 1))
    Path(path).write_text("\n".join(lines) + "\n")


def read_solution_csv(path, grid: UniformGrid | None = None) -> SolutionField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs = np.unique(data[:, 0])
    ts = np.unique(data[:, 1])
    if grid is None:
        grid = UniformGrid(float(xs[0]), float(xs[-1]), float(ts[-1]), len(xs) - 1, len(ts) - 1)
    if data.shape[0] != (grid.Nx + 1) * (grid.Nt + 1):
        raise ValueError(f"{path}: row count does not match the grid")
    values = data[:, 2].reshape(grid.Nt + 1, grid.Nx + 1).T
    return SolutionField(grid, values)


def grid_to_dict(grid: UniformGrid) -> dict:
    return {"x_min": grid.x_min, "x_max": grid.x_max, "T": grid.T, "Nx": grid.Nx, "Nt": grid.Nt}


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _emit_reports(reports: list[VerificationReport], out: Path, name: str = "reports.json") -> int:
    _write_json([r.to_dict() for r in reports], out / name)
    failed = [r for r in reports if not r.verdict]
    for r in failed:
        print(json.dumps(r.to_dict(), indent=2, sort_keys=True, default=_json_default), file=sys.stderr)
    return 0 if not failed else 1


# --- commands ------------------------------------------------------------------


def _f_sign_of(values: np.ndarray) -> str | None:
    if not values.any():
        return "zero"
    if np.all(values <= 0):
        return "nonpositive"
    if np.all(values >= 0):
        return "nonnegative"
    return None


def _semilinear_term(cfg: RunConfig, source: str | None = None) -> SemilinearTerm:
    s = cfg.semilinear
    return SemilinearTerm(source or s["f"], float(s["u_lo"]), float(s["u_hi"]))


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    spec = cfg.problem_spec()
    started = time.perf_counter()
    if cfg.semilinear:
        s = cfg.semilinear
        field = solve_semilinear(spec, _semilinear_term(cfg), float(s.get("picard_tol", 1e-10)),
                                 int(s.get("max_iter", 200)), damping=float(s.get("damping", 1.0)))
    else:
        field = solve_ibvp(spec)
    elapsed = time.perf_counter() - started
    write_solution_csv(field, out / "solution.csv")
    manifest = {
        "command": "solve",
        "grid": grid_to_dict(spec.domain),
        "time_orders": [a.value for a, _ in spec.time_terms],
        "space_orders": [b.value for b, _ in spec.space_terms],
        "coefficients": {
            "time": [p.label for _, p in spec.time_terms],
            "space": [q.label for _, q in spec.space_terms],
            "r": spec.reaction.label,
            "F": spec.forcing.label,
            "a": spec.initial.label,
            "g": spec.boundary.label,
        },
        "spec_fingerprint": spec.fingerprint(),
        "semilinear": cfg.semilinear.get("f") if cfg.semilinear else None,
    }
    _write_json(manifest, out / "manifest.json")
    # wall-clock times would break byte-identical reruns, so they are opt-in
    logger.info("solve took %.3f s", elapsed)
    if os.environ.get("FRACTRANS_TIMINGS") == "1":
        _write_json({"solve_seconds": elapsed}, out / "timings.json")
    return 0


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    spec = cfg.problem_spec()
    v = cfg.verify
    tol = float(v.get("tol", DEFAULT_TOL))
    grid = spec.domain
    F = spec.forcing.on_grid(grid)
    r_zero = not spec.reaction.on_grid(grid).any()
    f_sign = v.get("f_sign") or _f_sign_of(F)
    principles = v.get("principles") or (["max_principle", "uniqueness"] if f_sign else ["uniqueness"])
    reports: list[VerificationReport] = []
    field = None
    for name in principles:
        if name in ("max_principle", "min_principle", "boundary_equality"):
            if f_sign is None:
                raise ConfigError(f"{name} needs a forcing of one sign; F changes sign on the grid")
            if name == "boundary_equality" and not r_zero:
                raise ConfigError("boundary_equality needs r = 0")
            if field is None:
                field = solve_ibvp(spec)
            sign = f_sign
            if name == "min_principle" and f_sign == "zero":
                sign = "zero"
            rep = check_max_principle(field, sign, r_zero if name == "boundary_equality" else False,
                                      tol=tol, forcing=F)
            rep.spec_fingerprint = spec.fingerprint()
            reports.append(rep)
        elif name == "uniqueness":
            reports.append(check_uniqueness(spec))
            if cfg.semilinear:
                ptol = float(v.get("picard_tol", cfg.semilinear.get("picard_tol", 1e-9)))
                reports.append(check_uniqueness(spec, semilinear=_semilinear_term(cfg), picard_tol=ptol,
                                                max_iter=int(v.get("max_iter", 500))))
        else:
            raise ConfigError(f"unknown principle '{name}' for verify")
    return _emit_reports(reports, out)


def cmd_compare(cfg: RunConfig, out: Path) -> int:
    spec1 = cfg.problem_spec()
    c = dict(cfg.compare)
    mode = c.pop("mode", cfg.verify.get("mode", "i"))
    f2 = c.pop("f", None)
    overrides = {k: _as_source(val) for k, val in c.items()}
    spec2 = _build_problem(cfg.problem, overrides)
    tol = float(cfg.verify.get("tol", DEFAULT_TOL))
    if cfg.semilinear:
        f1 = _semilinear_term(cfg)
        f2_term = _semilinear_term(cfg, f2) if f2 else f1
        # here problem 1 is the smaller one: u_f1 <= u_f2
        rep = check_semilinear_comparison(f2_term, f1, spec2, spec1,
                                          picard_tol=float(cfg.semilinear.get("picard_tol", 1e-11)))
    else:
        rep = check_comparison(spec1, spec2, mode, tol)
    return _emit_reports([rep], out)


def _cauchy_inputs(c: dict, seed_nx: int | None, seed_nt: int | None):
    alpha = float(c["alpha"])
    nx = seed_nx or int(c.get("nx", 512))
    nt = seed_nt or int(c.get("nt", 512))
    T = float(c.get("T", 1.0))
    scenario = c.get("scenario")
    constant = None
    if scenario == "gaussian_profile":
        X = float(c.get("X_right", 8.0))
        spec, constant, _ = gaussian_profile_scenario(alpha, X=X, window=float(c.get("w_right", X / 2)))
    elif scenario is None:
        missing = [k for k in ("q", "a", "F", "X_left", "X_right", "w_left", "w_right") if k not in c]
        if missing:
            raise ConfigError(f"[cauchy] is missing {', '.join(missing)}")
        spec = CauchySpec.build(_as_source(c["q"]), _as_source(c["a"]), _as_source(c["F"]),
                                c["X_left"], c["X_right"], c["w_left"], c["w_right"])
    else:
        raise ConfigError(f"unknown cauchy scenario '{scenario}'")
    grid = UniformGrid(spec.X_left, spec.X_right, T, nx, nt)
    return spec, alpha, grid, constant


def cmd_cauchy(cfg: RunConfig, out: Path, nx=None, nt=None) -> int:
    c = cfg.cauchy
    spec, alpha, grid, constant = _cauchy_inputs(c, nx, nt)
    rep = check_cauchy_sup(spec, alpha, grid, float(c.get("tol", DEFAULT_TOL)), c.get("f_sign"))
    if constant is not None:
        rep.details["slope_bound"] = constant
    return _emit_reports([rep], out)


def cmd_convergence(cfg: RunConfig, out: Path) -> int:
    spec = cfg.problem_spec()
    conv = cfg.convergence
    levels = [tuple(int(v) for v in lv) for lv in conv["levels"]]
    exact = compile_expr(conv["exact"])
    rows = convergence_study(GridLadder(spec, tuple(levels)), lambda x, t: exact(x=x, t=t))
    lines = ["level,Nx,Nt,sup_error,observed_order"]
    for r in rows:
        order = "" if r.observed_order is None else _fmt(r.observed_order)
        lines.append(f"{r.level},{r.Nx},{r.Nt},{_fmt(r.sup_error)},{order}")
    (out / "convergence.csv").write_text("\n".join(lines) + "\n")
    expected = conv.get("expected_order")
    if expected is None:
        return 0
    rep = convergence_report(rows, (float(expected[0]), float(expected[1])))
    return _emit_reports([rep], out)


def cmd_mlf(cfg: RunConfig) -> int:
    m = cfg.mlf
    value = mittag_leffler(float(m["alpha"]), float(m.get("beta", 1.0)), float(m["z"]))
    print(f"{value:.16e}")
    return 0


def cmd_fuzz(cfg: RunConfig, out: Path, nx=None, nt=None) -> int:
    v = cfg.verify
    reports = fuzz_max_principle(
        int(v.get("fuzz_count", 200)),
        cfg.seed,
        Nx=nx or int(v.get("nx", 64)),
        Nt=nt or int(v.get("nt", 64)),
        f_sign=v.get("f_sign", "nonpositive"),
        tol=float(v.get("tol", DEFAULT_TOL)),
        workers=int(v.get("workers", 1)),
    )
    return _emit_reports(reports, out)


def run(cfg: RunConfig, *, nx: int | None = None, nt: int | None = None) -> int:
    """Execute one command; artifacts go to ``cfg.out_dir``.  Returns the exit status."""
    if nx is not None or nt is not None:
        if cfg.problem:
            cfg.problem = dict(cfg.problem, **{k: v for k, v in (("nx", nx), ("nt", nt)) if v is not None})
    out = cfg.out_dir
    if cfg.command != "mlf":
        out.mkdir(parents=True, exist_ok=True)
    if cfg.command in ("solve", "verify", "compare", "convergence") and cfg.problem:
        violations = validate_problem(cfg.problem_spec())
        if violations:
            raise AdmissibilityError(violations)
    if cfg.command == "solve":
        return cmd_solve(cfg, out)
    if cfg.command == "verify":
        return cmd_verify(cfg, out)
    if cfg.command == "compare":
        return cmd_compare(cfg, out)
    if cfg.command == "cauchy":
        return cmd_cauchy(cfg, out, nx, nt)
    if cfg.command == "convergence":
        return cmd_convergence(cfg, out)
    if cfg.command == "mlf":
        return cmd_mlf(cfg)
    return cmd_fuzz(cfg, out, nx, nt)


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fractrans", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument("--out", help="output directory (overrides [output] dir)")
    parser.add_argument("--seed", type=_u64, help="random seed (overrides [verify] seed)")
    parser.add_argument("--nx", type=int, help="number of space steps")
    parser.add_argument("--nt", type=int, help="number of time steps")
    parser.add_argument("--alpha", type=float, help="mlf: first parameter")
    parser.add_argument("--beta", type=float, default=None, help="mlf: second parameter")
    parser.add_argument("--z", type=float, help="mlf: argument")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get("FRACTRANS_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            cfg = load_config(args.config, args.command)
        elif args.command == "mlf" and args.alpha is not None and args.z is not None:
            cfg = RunConfig("mlf", mlf={"alpha": args.alpha, "z": args.z})
        else:
            raise ConfigError("--config is required")
        if args.command == "mlf":
            if args.alpha is not None:
                cfg.mlf["alpha"] = args.alpha
            if args.beta is not None:
                cfg.mlf["beta"] = args.beta
            if args.z is not None:
                cfg.mlf["z"] = args.z
        if args.out:
            cfg.output["dir"] = args.out
        if args.seed is not None:
            cfg.verify["seed"] = args.seed
        return run(cfg, nx=args.nx, nt=args.nt)
    except (ConfigError, AdmissibilityError, ExprError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
