"""Numerical checks of maximum, comparison and uniqueness principles.

Every check works on discrete fields and returns a
:class:`~fractrans.core.VerificationReport`.  Because the scheme's level
matrices are M-matrices the discrete principles hold exactly in exact
arithmetic, so the tolerances here (``1e-10`` relative to the field
magnitude by default) only absorb rounding.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from .exprlang import compile_expr
from .core import (
    CoefficientField,
    ProblemSpec,
    SolutionField,
    UniformGrid,
    VerificationReport,
    as_order,
    boundary_extrema,
)
from .solver import (
    CauchySpec,
    SemilinearTerm,
    boundary_extended_iterate,
    cauchy_as_problem,
    solve_ibvp,
    solve_semilinear,
)

logger = logging.getLogger(__name__)

__all__ = [
    "HypothesisError",
    "DEFAULT_TOL",
    "check_max_principle",
    "check_uniqueness",
    "check_comparison",
    "check_cauchy_sup",
    "check_semilinear_comparison",
    "GridLadder",
    "ConvergenceRow",
    "convergence_study",
    "convergence_report",
    "manufactured_problem",
    "gaussian_profile_scenario",
    "max_abs_derivative",
    "random_admissible_spec",
    "random_comparison_pair",
    "fuzz_max_principle",
]

DEFAULT_TOL = 1e-10

F_SIGNS = ("nonpositive", "nonnegative", "zero")


class HypothesisError(ValueError):
    """The inputs do not satisfy the hypotheses of the principle being checked."""


def _scale(*arrays: np.ndarray) -> float:
    return max(float(np.max(np.abs(a))) for a in arrays)


def _loc(field: SolutionField, idx) -> list:
    i, n = (int(k) for k in idx)
    x, t = field.grid.node(i, n)
    return [i, n, x, t]


def _check_sign(values: np.ndarray, f_sign: str, grid: UniformGrid, what: str = "F") -> None:
    if f_sign not in F_SIGNS:
        raise ValueError(f"f_sign must be one of {F_SIGNS}, got {f_sign!r}")
    bad = {
        "nonpositive": values > 0,
        "nonnegative": values < 0,
        "zero": values != 0,
    }[f_sign]
    if bad.any():
        i, n = np.argwhere(bad)[0]
        raise HypothesisError(
            f"declared {what} {f_sign} but {what}={values[i, n]!r} at node ({i}, {n}) "
            f"(x={grid.node(i, n)[0]:.6g}, t={grid.node(i, n)[1]:.6g})"
        )


def check_max_principle(
    field: SolutionField,
    f_sign: str,
    r_is_zero: bool = False,
    *,
    tol: float = DEFAULT_TOL,
    forcing: CoefficientField | np.ndarray | None = None,
) -> VerificationReport:
    """Check the discrete maximum/minimum principle on ``field``.

    ``f_sign`` is the declared sign of the forcing: ``"nonpositive"`` checks
    ``max u <= max(0, max_S u)``, ``"nonnegative"`` checks
    ``min u >= min(0, min_S u)`` and ``"zero"`` checks both.  With
    ``r_is_zero`` the corresponding equalities ``max u = max_S u`` /
    ``min u = min_S u`` are checked instead.  ``measured`` is the largest
    violation over the applicable statements (<= 0 means none).
    """
    if forcing is not None:
        F = forcing.on_grid(field.grid) if isinstance(forcing, CoefficientField) else np.asarray(forcing)
        _check_sign(F, f_sign, field.grid)
    elif f_sign not in F_SIGNS:
        raise ValueError(f"f_sign must be one of {F_SIGNS}, got {f_sign!r}")
    v = field.values
    bmax, bmin, bmax_at, bmin_at = boundary_extrema(field, with_locations=True)
    gmax_at = np.unravel_index(np.argmax(v), v.shape)
    gmin_at = np.unravel_index(np.argmin(v), v.shape)
    gmax, gmin = float(v[gmax_at]), float(v[gmin_at])
    scale = _scale(v)
    checks = {}
    if f_sign in ("nonpositive", "zero"):
        if r_is_zero:
            checks["max_equality"] = abs(gmax - bmax)
        else:
            checks["max_inequality"] = gmax - max(0.0, bmax)
    if f_sign in ("nonnegative", "zero"):
        if r_is_zero:
            checks["min_equality"] = abs(gmin - bmin)
        else:
            checks["min_inequality"] = min(0.0, bmin) - gmin
    if r_is_zero:
        principle = "boundary_equality"
    else:
        principle = "min_principle" if f_sign == "nonnegative" else "max_principle"
    measured = max(checks.values())
    details = {
        "grid_max": gmax,
        "grid_min": gmin,
        "boundary_max": bmax,
        "boundary_min": bmin,
        "scale": scale,
        "f_sign": f_sign,
        "r_is_zero": r_is_zero,
        "violation": max(measured, 0.0),
        "grid_max_at": _loc(field, gmax_at),
        "grid_min_at": _loc(field, gmin_at),
        "boundary_max_at": _loc(field, bmax_at),
        "boundary_min_at": _loc(field, bmin_at),
    }
    details.update({f"gap_{k}": val for k, val in checks.items()})
    return VerificationReport(principle, measured, tol * scale, "le", details)


def _same_operator(spec1: ProblemSpec, spec2: ProblemSpec, grid: UniformGrid, check_r: bool) -> None:
    if spec1.domain != spec2.domain:
        raise HypothesisError("problems live on different grids")
    for name, t1, t2 in (("time", spec1.time_terms, spec2.time_terms), ("space", spec1.space_terms, spec2.space_terms)):
        if [a.value for a, _ in t1] != [a.value for a, _ in t2]:
            raise HypothesisError(f"{name} orders differ between the two problems")
        for k, ((_, c1), (_, c2)) in enumerate(zip(t1, t2)):
            if not np.array_equal(c1.on_grid(grid), c2.on_grid(grid)):
                raise HypothesisError(f"{name} coefficient {k + 1} differs between the two problems")
    if check_r and not np.array_equal(spec1.reaction.on_grid(grid), spec2.reaction.on_grid(grid)):
        raise HypothesisError("reaction coefficients differ; mode (i) needs a shared r")


def _ordered(name: str, hi: np.ndarray, lo: np.ndarray, coords: Callable) -> None:
    bad = np.argwhere(np.atleast_1d(hi < lo))
    if bad.size:
        idx = tuple(bad[0])
        raise HypothesisError(f"ordering {name} violated at {coords(idx)}")


def _nonneg(name: str, vals: np.ndarray, coords: Callable) -> None:
    bad = np.argwhere(np.atleast_1d(vals < 0))
    if bad.size:
        idx = tuple(bad[0])
        raise HypothesisError(f"{name} >= 0 violated at {coords(idx)}")


def check_uniqueness(
    spec: ProblemSpec,
    tol: float | None = None,
    *,
    semilinear: SemilinearTerm | None = None,
    picard_tol: float = 1e-9,
    max_iter: int = 500,
) -> VerificationReport:
    """Two solves that must coincide given identical boundary data.

    Linear: forward versus reversed term-assembly order (``tol`` defaults to
    1e-12).  Semilinear: default Picard start versus the boundary-extended
    start (``tol`` defaults to ``10 * picard_tol``).
    """
    if semilinear is None:
        tol = 1e-12 if tol is None else tol
        u1 = solve_ibvp(spec)
        rev_t = list(reversed(range(len(spec.time_terms))))
        rev_s = list(reversed(range(len(spec.space_terms))))
        u2 = solve_ibvp(spec, validate=False, time_perm=rev_t, space_perm=rev_s)
        mode = "linear_permuted_assembly"
    else:
        tol = 10 * picard_tol if tol is None else tol
        u1 = solve_semilinear(spec, semilinear, picard_tol, max_iter)
        start = boundary_extended_iterate(spec)
        u2 = solve_semilinear(spec, semilinear, picard_tol, max_iter, start, validate=False)
        mode = "semilinear_two_starts"
    diff = np.abs(u1.values - u2.values)
    at = np.unravel_index(np.argmax(diff), diff.shape)
    return VerificationReport(
        "uniqueness",
        float(diff[at]),
        tol,
        "le",
        {"mode": mode, "max_difference_at": _loc(u1, at)},
        spec.fingerprint(),
    )


def check_comparison(
    spec1: ProblemSpec,
    spec2: ProblemSpec,
    mode: str = "i",
    tol: float = DEFAULT_TOL,
) -> VerificationReport:
    """Ordered data give ordered solutions: ``u1 >= u2``.

    Mode ``"i"``: shared ``r``, ``F1 >= F2``, ``g1 >= g2``, ``a1 >= a2``.
    Mode ``"ii"``: ``0 >= r1 >= r2`` and the second problem's data are also
    non-negative; then additionally ``u2 >= 0``.
    """
    if mode not in ("i", "ii"):
        raise ValueError("mode must be 'i' or 'ii'")
    grid = spec1.domain
    _same_operator(spec1, spec2, grid, check_r=(mode == "i"))
    node = lambda idx: f"node {idx} (x={grid.node(*idx)[0]:.6g}, t={grid.node(*idx)[1]:.6g})"  # noqa: E731
    at_x = lambda idx: f"x={grid.x[idx[0]]:.6g}"  # noqa: E731
    at_t = lambda idx: f"t={grid.t[idx[0]]:.6g}"  # noqa: E731
    F1, F2 = spec1.forcing.on_grid(grid), spec2.forcing.on_grid(grid)
    a1, a2 = np.asarray(spec1.initial(grid.x)), np.asarray(spec2.initial(grid.x))
    g1, g2 = np.asarray(spec1.boundary(grid.t)), np.asarray(spec2.boundary(grid.t))
    _ordered("F1 >= F2", F1, F2, node)
    _ordered("a1 >= a2", a1, a2, at_x)
    _ordered("g1 >= g2", g1, g2, at_t)
    if mode == "ii":
        r1, r2 = spec1.reaction.on_grid(grid), spec2.reaction.on_grid(grid)
        _nonneg("0 - r1", -r1, node)
        _ordered("r1 >= r2", r1, r2, node)
        _nonneg("F2", F2, node)
        _nonneg("a2", a2, at_x)
        _nonneg("g2", g2, at_t)
    u1 = solve_ibvp(spec1)
    u2 = solve_ibvp(spec2)
    d = u1.values - u2.values
    at = np.unravel_index(np.argmin(d), d.shape)
    scale = _scale(u1.values, u2.values)
    measured = -float(d[at])
    details = {"min_difference": float(d[at]), "min_difference_at": _loc(u1, at), "mode": mode, "scale": scale}
    if mode == "ii":
        at2 = np.unravel_index(np.argmin(u2.values), d.shape)
        details["min_u2"] = float(u2.values[at2])
        details["min_u2_at"] = _loc(u2, at2)
        measured = max(measured, -float(u2.values[at2]))
    return VerificationReport("comparison", measured, tol * scale, "le", details, spec1.fingerprint())


def check_cauchy_sup(
    spec: CauchySpec,
    alpha,
    grid: UniformGrid,
    tol: float = DEFAULT_TOL,
    f_sign: str | None = None,
) -> VerificationReport:
    """Sup/inf of the truncated Cauchy solution over the window versus ``a``.

    For ``F <= 0``: window max must not exceed ``sup a`` and must be attained
    on the window's initial row; for ``F >= 0`` the mirrored statement for the
    infimum.  ``sup a`` is taken over the grid nodes of the truncated line.
    """
    problem = cauchy_as_problem(spec, alpha, grid)
    F = problem.forcing.on_grid(grid)
    if f_sign is None:
        f_sign = "zero" if not F.any() else ("nonpositive" if np.all(F <= 0) else "nonnegative")
    _check_sign(F, f_sign, grid)
    u = solve_ibvp(problem)
    win = spec.window_indices(grid)
    W = u.values[win, :]
    a_row = np.asarray(spec.a(grid.x), dtype=float)
    scale = _scale(W, a_row)
    checks = {}
    details = {"window": [spec.w_left, spec.w_right], "f_sign": f_sign, "scale": scale}
    if f_sign in ("nonpositive", "zero"):
        wmax = float(W.max())
        at = np.unravel_index(np.argmax(W), W.shape)
        row_max = float(W[:, 0].max())
        checks["sup_bound"] = wmax - float(a_row.max())
        checks["sup_on_initial_row"] = wmax - row_max
        details.update(window_max=wmax, sup_a=float(a_row.max()), initial_row_max=row_max,
                       window_max_at=_loc(u, (win[at[0]], at[1])))
    if f_sign in ("nonnegative", "zero"):
        wmin = float(W.min())
        at = np.unravel_index(np.argmin(W), W.shape)
        row_min = float(W[:, 0].min())
        checks["inf_bound"] = float(a_row.min()) - wmin
        checks["inf_on_initial_row"] = row_min - wmin
        details.update(window_min=wmin, inf_a=float(a_row.min()), initial_row_min=row_min,
                       window_min_at=_loc(u, (win[at[0]], at[1])))
    details.update({f"gap_{k}": v for k, v in checks.items()})
    return VerificationReport("cauchy_sup", max(checks.values()), tol * scale, "le", details, problem.fingerprint())


def check_semilinear_comparison(
    f1: SemilinearTerm,
    f2: SemilinearTerm,
    spec1: ProblemSpec,
    spec2: ProblemSpec,
    tol: float | None = None,
    *,
    picard_tol: float = 1e-11,
    max_iter: int = 500,
) -> VerificationReport:
    """``f1 <= f2`` and smaller data give ``u_f1 <= u_f2``.

    ``spec1`` and ``spec2`` share ``p, q, r, F`` and differ only in ``a, g``.
    """
    grid = spec1.domain
    _same_operator(spec1, spec2, grid, check_r=True)
    if not np.array_equal(spec1.forcing.on_grid(grid), spec2.forcing.on_grid(grid)):
        raise HypothesisError("the two problems must share the forcing F")
    for f in (f1, f2):
        f.check_admissible()
    lo, hi = min(f1.u_lo, f2.u_lo), max(f1.u_hi, f2.u_hi)
    s = np.linspace(lo, hi, 1000)
    _ordered("f1 <= f2", f2(s), f1(s), lambda idx: f"u={s[idx[0]]:.6g}")
    _ordered("a1 <= a2", np.asarray(spec2.initial(grid.x)), np.asarray(spec1.initial(grid.x)),
             lambda idx: f"x={grid.x[idx[0]]:.6g}")
    _ordered("g1 <= g2", np.asarray(spec2.boundary(grid.t)), np.asarray(spec1.boundary(grid.t)),
             lambda idx: f"t={grid.t[idx[0]]:.6g}")
    u1 = solve_semilinear(spec1, f1, picard_tol, max_iter)
    u2 = solve_semilinear(spec2, f2, picard_tol, max_iter)
    d = u1.values - u2.values
    at = np.unravel_index(np.argmax(d), d.shape)
    scale = _scale(u1.values, u2.values)
    if tol is None:
        tol_abs = DEFAULT_TOL * scale + 10 * picard_tol
    else:
        tol_abs = tol
    return VerificationReport(
        "semilinear_comparison",
        float(d[at]),
        tol_abs,
        "le",
        {"max_difference_at": _loc(u1, at), "f1": f1.label, "f2": f2.label, "scale": scale},
        spec1.fingerprint(),
    )


# --- convergence studies -------------------------------------------------------


@dataclass(frozen=True)
class GridLadder:
    base: ProblemSpec
    levels: tuple[tuple[int, int], ...]

    def __post_init__(self):
        levels = tuple((int(a), int(b)) for a, b in self.levels)
        if len(levels) < 2:
            raise ValueError("a ladder needs at least two levels")
        for (x0, t0), (x1, t1) in zip(levels, levels[1:]):
            if x1 < x0 or t1 < t0 or (x1, t1) == (x0, t0):
                raise ValueError(f"ladder levels must increase: {levels}")
        object.__setattr__(self, "levels", levels)

    def spec_at(self, k: int) -> ProblemSpec:
        Nx, Nt = self.levels[k]
        return self.base.replace(domain=self.base.domain.with_sizes(Nx, Nt))


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    Nx: int
    Nt: int
    sup_error: float
    observed_order: float | None


def convergence_study(ladder: GridLadder, exact: Callable) -> list[ConvergenceRow]:
    """Sup-norm errors against ``exact(x, t)`` along the ladder, with pairwise orders ``log2(e_k / e_{k+1})``.

    Orders are computed per refinement factor, so non-doubling ladders work
    as well.  A non-monotone error sequence is logged, not raised.
    """
    rows: list[ConvergenceRow] = []
    prev = None
    for k, (Nx, Nt) in enumerate(ladder.levels):
        spec = ladder.spec_at(k)
        u = solve_ibvp(spec)
        X, T = spec.domain.mesh()
        ref = np.broadcast_to(np.asarray(exact(X, T), dtype=float), X.shape)
        err = float(np.max(np.abs(u.values - ref)))
        order = None
        if prev is not None:
            pNx, pNt, perr = prev
            factor = max(Nx / pNx, Nt / pNt)
            if perr > 0 and err > 0:
                order = math.log(perr / err) / math.log(factor)
            if err > perr:
                logger.warning("error increased from %.3e to %.3e at level %d", perr, err, k)
        rows.append(ConvergenceRow(k, Nx, Nt, err, order))
        prev = (Nx, Nt, err)
    return rows


def convergence_report(rows: Sequence[ConvergenceRow], expected: tuple[float, float] | None = None,
                       zero_tol: float = 1e-12) -> VerificationReport:
    """Summarise a study; with ``expected = (lo, hi)`` the last observed order must lie in range.

    If every error is below ``zero_tol`` (an exactly reproduced solution) the
    study passes regardless of order.
    """
    errors = [r.sup_error for r in rows]
    monotone = all(b <= a for a, b in zip(errors, errors[1:]))
    details = {"errors": errors, "orders": [r.observed_order for r in rows], "monotone": monotone}
    if max(errors) <= zero_tol:
        return VerificationReport("convergence", max(errors), zero_tol, "le", {**details, "exact": True})
    if expected is None:
        return VerificationReport("convergence", 0.0 if monotone else 1.0, 0.0, "le", details)
    lo, hi = expected
    order = rows[-1].observed_order
    details["expected"] = [lo, hi]
    distance = 0.0 if lo <= order <= hi else min(abs(order - lo), abs(order - hi))
    return VerificationReport("convergence", distance, 0.0, "le", {**details, "observed_order": order})


def _caputo_poly_source(coeffs: dict, var: str, order: float) -> str:
    """Closed-form Caputo derivative of ``sum_k c_k var^k`` as expression text."""
    parts = []
    for k, c in sorted(coeffs.items()):
        if k == 0 or c == 0:
            continue
        factor = c * math.exp(gammaln(k + 1) - gammaln(k + 1 - order))
        power = k - order
        parts.append(f"{factor!r}*{var}^{power!r}" if power != 0 else repr(factor))
    return " + ".join(parts) if parts else "0"


def _poly_source(coeffs: dict, var: str) -> str:
    parts = [f"{c!r}*{var}^{k!r}" if k else repr(c) for k, c in sorted(coeffs.items()) if c != 0]
    return " + ".join(parts) if parts else "0"


def manufactured_problem(
    time_poly: dict,
    space_poly: dict,
    time_terms: Sequence[tuple[float, str]],
    space_terms: Sequence[tuple[float, str]],
    reaction: str,
    grid: UniformGrid,
) -> tuple[ProblemSpec, Callable]:
    """Problem whose exact solution is ``P(t) + Q(x)`` for polynomials ``P``, ``Q``.

    Polynomials are ``{power: coefficient}`` dicts with non-negative integer
    powers; coefficients of the equation are expression strings.  The forcing
    is built from closed-form Caputo derivatives of monomials,
    ``D^a s^k = Gamma(k+1) / Gamma(k+1-a) s^(k-a)``.  Returns the spec and
    the exact solution.
    """
    P = _poly_source(time_poly, "t")
    Q = _poly_source(space_poly, "x")
    pieces = [f"({p})*({_caputo_poly_source(time_poly, 't', a)})" for a, p in time_terms]
    pieces += [f"({q})*({_caputo_poly_source(space_poly, 'x', b)})" for b, q in space_terms]
    pieces.append(f"-({reaction})*({P} + {Q})")
    forcing = " + ".join(pieces)

    def exact(x, t):
        x, t = np.asarray(x, float), np.asarray(t, float)
        out = np.zeros(np.broadcast_shapes(x.shape, t.shape))
        for k, c in time_poly.items():
            out = out + c * t**k
        for k, c in space_poly.items():
            out = out + c * x**k
        return out

    p0 = float(time_poly.get(0, 0.0))
    q_left = float(exact(grid.x_min, 0.0)) - p0
    spec = ProblemSpec.build(
        time_terms,
        space_terms,
        reaction,
        forcing,
        f"{p0!r} + {Q}",
        f"{P} + {q_left!r}",
        grid,
    )
    return spec, exact


# --- the Gaussian scenario for the Cauchy problem --------------------------------------


def max_abs_derivative(dphi: Callable[[float], float], lo: float, hi: float, samples: int = 20001) -> tuple[float, float]:
    """``max |dphi|`` on ``[lo, hi]``: dense sampling, then bounded refinement.

    Returns ``(value, location)``.
    """
    xs = np.linspace(lo, hi, samples)
    vals = np.abs(dphi(xs))
    k = int(np.argmax(vals))
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, samples - 1)]
    res = optimize.minimize_scalar(lambda s: -abs(float(dphi(s))), bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-13})
    best = max((float(vals[k]), float(xs[k])), (-float(res.fun), float(res.x)))
    return best


def gaussian_profile_scenario(
    alpha,
    *,
    phi: Callable | None = None,
    dphi: Callable | None = None,
    psi0: float = 0.0,
    X: float = 8.0,
    window: float = 4.0,
) -> tuple[CauchySpec, float, Callable]:
    """Cauchy problem with solution ``psi(t) + phi(x)`` and ``q = 1``.

    ``psi`` has Caputo derivative ``-c`` with ``c = max |phi'|``, so the
    forcing ``F = -c + phi'(x)`` is non-positive although ``phi`` is not
    monotone.  Defaults to ``phi(x) = exp(-x^2)``, where ``c = sqrt(2) e^{-1/2}``.
    Returns ``(spec, c, exact)``.
    """
    alpha = as_order(alpha).value
    if phi is None:
        phi = lambda x: np.exp(-np.asarray(x, float) ** 2)  # noqa: E731
        dphi = lambda x: -2.0 * np.asarray(x, float) * np.exp(-np.asarray(x, float) ** 2)  # noqa: E731
    elif dphi is None:
        raise ValueError("dphi is required with a custom phi")
    c, _ = max_abs_derivative(dphi, -X, X)
    g = math.exp(gammaln(1.0 + alpha))

    def psi(t):
        return psi0 - c * np.asarray(t, float) ** alpha / g

    def forcing(x, t):
        x, t = np.asarray(x, float), np.asarray(t, float)
        # clip rounding so the declared sign holds exactly
        return np.minimum(-c + dphi(x) + 0.0 * t, 0.0)

    def exact(x, t):
        return psi(t) + phi(x)

    spec = CauchySpec.build(
        1.0,
        lambda x: psi0 + phi(x),
        forcing,
        -X,
        X,
        -window,
        window,
    )
    return spec, c, exact


# --- randomized problem generators -------------------------------------------------


def _r(v: float) -> str:
    return repr(round(float(v), 6))


def _positive_expr(rng: np.random.Generator, base_lo: float, base_hi: float, amp: float) -> str:
    """Smooth trigonometric coefficient, non-negative by construction."""
    c0 = rng.uniform(base_lo, base_hi)
    terms = [_r(c0)]
    for _ in range(rng.integers(1, 3)):
        c = rng.uniform(0, amp)
        kx, kt, ph = rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0, 2 * np.pi)
        terms.append(f"{_r(c)}*(1 + sin({_r(kx)}*x + {_r(kt)}*t + {_r(ph)}))")
    return " + ".join(terms)


def _random_orders(rng: np.random.Generator, count: int) -> list[float]:
    while True:
        vals = sorted(round(float(v), 4) for v in rng.uniform(0.05, 1.0, count))
        if rng.random() < 0.3:
            vals[-1] = 1.0
        if all(b > a for a, b in zip(vals, vals[1:])):
            return vals


def _random_data(rng: np.random.Generator, grid: UniformGrid, nonneg: bool = False) -> tuple[str, str]:
    A = rng.uniform(-1, 1, 3)
    k = rng.uniform(0.5, 4, 2)
    if nonneg:
        a = f"{_r(abs(A[0]) + 0.1)} + {_r(abs(A[1]))}*(1 + sin({_r(k[0])}*x)) + {_r(abs(A[2]))}*x^2"
    else:
        a = f"{_r(A[0])} + {_r(A[1])}*sin({_r(k[0])}*x + 0.3) + {_r(A[2])}*cos({_r(k[1])}*x)"
    a0 = float(compile_expr(a, ("x",))(grid.x_min))
    B = rng.uniform(-1, 1, 2)
    kt = rng.uniform(0.5, 4, 2)
    if nonneg:
        g = f"{a0!r} + {_r(abs(B[0]))}*(1 - cos({_r(kt[0])}*t)) + {_r(abs(B[1]))}*t"
    else:
        g = f"{a0!r} + {_r(B[0])}*sin({_r(kt[0])}*t) + {_r(B[1])}*(cos({_r(kt[1])}*t) - 1)"
    return a, g


def random_admissible_spec(
    rng: np.random.Generator,
    Nx: int = 64,
    Nt: int = 64,
    *,
    f_sign: str = "nonpositive",
    r_zero: bool = False,
    max_terms: int = 3,
) -> ProblemSpec:
    """Random admissible problem with smooth trigonometric coefficients.

    ``f_sign`` fixes the sign of the forcing (``"zero"`` gives ``F = 0``).
    """
    n = int(rng.integers(1, max_terms + 1))
    m = int(rng.integers(1, max_terms + 1))
    alphas = _random_orders(rng, n)
    betas = _random_orders(rng, m)
    grid = UniformGrid(0.0, round(float(rng.uniform(0.5, 2.0)), 4), round(float(rng.uniform(0.5, 2.0)), 4), Nx, Nt)
    # the first time coefficient keeps sum p_i bounded away from zero
    p = [_positive_expr(rng, 0.2 if k == 0 else 0.0, 1.5, 1.0) for k in range(n)]
    q = [_positive_expr(rng, 0.0, 1.5, 1.0) for _ in range(m)]
    r = "0" if r_zero else f"-({_positive_expr(rng, 0.0, 2.0, 1.0)})"
    if f_sign == "zero":
        F = "0"
    else:
        body = _positive_expr(rng, 0.0, 1.0, 1.0)
        F = f"-({body})" if f_sign == "nonpositive" else body
    a, g = _random_data(rng, grid)
    return ProblemSpec.build(list(zip(alphas, p)), list(zip(betas, q)), r, F, a, g, grid)


def random_comparison_pair(rng: np.random.Generator, mode: str = "i", Nx: int = 32, Nt: int = 32) -> tuple[ProblemSpec, ProblemSpec]:
    """Random ordered pair ``(spec1, spec2)`` satisfying the hypotheses of ``mode``."""
    base = random_admissible_spec(rng, Nx, Nt, f_sign="nonnegative" if mode == "ii" else "nonpositive")
    grid = base.domain
    if mode == "ii":
        a2, g2 = _random_data(rng, grid, nonneg=True)
        F2 = base.forcing.label
        r2 = base.reaction.label
        theta = rng.uniform(0.0, 1.0)
        r1 = f"{_r(theta)}*({r2})"
    else:
        a2, g2 = _random_data(rng, grid)
        F2 = base.forcing.label
        r1 = r2 = base.reaction.label
    d0 = _r(rng.uniform(0, 0.5))
    dF = _positive_expr(rng, 0.0, 0.5, 0.5)
    a1 = f"({a2}) + ({d0} + {_r(rng.uniform(0, 0.5))}*x^2)"
    g1 = f"({g2}) + ({d0} + {_r(rng.uniform(0, 0.5))}*(1 - cos(t)))"
    F1 = f"({F2}) + ({dF})"
    spec2 = base.replace(initial=a2, boundary=g2, forcing=F2, reaction=r2)
    spec1 = base.replace(initial=a1, boundary=g1, forcing=F1, reaction=r1)
    return spec1, spec2


def _fuzz_one(args) -> dict:
    seed, index, Nx, Nt, f_sign, tol = args
    rng = np.random.default_rng([seed, index])
    spec = random_admissible_spec(rng, Nx, Nt, f_sign=f_sign)
    field = solve_ibvp(spec)
    report = check_max_principle(field, f_sign, False, tol=tol, forcing=spec.forcing)
    report.spec_fingerprint = spec.fingerprint()
    report.details["index"] = index
    return report.to_dict()


def fuzz_max_principle(
    count: int,
    seed: int,
    *,
    Nx: int = 64,
    Nt: int = 64,
    f_sign: str = "nonpositive",
    tol: float = DEFAULT_TOL,
    workers: int = 1,
) -> list[VerificationReport]:
    """Maximum-principle check on ``count`` random admissible problems.

    Problem ``k`` is drawn from ``default_rng([seed, k])``, so results do not
    depend on ``workers``.
    """
    jobs = [(seed, k, Nx, Nt, f_sign, tol) for k in range(count)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            dicts = list(pool.map(_fuzz_one, jobs, chunksize=8))
    else:
        dicts = [_fuzz_one(j) for j in jobs]
    return [_report_from_dict(d) for d in dicts]


def _report_from_dict(d: dict) -> VerificationReport:
    details = dict(d["details"])
    details.update(d["locations"])
    return VerificationReport(d["principle"], d["measured"], d["threshold"], d["direction"], details, d["spec_fingerprint"])

