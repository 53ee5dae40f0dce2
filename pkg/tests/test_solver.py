import math

import numpy as np
import pytest

from fractrans.core import AdmissibilityError, ProblemSpec, UniformGrid
from fractrans.mlf import ml_space_solution, ml_time_solution
from fractrans.solver import (
    CauchySpec,
    LevelAssembler,
    NotInAdmissibleSetError,
    PicardDivergenceError,
    SemilinearTerm,
    SolverInvariantError,
    solve_cauchy_truncated,
    solve_ibvp,
    solve_multiterm_fode,
    solve_semilinear,
)
from fractrans.fracops import caputo_quad_oracle
from fractrans.verify import manufactured_problem

from oracles import classical_upwind, global_solve


def test_constant_solution():
    grid = UniformGrid(0, 1, 1, 32, 32)
    spec = ProblemSpec.build([(0.5, 1)], [(0.5, 1)], -1, 2, 2, 2, grid)
    u = solve_ibvp(spec, check_structure=True)
    assert np.max(np.abs(u.values - 2.0)) <= 1e-12


def test_time_oracle_at_final_time():
    grid = UniformGrid(0, 1, 1, 4, 1024)
    exact = lambda t: np.array([ml_time_solution(0.5, -1, 1, s) for s in np.atleast_1d(t)])  # noqa: E731
    spec = ProblemSpec.build([(0.5, 1)], [(0.5, 0)], -1, 0, 1, exact, grid)
    u = solve_ibvp(spec)
    assert np.max(np.abs(u.values[1:, -1] - 0.42758357615)) < 2e-3


def test_space_oracle_at_right_end():
    grid = UniformGrid(0, 1, 1, 1024, 4)
    exact = lambda x: np.array([ml_space_solution(0.5, -1, 1, s) for s in np.atleast_1d(x)])  # noqa: E731
    spec = ProblemSpec.build([(0.5, 1)], [(0.5, 1)], -1, 0, exact, 1, grid)
    u = solve_ibvp(spec)
    assert np.max(np.abs(u.values[-1, :] - 0.42758357615)) < 2e-3


def test_initial_layer_decays_like_tau_to_alpha():
    # the solution behaves like t^alpha near 0, so the sup over all levels is O(tau^alpha)
    errs = []
    for Nt in (64, 256, 1024):
        grid = UniformGrid(0, 1, 1, 2, Nt)
        ex = np.array([ml_time_solution(0.5, -1, 1, s) for s in grid.t])
        g = lambda t, ex=ex, grid=grid: np.interp(t, grid.t, ex)  # noqa: E731
        u = solve_ibvp(ProblemSpec.build([(0.5, 1)], [(0.5, 0)], -1, 0, 1, g, grid))
        errs.append(np.max(np.abs(u.values - ex[None, :])))
    rates = np.log(np.array(errs[:-1]) / np.array(errs[1:])) / math.log(4)
    assert np.all(np.abs(rates - 0.5) < 0.1)


def test_oracle_errors_decrease_along_ladder():
    t_errs, x_errs = [], []
    for N in (64, 128, 256, 512, 1024):
        grid = UniformGrid(0, 1, 1, 2, N)
        g = lambda t: np.array([ml_time_solution(0.5, -1, 1, s) for s in np.atleast_1d(t)])  # noqa: E731
        u = solve_ibvp(ProblemSpec.build([(0.5, 1)], [(0.5, 0)], -1, 0, 1, g, grid))
        t_errs.append(np.max(np.abs(u.values - g(grid.t)[None, :])))
        grid = UniformGrid(0, 1, 1, N, 2)
        a = lambda x: np.array([ml_space_solution(0.5, -1, 1, s) for s in np.atleast_1d(x)])  # noqa: E731
        v = solve_ibvp(ProblemSpec.build([(0.5, 1)], [(0.5, 1)], -1, 0, a, 1, grid))
        x_errs.append(np.max(np.abs(v.values - a(grid.x)[:, None])))
    assert np.all(np.diff(t_errs) < 0) and np.all(np.diff(x_errs) < 0)


def _random_small_problem(rng, Nx=6, Nt=6):
    x = np.linspace(0, 1.3, Nx + 1)
    t = np.linspace(0, 0.9, Nt + 1)
    c = rng.uniform(0.2, 1.5, 6)
    time_terms = [(0.3, lambda x, t, c=c: c[0] + 0.5 * (1 + np.sin(3 * x + t))), (0.8, lambda x, t, c=c: c[1] * (1 + x * t))]
    space_terms = [(0.4, lambda x, t, c=c: c[2] + x), (1.0, lambda x, t, c=c: c[3] * np.exp(-t))]
    r = lambda x, t, c=c: -c[4] * (1 + np.cos(x * t))  # noqa: E731
    F = lambda x, t, c=c: np.sin(5 * x - 2 * t) - c[5]  # noqa: E731
    a = lambda x: np.cos(2 * x)  # noqa: E731
    g = lambda t: 1.0 - t + t**2  # noqa: E731
    return x, t, time_terms, space_terms, r, F, a, g


@pytest.mark.parametrize("seed", range(5))
def test_sweep_matches_dense_global_solve(seed):
    x, t, tt, st, r, F, a, g = _random_small_problem(np.random.default_rng(seed))
    grid = UniformGrid(x[0], x[-1], t[-1], len(x) - 1, len(t) - 1)
    spec = ProblemSpec.build(tt, st, r, F, a, g, grid)
    u = solve_ibvp(spec, check_structure=True)
    ref, A = global_solve(x, t, tt, st, r, F, a, g)
    np.testing.assert_allclose(u.values, ref, rtol=0, atol=1e-12 * np.max(np.abs(ref)))
    # the global matrix is a nonsingular M-matrix: its inverse is entrywise non-negative
    assert np.min(np.linalg.inv(A)) >= -1e-12


def test_level_matrix_structure():
    grid = UniformGrid(0, 1, 1, 16, 4)
    spec = ProblemSpec.build([(0.3, "1+x"), (0.9, 1)], [(0.2, 1), (0.6, "2-x")], "-t", 0, 0, 0, grid)
    M = LevelAssembler(spec).matrix(2)
    assert np.all(np.diag(M) > 0)
    off = M - np.diag(np.diag(M))
    assert np.all(off <= 0)
    assert np.all(np.triu(M, 1) == 0)


def test_classical_limit_matches_upwind():
    grid = UniformGrid(0, 1, 0.5, 20, 25)
    p = lambda x, t: 1 + x  # noqa: E731
    q = lambda x, t: 2 + np.sin(t)  # noqa: E731
    r = lambda x, t: -x * t  # noqa: E731
    F = lambda x, t: np.cos(x + t)  # noqa: E731
    a = lambda x: np.exp(-x)  # noqa: E731
    g = lambda t: 1 + t  # noqa: E731
    u = solve_ibvp(ProblemSpec.build([(1.0, p)], [(1.0, q)], r, F, a, g, grid))
    ref = classical_upwind(grid.x, grid.t, p, q, r, F, a, g)
    np.testing.assert_allclose(u.values, ref, rtol=0, atol=1e-13)


def test_classical_order_one():
    errs = []
    for N in (32, 64, 128):
        grid = UniformGrid(0, 1, 1, N, N)
        spec, exact = manufactured_problem({2: 1.0}, {2: 1.0}, [(1.0, "1")], [(1.0, "1")], "-1", grid)
        u = solve_ibvp(spec)
        X, T = grid.mesh()
        errs.append(np.max(np.abs(u.values - exact(X, T))))
    order = math.log2(errs[-2] / errs[-1])
    assert 0.8 <= order <= 1.2


def test_inadmissible_input_is_rejected():
    grid = UniformGrid(0, 1, 1, 4, 4)
    with pytest.raises(AdmissibilityError):
        solve_ibvp(ProblemSpec.build([(0.5, 1)], [(0.5, 1)], 1, 0, 0, 0, grid))


def test_vanishing_diagonal_trips_invariant():
    grid = UniformGrid(0, 1, 1, 4, 4)
    spec = ProblemSpec.build([(0.5, 0)], [(0.5, 0)], 0, 0, 0, 0, grid)
    with pytest.raises(SolverInvariantError):
        solve_ibvp(spec, validate=False)


# --- semilinear -------------------------------------------------------------------


def _semi_spec(r=0.0, a=1, g=1, F=0, N=16):
    grid = UniformGrid(0, 1, 1, N, N)
    return ProblemSpec.build([(0.4, 1), (0.9, "0.5")], [(0.6, "1+x")], r, F, a, g, grid)


def test_zero_nonlinearity_is_bitwise_linear():
    spec = _semi_spec(r="-1", a="cos(x)", g="1 - t")
    lin = solve_ibvp(spec)
    semi = solve_semilinear(spec, SemilinearTerm("0"))
    assert np.array_equal(lin.values, semi.values)


def test_linear_nonlinearity_reproduces_reaction():
    spec = _semi_spec(a="cos(x)", g="1 - t")
    lin = solve_ibvp(spec.replace(reaction=-1))
    semi = solve_semilinear(spec, SemilinearTerm("-u", -2, 2), picard_tol=1e-12)
    assert np.max(np.abs(lin.values - semi.values)) <= 1e-10


def test_constant_fixed_point():
    semi = solve_semilinear(_semi_spec(), SemilinearTerm("1 - u", 0, 2), picard_tol=1e-12)
    assert np.max(np.abs(semi.values - 1.0)) <= 1e-11


def test_increasing_nonlinearity_rejected():
    with pytest.raises(NotInAdmissibleSetError):
        solve_semilinear(_semi_spec(), SemilinearTerm("u^3", -1, 1))


def test_stiff_nonlinearity_diverges_without_damping():
    spec = _semi_spec(N=4)
    f = SemilinearTerm("-200*u", -2, 2)
    with pytest.raises(PicardDivergenceError) as info:
        solve_semilinear(spec, f, max_iter=30)
    assert len(info.value.residuals) == 30
    damped = solve_semilinear(spec, f, max_iter=2000, damping=0.005, picard_tol=1e-12)
    lin = solve_ibvp(spec.replace(reaction=-200))
    assert np.max(np.abs(damped.values - lin.values)) < 1e-9


# --- Cauchy problem and fractional ODE ---------------------------------------------


def test_cauchy_constant_data():
    spec = CauchySpec.build(1.0, 0.75, 0.0, -8, 8, -4, 4)
    grid = UniformGrid(-8, 8, 1, 64, 64)
    u = solve_cauchy_truncated(spec, 0.5, grid)
    assert np.max(np.abs(u.values - 0.75)) <= 1e-12


def test_cauchy_window_validation():
    with pytest.raises(ValueError):
        CauchySpec.build(1.0, 0.0, 0.0, -8, 8, -7.5, 4)
    with pytest.raises(ValueError):
        solve_cauchy_truncated(CauchySpec.build("x", 0.0, 0.0, -8, 8, -4, 4), 0.5, UniformGrid(-8, 8, 1, 16, 4))


def test_fode_classical_is_exact_on_linear():
    t, u = solve_multiterm_fode([1.0], [], 1.0, 0.0, 50, 2.0)
    np.testing.assert_allclose(u, t, rtol=0, atol=1e-13)


def test_fode_half_order():
    t, u = solve_multiterm_fode([0.5], [], 1.0, 0.0, 2048, 1.0)
    assert abs(u[-1] - 1 / math.gamma(1.5)) < 5e-3
    assert 1 / math.gamma(1.5) == pytest.approx(1.1283791671, abs=1e-10)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_fode_output_checked_by_quadrature():
    # apply the Caputo derivative to the discrete output; it should reproduce rhs = 1
    t, u = solve_multiterm_fode([0.5], [], 1.0, 0.0, 4096, 1.0)
    interp = lambda s: np.interp(s, t, u)  # noqa: E731
    slope = lambda s: np.interp(s, 0.5 * (t[1:] + t[:-1]), np.diff(u) / np.diff(t))  # noqa: E731
    # the interpolated slope has kinks, so ask QUADPACK for modest accuracy only
    val = caputo_quad_oracle(interp, 0.5, 0.75, tol=1e-4, df=slope)
    assert val == pytest.approx(1.0, abs=2e-2)


@pytest.mark.parametrize("seed", range(4))
def test_fode_monotone(seed):
    rng = np.random.default_rng(seed)
    orders = sorted(rng.uniform(0.05, 1.0, 3))
    coeffs = [float(rng.uniform(0, 2)), lambda s: 1 + np.sin(s) ** 2]
    t, u = solve_multiterm_fode(orders, coeffs, 1.0, 0.0, 200, 3.0)
    assert np.all(np.diff(u) >= -1e-14)
