"""Implicit L1 time marching for multi-term space-time-fractional transport.

At every time level the fully implicit scheme gives a lower-triangular system
in the space index (the space derivative is taken from the inflow end), so a
single forward substitution advances the solution.  Its matrix has a positive
diagonal and non-positive off-diagonals, which is what makes the discrete
maximum and comparison principles hold exactly in exact arithmetic.
"""

from __future__ import annotations

import logging
import time as _time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.linalg import solve_triangular

from .core import (
    P_FLOOR,
    CoefficientField,
    DataFunction,
    ProblemSpec,
    SolutionField,
    UniformGrid,
    as_order,
    require_admissible,
)
from .exprlang import CompiledExpr, compile_expr
from .fracops import L1Weights, build_weights

logger = logging.getLogger(__name__)

__all__ = [
    "SolverInvariantError",
    "PicardDivergenceError",
    "NotInAdmissibleSetError",
    "SemilinearTerm",
    "CauchySpec",
    "LevelAssembler",
    "solve_ibvp",
    "solve_semilinear",
    "solve_cauchy_truncated",
    "cauchy_as_problem",
    "solve_multiterm_fode",
    "boundary_extended_iterate",
]


class SolverInvariantError(RuntimeError):
    """An internal invariant of the scheme failed (should be unreachable for admissible input)."""


class PicardDivergenceError(RuntimeError):
    def __init__(self, level: int, residuals: Sequence[float]):
        self.level = level
        self.residuals = list(residuals)
        super().__init__(
            f"Picard iteration at time level {level} did not converge in {len(residuals)} iterations "
            f"(last residuals: {', '.join(f'{r:.3e}' for r in self.residuals[-5:])})"
        )


class NotInAdmissibleSetError(ValueError):
    pass


def _space_toeplitz(weights: L1Weights, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrix of the L1 space operator on unknowns 1..N and the column acting on u_0.

    Row i-1 encodes c_0 u_i + sum_{m=1}^{i-1} (c_m - c_{m-1}) u_{i-m} - c_{i-1} u_0.
    """
    c = np.asarray(weights.weights[:N])
    first_col = np.empty(N)
    first_col[0] = c[0]
    first_col[1:] = c[1:] - c[:-1]
    idx = np.arange(N)
    lag = idx[:, None] - idx[None, :]
    T = np.where(lag >= 0, first_col[np.clip(lag, 0, N - 1)], 0.0)
    return T, -c.copy()


class LevelAssembler:
    """Per-level linear systems of the L1 scheme for one problem.

    ``time_perm`` and ``space_perm`` change the order in which the terms are
    summed; they do not change the discrete problem.
    """

    def __init__(
        self,
        spec: ProblemSpec,
        *,
        time_perm: Sequence[int] | None = None,
        space_perm: Sequence[int] | None = None,
        check_structure: bool = False,
    ):
        self.spec = spec
        grid = self.grid = spec.domain
        Nx, Nt = grid.Nx, grid.Nt
        tp = list(range(len(spec.time_terms))) if time_perm is None else list(time_perm)
        sp = list(range(len(spec.space_terms))) if space_perm is None else list(space_perm)
        if sorted(tp) != list(range(len(spec.time_terms))) or sorted(sp) != list(range(len(spec.space_terms))):
            raise ValueError("term permutations must be permutations of the term indices")
        self.time = []
        for k in tp:
            order, p = spec.time_terms[k]
            self.time.append((build_weights(order, grid.tau, Nt), p.on_grid(grid)))
        self.space = []
        for k in sp:
            order, q = spec.space_terms[k]
            w = build_weights(order, grid.h, Nx)
            T, e = _space_toeplitz(w, Nx)
            self.space.append((w, q.on_grid(grid), T, e))
        self.r = spec.reaction.on_grid(grid)
        self.F = spec.forcing.on_grid(grid)
        self.check_structure = check_structure
        self.min_diagonal = np.inf

    def initial_field(self) -> np.ndarray:
        grid = self.grid
        u = np.empty(grid.shape)
        u[:, 0] = self.spec.initial(grid.x)
        u[0, :] = self.spec.boundary(grid.t)
        # the corner belongs to the initial row
        u[0, 0] = self.spec.initial(grid.x[0])
        return u

    def matrix(self, n: int) -> np.ndarray:
        """Lower-triangular system matrix for unknowns u[1:, n]."""
        diag = -self.r[1:, n].copy()
        for w, P in self.time:
            diag += P[1:, n] * w.diagonal
        M = np.zeros((self.grid.Nx, self.grid.Nx))
        for w, Q, T, _ in self.space:
            M += (Q[1:, n] * w.scale)[:, None] * T
        M[np.diag_indices_from(M)] += diag
        d = np.diag(M)
        dmin = float(d.min())
        self.min_diagonal = min(self.min_diagonal, dmin)
        if not dmin >= P_FLOOR:
            raise SolverInvariantError(f"system diagonal {dmin!r} below floor at level {n}")
        if self.check_structure:
            off = M - np.diag(d)
            if np.any(off > 0):
                raise SolverInvariantError(f"positive off-diagonal entry at level {n}; not an M-matrix")
        return M

    def increment_rhs(self, u: np.ndarray, n: int, source: np.ndarray) -> np.ndarray:
        """Right-hand side of ``M (u^n - u^{n-1}) = rhs`` on nodes 1..Nx.

        Both operators are evaluated on differences of the known levels, so a
        field that is constant in x and t gives a right-hand side of exactly 0.
        """
        prev = u[:, n - 1]
        rhs = source + self.r[1:, n] * prev[1:]
        for w, P in self.time:
            if n > 1 and not w.backward_difference:
                D = np.diff(u[1:, :n], axis=1)  # columns m -> u^{m+1} - u^m, m = 0..n-2
                rhs -= P[1:, n] * w.scale * (D @ w.weights[n - 1 : 0 : -1])
        d_prev = np.diff(prev)
        d_bnd = u[0, n] - prev[0]
        for w, Q, _, e in self.space:
            c = np.asarray(w.weights[: self.grid.Nx])
            rhs -= Q[1:, n] * w.scale * (np.convolve(c, d_prev)[: self.grid.Nx] + e * d_bnd)
        return rhs

    def solve_level(self, u: np.ndarray, n: int, source: np.ndarray) -> np.ndarray:
        """New values u[1:, n] given levels < n, u[0, n] and the source at level n."""
        M = self.matrix(n)
        delta = solve_triangular(M, self.increment_rhs(u, n, source), lower=True, check_finite=False)
        return u[1:, n - 1] + delta


def solve_ibvp(
    spec: ProblemSpec,
    *,
    validate: bool = True,
    time_perm: Sequence[int] | None = None,
    space_perm: Sequence[int] | None = None,
    check_structure: bool = False,
) -> SolutionField:
    """Discrete solution of the linear problem on ``spec.domain``.

    Row ``n = 0`` is ``a(x_i)``, column ``i = 0`` is ``g(t_n)``; each later
    level is one forward substitution.
    """
    if validate:
        require_admissible(spec)
    started = _time.perf_counter()
    asm = LevelAssembler(spec, time_perm=time_perm, space_perm=space_perm, check_structure=check_structure)
    u = asm.initial_field()
    for n in range(1, spec.domain.Nt + 1):
        u[1:, n] = asm.solve_level(u, n, asm.F[1:, n])
    elapsed = _time.perf_counter() - started
    logger.debug("solve_ibvp %dx%d in %.3fs", spec.domain.Nx, spec.domain.Nt, elapsed)
    return SolutionField(spec.domain, u, {"seconds": elapsed, "min_diagonal": asm.min_diagonal})


# --- semilinear ---------------------------------------------------------------


@dataclass(frozen=True)
class SemilinearTerm:
    """Semilinear source ``f(u)`` with a declared range for the admissibility check.

    ``f`` is an expression in ``u`` or a vectorised callable.  Membership in
    the admissible set (``df/du <= 0``) is checked on 1000 points of
    ``[u_lo, u_hi]``.
    """

    f: Callable | str
    u_lo: float = -1.0
    u_hi: float = 1.0
    df: Callable | None = None
    label: str = ""

    def __post_init__(self):
        if isinstance(self.f, str):
            object.__setattr__(self, "label", self.label or self.f)
            object.__setattr__(self, "f", compile_expr(self.f, ("u",)))
        elif not self.label:
            object.__setattr__(self, "label", getattr(self.f, "__name__", "<callable>"))
        if not self.u_lo < self.u_hi:
            raise ValueError("need u_lo < u_hi")

    def __call__(self, u):
        out = self.f(u=u) if isinstance(self.f, CompiledExpr) else self.f(u)
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(u)).astype(float)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.df is not None:
            return np.broadcast_to(np.asarray(self.df(u), dtype=float), u.shape)
        h = 1e-6 * np.maximum(1.0, np.abs(u))
        return (self(u + h) - self(u - h)) / (2 * h)

    def sample_points(self, n: int = 1000) -> np.ndarray:
        return np.linspace(self.u_lo, self.u_hi, n)

    def check_admissible(self, n: int = 1000, tol: float = 1e-7) -> None:
        s = self.sample_points(n)
        d = self.derivative(s)
        scale = max(1.0, float(np.max(np.abs(self(s)))))
        bad = np.nonzero(d > tol * scale)[0]
        if bad.size:
            k = bad[0]
            raise NotInAdmissibleSetError(
                f"f = {self.label!r} has df/du = {d[k]:.3e} > 0 at u = {s[k]:.6g}; "
                f"semilinear terms must be non-increasing on [{self.u_lo}, {self.u_hi}]"
            )


def boundary_extended_iterate(spec: ProblemSpec) -> SolutionField:
    """``a(x) + g(t) - g(0)``: the boundary data extended into the interior."""
    grid = spec.domain
    a = np.asarray(spec.initial(grid.x), dtype=float)
    g = np.asarray(spec.boundary(grid.t), dtype=float)
    return SolutionField(grid, a[:, None] + (g - g[0])[None, :])


def solve_semilinear(
    spec: ProblemSpec,
    f: SemilinearTerm,
    picard_tol: float = 1e-10,
    max_iter: int = 200,
    initial_iterate: SolutionField | None = None,
    *,
    damping: float = 1.0,
    validate: bool = True,
) -> SolutionField:
    """Solve ``... = r u + f(u) + F`` with Picard iteration at each time level.

    The iterate at level ``n`` starts from ``initial_iterate[:, n]`` when
    given, otherwise from the converged level ``n - 1``.  Iteration stops once
    successive iterates differ by at most ``picard_tol`` in the sup norm.
    """
    if validate:
        require_admissible(spec)
        f.check_admissible()
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    grid = spec.domain
    if initial_iterate is not None and initial_iterate.grid != grid:
        raise ValueError("initial iterate lives on a different grid")
    asm = LevelAssembler(spec)
    u = asm.initial_field()
    counts = []
    for n in range(1, grid.Nt + 1):
        M = asm.matrix(n)
        known = asm.increment_rhs(u, n, asm.F[1:, n])
        prev = u[1:, n - 1]
        cur = initial_iterate.values[1:, n].copy() if initial_iterate is not None else prev.copy()
        residuals = []
        for _ in range(max_iter):
            new = prev + solve_triangular(M, known + f(cur), lower=True, check_finite=False)
            if damping != 1.0:
                new = cur + damping * (new - cur)
            res = float(np.max(np.abs(new - cur)))
            residuals.append(res)
            cur = new
            if res <= picard_tol:
                break
        else:
            raise PicardDivergenceError(n, residuals)
        u[1:, n] = cur
        counts.append(len(residuals))
    return SolutionField(grid, u, {"picard_iterations": counts, "min_diagonal": asm.min_diagonal})


# --- Cauchy problem on a truncated line ----------------------------------------


@dataclass(frozen=True)
class CauchySpec:
    """``D_t^alpha u + q(x) u_x = F(x, t)`` on the line, truncated to ``[X_left, X_right]``.

    Conclusions are only drawn on the window ``[w_left, w_right]``.
    ``divergent_inverse_q`` records the user's declaration that
    ``int_{-inf}^0 1/|q| = inf``; it cannot be checked from samples.
    """

    q: CoefficientField
    a: DataFunction
    F: CoefficientField
    X_left: float
    X_right: float
    w_left: float
    w_right: float
    margin: float = 0.0
    divergent_inverse_q: bool = True

    @classmethod
    def build(cls, q, a, F, X_left, X_right, w_left, w_right, margin=None, divergent_inverse_q=True):
        if margin is None:
            margin = 0.25 * (X_right - X_left)
        q_field = CoefficientField(q)
        return cls(q_field, DataFunction(a, "x"), CoefficientField(F), float(X_left), float(X_right),
                   float(w_left), float(w_right), float(margin), divergent_inverse_q)

    def __post_init__(self):
        if not self.X_left < 0 < self.X_right:
            raise ValueError("truncation must satisfy X_left < 0 < X_right")
        if not self.X_left < self.w_left < self.w_right < self.X_right:
            raise ValueError("window must lie strictly inside the truncated interval")
        if self.w_left - self.X_left < self.margin or self.X_right - self.w_right < self.margin:
            raise ValueError(
                f"window [{self.w_left}, {self.w_right}] is closer than the margin {self.margin} "
                f"to the truncation [{self.X_left}, {self.X_right}]"
            )

    def window_indices(self, grid: UniformGrid) -> np.ndarray:
        x = grid.x
        return np.nonzero((x >= self.w_left - 1e-12) & (x <= self.w_right + 1e-12))[0]


def _check_inverse_q_growth(spec: CauchySpec, x: np.ndarray, qx: np.ndarray) -> None:
    left = x[x <= 0]
    if left.size < 4:
        return
    inv = 1.0 / np.abs(qx[: left.size])
    # heuristic only: the outer half should still contribute a fair share of the integral
    half = left.size // 2
    outer = integrate.trapezoid(inv[: half + 1], left[: half + 1])
    inner = integrate.trapezoid(inv[half:], left[half:])
    if not spec.divergent_inverse_q or outer < 0.1 * inner:
        warnings.warn(
            "integral of 1/q over (-inf, 0] may be finite; the sup equalities for the Cauchy "
            "problem need it to diverge",
            RuntimeWarning,
            stacklevel=3,
        )


def cauchy_as_problem(spec: CauchySpec, alpha, grid: UniformGrid) -> ProblemSpec:
    """The truncated Cauchy problem as an initial-boundary-value problem with frozen inflow."""
    if abs(grid.x_min - spec.X_left) > 1e-12 or abs(grid.x_max - spec.X_right) > 1e-12:
        raise ValueError("grid must span exactly the truncated interval")
    qx = np.asarray(spec.q.on_grid(grid), dtype=float)
    bad = np.argwhere(qx <= 0)
    if bad.size:
        i, n = bad[0]
        raise ValueError(f"q must be positive on the truncated domain; q={qx[i, n]!r} at x={grid.x[i]!r}")
    _check_inverse_q_growth(spec, grid.x, qx[:, 0])
    inflow = float(spec.a(spec.X_left))
    return ProblemSpec.build(
        [(as_order(alpha), 1.0)],
        [(1.0, spec.q)],
        0.0,
        spec.F,
        spec.a,
        inflow,
        grid,
    )


def solve_cauchy_truncated(spec: CauchySpec, alpha, grid: UniformGrid) -> SolutionField:
    """Upwind (order-1 space) solution on the truncated line; inflow frozen at ``a(X_left)``."""
    problem = cauchy_as_problem(spec, alpha, grid)
    return solve_ibvp(problem)


# --- multi-term fractional ODE -------------------------------------------------


def solve_multiterm_fode(
    orders: Sequence[float],
    coeffs: Sequence,
    rhs,
    u0: float,
    Nt: int,
    T: float,
) -> tuple[np.ndarray, np.ndarray]:
    """L1 solution of ``D^{a_n} u + sum_{i<n} p_i(t) D^{a_i} u = rhs(t)``, ``u(0) = u0``.

    ``orders`` is increasing with the leading (largest) order last; ``coeffs``
    holds ``p_1 .. p_{n-1}`` as constants or callables of ``t``.  Returns the
    node times and values.
    """
    orders = [as_order(a) for a in orders]
    if any(b <= a for a, b in zip(orders, orders[1:])):
        raise ValueError("orders must be strictly increasing")
    if len(coeffs) != len(orders) - 1:
        raise ValueError("need one coefficient per non-leading order")
    if Nt < 1 or not T > 0:
        raise ValueError("need Nt >= 1 and T > 0")
    tau = T / Nt
    t = tau * np.arange(Nt + 1)

    def sample(c):
        vals = np.asarray(c(t) if callable(c) else np.full_like(t, float(c)), dtype=float)
        return np.broadcast_to(vals, t.shape)

    P = [sample(c) for c in coeffs] + [np.ones_like(t)]
    for k, p in enumerate(P[:-1]):
        if np.any(p < 0):
            raise ValueError(f"coefficient p_{k + 1} is negative at some node")
    f = sample(rhs)
    weights = [build_weights(a, tau, Nt) for a in orders]
    u = np.empty(Nt + 1)
    u[0] = u0
    for n in range(1, Nt + 1):
        diag = 0.0
        known = 0.0
        for w, p in zip(weights, P):
            diag += p[n] * w.diagonal
            hist = -w.b0 * u[n - 1]
            if n > 1 and not w.backward_difference:
                hist += np.dot(np.diff(u[:n]), w.weights[n - 1 : 0 : -1])
            known += p[n] * w.scale * hist
        if not diag > 0:
            raise SolverInvariantError(f"zero effective diagonal at level {n}")
        u[n] = (f[n] - known) / diag
    return t, u
