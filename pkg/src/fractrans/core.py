"""Domain types shared across the package: orders, grids, coefficient fields,
problem descriptions, solution fields and verification reports."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .exprlang import CompiledExpr, compile_expr

__all__ = [
    "FractionalOrder",
    "as_order",
    "UniformGrid",
    "CoefficientField",
    "DataFunction",
    "ProblemSpec",
    "SolutionField",
    "VerificationReport",
    "Violation",
    "AdmissibilityError",
    "StructuralError",
    "validate_problem",
    "require_admissible",
    "boundary_extrema",
    "P_FLOOR",
    "PRINCIPLES",
]

P_FLOOR = 1e-12

PRINCIPLES = (
    "max_principle",
    "min_principle",
    "boundary_equality",
    "uniqueness",
    "comparison",
    "cauchy_sup",
    "semilinear_comparison",
    "convergence",
)


class StructuralError(ValueError):
    """Malformed input, e.g. a tabulated coefficient whose shape does not match the grid."""


class AdmissibilityError(ValueError):
    def __init__(self, violations: Sequence["Violation"]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True, order=True)
class FractionalOrder:
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 < v <= 1.0):
            raise ValueError(f"fractional order must lie in (0, 1], got {self.value!r}")
        object.__setattr__(self, "value", v)

    def __float__(self) -> float:
        return self.value

    @property
    def is_integer(self) -> bool:
        return self.value == 1.0


def as_order(value) -> FractionalOrder:
    return value if isinstance(value, FractionalOrder) else FractionalOrder(value)


@dataclass(frozen=True)
class UniformGrid:
    x_min: float
    x_max: float
    T: float
    Nx: int
    Nt: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if not self.T > 0:
            raise ValueError(f"need T > 0, got {self.T}")
        if int(self.Nx) != self.Nx or self.Nx < 2 or int(self.Nt) != self.Nt or self.Nt < 2:
            raise ValueError(f"need integer Nx, Nt >= 2, got Nx={self.Nx}, Nt={self.Nt}")
        object.__setattr__(self, "Nx", int(self.Nx))
        object.__setattr__(self, "Nt", int(self.Nt))

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.Nx

    @property
    def tau(self) -> float:
        return self.T / self.Nt

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.Nx + 1)

    @property
    def t(self) -> np.ndarray:
        return self.tau * np.arange(self.Nt + 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Nx + 1, self.Nt + 1)

    def node(self, i: int, n: int) -> tuple[float, float]:
        return (self.x_min + i * self.h, n * self.tau)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as two ``(Nx+1, Nt+1)`` arrays."""
        return np.meshgrid(self.x, self.t, indexing="ij")

    def with_sizes(self, Nx: int | None = None, Nt: int | None = None) -> "UniformGrid":
        return UniformGrid(self.x_min, self.x_max, self.T, Nx or self.Nx, Nt or self.Nt)


class CoefficientField:
    """A real function of ``(x, t)`` given as an expression, a constant,
    a vectorised callable, or a node table tied to one grid."""

    def __init__(self, source, *, label: str | None = None):
        self.expr: CompiledExpr | None = None
        self.table: np.ndarray | None = None
        self.func: Callable | None = None
        if isinstance(source, CoefficientField):
            self.expr, self.table, self.func = source.expr, source.table, source.func
            self.label = label or source.label
            return
        if isinstance(source, str):
            self.expr = compile_expr(source)
        elif isinstance(source, CompiledExpr):
            self.expr = source
        elif isinstance(source, (int, float, np.floating, np.integer)):
            self.expr = compile_expr(repr(float(source)))
        elif isinstance(source, np.ndarray):
            table = np.array(source, dtype=float)
            table.setflags(write=False)
            self.table = table
        elif callable(source):
            self.func = source
        else:
            raise TypeError(f"cannot build a coefficient field from {type(source).__name__}")
        self.label = label or self.describe()

    @classmethod
    def constant(cls, c: float) -> "CoefficientField":
        return cls(float(c))

    def describe(self) -> str:
        if self.expr is not None:
            return self.expr.source
        if self.table is not None:
            return f"<table {self.table.shape[0]}x{self.table.shape[1]}>"
        return getattr(self.func, "__name__", "<callable>")

    def on_grid(self, grid: UniformGrid) -> np.ndarray:
        if self.table is not None:
            if self.table.shape != grid.shape:
                raise StructuralError(
                    f"tabulated coefficient has shape {self.table.shape}, grid needs {grid.shape}"
                )
            return self.table
        X, T = grid.mesh()
        return self(X, T)

    def __call__(self, x, t):
        if self.expr is not None:
            out = self.expr(x=x, t=t)
        elif self.func is not None:
            out = np.asarray(self.func(x, t), dtype=float)
            out = np.broadcast_to(out, np.broadcast_shapes(np.shape(x), np.shape(t))).astype(float)
        else:
            raise StructuralError("tabulated coefficient can only be sampled on its grid")
        return out

    def fingerprint(self) -> str:
        if self.table is not None:
            return hashlib.sha256(self.table.tobytes()).hexdigest()[:16]
        return self.describe()

    def __repr__(self) -> str:
        return f"CoefficientField({self.label!r})"


class DataFunction:
    """Initial data ``a(x)`` or boundary data ``g(t)`` in one variable."""

    def __init__(self, source, variable: str, *, label: str | None = None):
        self.variable = variable
        self.expr: CompiledExpr | None = None
        self.func: Callable | None = None
        if isinstance(source, DataFunction):
            self.expr, self.func = source.expr, source.func
        elif isinstance(source, str):
            self.expr = compile_expr(source, (variable,))
        elif isinstance(source, (int, float, np.floating, np.integer)):
            self.expr = compile_expr(repr(float(source)), (variable,))
        elif callable(source):
            self.func = source
        else:
            raise TypeError(f"cannot build a data function from {type(source).__name__}")
        self.label = label or (self.expr.source if self.expr else getattr(self.func, "__name__", "<callable>"))

    def __call__(self, s):
        if self.expr is not None:
            return self.expr(s)
        out = np.asarray(self.func(s), dtype=float)
        if np.ndim(s) == 0 and out.size == 1:
            return float(out.reshape(()))
        return out

    def __repr__(self) -> str:
        return f"DataFunction({self.variable}: {self.label!r})"


Coefficient = Union[CoefficientField, str, float, Callable, np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    """Initial-boundary-value problem

        sum_i p_i D_t^{alpha_i} u + sum_j q_j D_x^{beta_j} u = r u + F

    on ``domain`` with ``u(x, 0) = a(x)`` and ``u(x_min, t) = g(t)``.
    """

    time_terms: tuple[tuple[FractionalOrder, CoefficientField], ...]
    space_terms: tuple[tuple[FractionalOrder, CoefficientField], ...]
    reaction: CoefficientField
    forcing: CoefficientField
    initial: DataFunction
    boundary: DataFunction
    domain: UniformGrid
    compat_tol: float | None = None

    @classmethod
    def build(
        cls,
        time_terms,
        space_terms,
        reaction,
        forcing,
        initial,
        boundary,
        domain: UniformGrid,
        compat_tol: float | None = None,
    ) -> "ProblemSpec":
        """Coerce loose inputs (floats, strings, callables) into a spec."""
        return cls(
            tuple((as_order(a), CoefficientField(p)) for a, p in time_terms),
            tuple((as_order(b), CoefficientField(q)) for b, q in space_terms),
            CoefficientField(reaction),
            CoefficientField(forcing),
            DataFunction(initial, "x"),
            DataFunction(boundary, "t"),
            domain,
            compat_tol,
        )

    def replace(self, **changes) -> "ProblemSpec":
        fields = dict(
            time_terms=self.time_terms,
            space_terms=self.space_terms,
            reaction=self.reaction,
            forcing=self.forcing,
            initial=self.initial,
            boundary=self.boundary,
            domain=self.domain,
            compat_tol=self.compat_tol,
        )
        fields.update(changes)
        return ProblemSpec.build(**fields)

    @property
    def grid(self) -> UniformGrid:
        return self.domain

    def fingerprint(self) -> str:
        payload = {
            "time_terms": [(a.value, p.fingerprint()) for a, p in self.time_terms],
            "space_terms": [(b.value, q.fingerprint()) for b, q in self.space_terms],
            "reaction": self.reaction.fingerprint(),
            "forcing": self.forcing.fingerprint(),
            "initial": self.initial.label,
            "boundary": self.boundary.label,
            "domain": [self.domain.x_min, self.domain.x_max, self.domain.T, self.domain.Nx, self.domain.Nt],
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class Violation:
    condition: str
    message: str
    node: tuple[int, int] | None = None
    coords: tuple[float, float] | None = None
    value: float | None = None

    def __str__(self) -> str:
        where = ""
        if self.node is not None:
            where = f" at node {self.node} (x={self.coords[0]:.6g}, t={self.coords[1]:.6g})"
        return f"condition {self.condition}: {self.message}{where}"


def _first_bad(mask: np.ndarray) -> tuple[int, int] | None:
    if not mask.any():
        return None
    # first offending node in (i, n) lexicographic order
    i, n = np.argwhere(mask)[0]
    return int(i), int(n)


def validate_problem(spec: ProblemSpec) -> list[Violation]:
    """All admissibility violations of ``spec``; empty iff admissible.

    Coefficients are sampled at every grid node.  A tabulated coefficient of
    the wrong shape raises :class:`StructuralError` instead.
    """
    grid = spec.domain
    out: list[Violation] = []

    def add(condition, message, mask, values):
        bad = _first_bad(mask)
        if bad is not None:
            out.append(Violation(condition, message, bad, grid.node(*bad), float(values[bad])))

    if not spec.time_terms:
        out.append(Violation("(2.1)", "at least one time-derivative term is required"))
    if not spec.space_terms:
        out.append(Violation("(2.1)", "at least one space-derivative term is required"))
    for name, terms in (("alpha", spec.time_terms), ("beta", spec.space_terms)):
        orders = [o.value for o, _ in terms]
        if any(b <= a for a, b in zip(orders, orders[1:])):
            out.append(Violation("(2.1)", f"orders {name} must be strictly increasing, got {orders}"))

    p_sum = np.zeros(grid.shape)
    for k, (order, p) in enumerate(spec.time_terms):
        vals = p.on_grid(grid)
        p_sum = p_sum + vals
        add("(2.1)", f"time coefficient p_{k + 1} (order {order.value}) must be non-negative", vals < 0, vals)
    for k, (order, q) in enumerate(spec.space_terms):
        vals = q.on_grid(grid)
        add("(2.1)", f"space coefficient q_{k + 1} (order {order.value}) must be non-negative", vals < 0, vals)
    if spec.time_terms:
        add("(2.1)", f"sum of time coefficients must be positive (>= {P_FLOOR:g})", p_sum < P_FLOOR, p_sum)
    r = spec.reaction.on_grid(grid)
    add("(2.3)", "reaction coefficient r must be non-positive", r > 0, r)
    F = spec.forcing.on_grid(grid)
    if not np.all(np.isfinite(F)):
        add("(1.5)", "forcing must be finite", ~np.isfinite(F), F)

    a0 = float(spec.initial(grid.x_min))
    g0 = float(spec.boundary(0.0))
    tol = spec.compat_tol if spec.compat_tol is not None else 1e-12 * max(1.0, abs(g0))
    if abs(a0 - g0) > tol:
        out.append(
            Violation(
                "(1.6)",
                f"initial and boundary data disagree at the corner: a(x_min)={a0!r}, g(0)={g0!r}",
                (0, 0),
                grid.node(0, 0),
                a0 - g0,
            )
        )
    return out


def require_admissible(spec: ProblemSpec) -> None:
    violations = validate_problem(spec)
    if violations:
        raise AdmissibilityError(violations)


@dataclass(frozen=True)
class SolutionField:
    grid: UniformGrid
    values: np.ndarray = field(repr=False)
    info: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise StructuralError(f"values have shape {vals.shape}, grid needs {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("solution field contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def initial_row(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def inflow_column(self) -> np.ndarray:
        return self.values[0, :]

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.grid.shape, dtype=bool)
        mask[:, 0] = True
        mask[0, :] = True
        return mask

    def __sub__(self, other: "SolutionField") -> "SolutionField":
        if other.grid != self.grid:
            raise StructuralError("fields live on different grids")
        return SolutionField(self.grid, self.values - other.values)


def boundary_extrema(field: SolutionField, *, with_locations: bool = False, include_inflow: bool = True):
    """Max and min of ``field`` over the initial row and inflow column.

    With ``with_locations`` the node indices ``(i, n)`` of both extrema are
    returned as well.  ``include_inflow=False`` uses the initial row only
    (Cauchy problems have no inflow boundary).
    """
    v = field.values
    row = v[:, 0]
    col = v[0, :] if include_inflow else v[:1, 0]
    i_max, n_max = int(np.argmax(row)), int(np.argmax(col))
    i_min, n_min = int(np.argmin(row)), int(np.argmin(col))
    loc_max = (i_max, 0) if row[i_max] >= col[n_max] else (0, n_max)
    loc_min = (i_min, 0) if row[i_min] <= col[n_min] else (0, n_min)
    bmax, bmin = float(v[loc_max]), float(v[loc_min])
    if with_locations:
        return bmax, bmin, loc_max, loc_min
    return bmax, bmin


@dataclass
class VerificationReport:
    """Verdict of one principle check.

    ``direction`` says how ``measured`` is compared to ``threshold``:
    ``"le"`` (violation metrics, pass iff measured <= threshold) or ``"ge"``.
    """

    principle: str
    measured: float
    threshold: float
    direction: str = "le"
    details: dict = field(default_factory=dict)
    spec_fingerprint: str | None = None

    def __post_init__(self):
        if self.principle not in PRINCIPLES:
            raise ValueError(f"unknown principle {self.principle!r}")
        if self.direction not in ("le", "ge"):
            raise ValueError(f"direction must be 'le' or 'ge', got {self.direction!r}")
        self.measured = float(self.measured)
        self.threshold = float(self.threshold)

    @property
    def verdict(self) -> bool:
        if self.direction == "le":
            return self.measured <= self.threshold
        return self.measured >= self.threshold

    @property
    def passed(self) -> bool:
        return self.verdict

    def to_dict(self) -> dict:
        return {
            "principle": self.principle,
            "verdict": "pass" if self.verdict else "fail",
            "measured": self.measured,
            "threshold": self.threshold,
            "direction": self.direction,
            "locations": {k: v for k, v in self.details.items() if k.endswith("_at")},
            "details": {k: v for k, v in self.details.items() if not k.endswith("_at")},
            "spec_fingerprint": self.spec_fingerprint,
        }

    def __str__(self) -> str:
        op = "<=" if self.direction == "le" else ">="
        status = "PASS" if self.verdict else "FAIL"
        return f"[{status}] {self.principle}: measured {self.measured:.3e} {op} {self.threshold:.3e}"
