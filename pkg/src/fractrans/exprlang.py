"""Small arithmetic expression language for coefficient and data functions.

Expressions are written over the variables ``x`` and ``t`` (or another closed
variable set chosen by the caller, e.g. ``u`` for semilinear terms) and may use
``+ - * / ^``, unary minus, parentheses and a fixed table of functions::

    >>> ast = parse(tokenize("exp(-x^2) * (1 + t)"))
    >>> evaluate(ast, 0.0, 1.0)
    2.0

Precedence from tightest to loosest is ``^`` (right associative), unary minus,
``* /``, ``+ -``.  Evaluation works on scalars and on numpy arrays alike;
division by zero, domain errors and non-finite results raise
:class:`EvalError` rather than producing NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np
from scipy import special

__all__ = [
    "ExprError",
    "LexError",
    "ParseError",
    "EvalError",
    "Token",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "FUNCTION_ARITY",
    "tokenize",
    "parse",
    "parse_expr",
    "evaluate",
    "to_source",
    "compile_expr",
    "evaluate_env",
    "CompiledExpr",
]


class ExprError(ValueError):
    """Base class for expression errors; carries a character offset."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        self.message = message
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{where}")


class LexError(ExprError):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, position: int | None = None, expected: Iterable[str] = ()):
        self.expected = tuple(sorted(set(expected)))
        if self.expected:
            message = f"{message} (expected one of: {', '.join(self.expected)})"
        super().__init__(message, position)


class EvalError(ExprError):
    pass


FUNCTION_ARITY = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "sqrt": 1,
    "abs": 1,
    "erfc": 1,
    "pow": 2,
    "min": 2,
    "max": 2,
}

DEFAULT_VARIABLES = ("x", "t")


@dataclass(frozen=True)
class Token:
    kind: str  # number | identifier | operator | paren | comma
    lexeme: str
    position: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            start = i
            while i < n and source[i].isdigit():
                i += 1
            if i < n and source[i] == ".":
                i += 1
                while i < n and source[i].isdigit():
                    i += 1
            if i < n and source[i] in "eE":
                j = i + 1
                if j < n and source[j] in "+-":
                    j += 1
                if j < n and source[j].isdigit():
                    i = j
                    while i < n and source[i].isdigit():
                        i += 1
                else:
                    raise LexError("malformed exponent in number literal", i)
            tokens.append(Token("number", source[start:i], start))
            continue
        if c.isalpha() or c == "_":
            start = i
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            tokens.append(Token("identifier", source[start:i], start))
            continue
        if c in "+-*/^":
            tokens.append(Token("operator", c, i))
        elif c in "()":
            tokens.append(Token("paren", c, i))
        elif c == ",":
            tokens.append(Token("comma", c, i))
        else:
            raise LexError(f"unexpected character {c!r}", i)
        i += 1
    return tokens


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, Neg, BinOp, Call]


# --- Pratt parser ------------------------------------------------------------

# (left binding power, right-associative?)
_INFIX = {
    "+": (10, False),
    "-": (10, False),
    "*": (20, False),
    "/": (20, False),
    "^": (30, True),
}
# unary minus sits between * / and ^, so -x^2 == -(x^2) and -x*y == (-x)*y
_PREFIX_BP = 25


class _Parser:
    def __init__(self, tokens: list[Token], variables: tuple[str, ...], end: int):
        self.tokens = tokens
        self.pos = 0
        self.variables = variables
        self.end = end

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.end, self._operand_start())
        self.pos += 1
        return tok

    def _operand_start(self) -> list[str]:
        return ["number", "identifier", "'('", "'-'"]

    def expect(self, kind: str, lexeme: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind or tok.lexeme != lexeme:
            at = tok.position if tok is not None else self.end
            found = repr(tok.lexeme) if tok is not None else "end of input"
            raise ParseError(f"unexpected {found}", at, [f"'{lexeme}'"])
        self.pos += 1
        return tok

    def expression(self, min_bp: int = 0) -> Expr:
        lhs = self.prefix()
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "operator":
                break
            lbp, right_assoc = _INFIX[tok.lexeme]
            if lbp < min_bp:
                break
            self.pos += 1
            rhs = self.expression(lbp if right_assoc else lbp + 1)
            lhs = BinOp(tok.lexeme, lhs, rhs)
        return lhs

    def prefix(self) -> Expr:
        tok = self.next()
        if tok.kind == "number":
            return Num(float(tok.lexeme))
        if tok.kind == "operator" and tok.lexeme == "-":
            return Neg(self.expression(_PREFIX_BP))
        if tok.kind == "operator" and tok.lexeme == "+":
            return self.expression(_PREFIX_BP)
        if tok.kind == "paren" and tok.lexeme == "(":
            inner = self.expression(0)
            self.expect("paren", ")")
            return inner
        if tok.kind == "identifier":
            name = tok.lexeme
            if name in FUNCTION_ARITY:
                return self.call(tok)
            if name in self.variables:
                return Var(name)
            raise ParseError(f"unknown identifier {name!r}", tok.position)
        raise ParseError(f"unexpected {tok.lexeme!r}", tok.position, self._operand_start())

    def call(self, name_tok: Token) -> Call:
        self.expect("paren", "(")
        args: list[Expr] = []
        tok = self.peek()
        if tok is not None and tok.kind == "paren" and tok.lexeme == ")":
            self.pos += 1
        else:
            args.append(self.expression(0))
            while True:
                tok = self.peek()
                if tok is not None and tok.kind == "comma":
                    self.pos += 1
                    args.append(self.expression(0))
                    continue
                if tok is None or (tok.kind, tok.lexeme) != ("paren", ")"):
                    at = tok.position if tok is not None else self.end
                    found = repr(tok.lexeme) if tok is not None else "end of input"
                    raise ParseError(f"unexpected {found}", at, ["','", "')'"])
                self.pos += 1
                break
        arity = FUNCTION_ARITY[name_tok.lexeme]
        if len(args) != arity:
            raise ParseError(
                f"function {name_tok.lexeme!r} takes {arity} argument(s), got {len(args)}",
                name_tok.position,
            )
        return Call(name_tok.lexeme, tuple(args))


def parse(tokens: list[Token], variables: Iterable[str] = DEFAULT_VARIABLES) -> Expr:
    """Parse a token stream into an AST.

    ``variables`` is the closed set of identifiers allowed besides the
    builtin function names.
    """
    end = tokens[-1].position + len(tokens[-1].lexeme) if tokens else 0
    parser = _Parser(list(tokens), tuple(variables), end)
    if not tokens:
        raise ParseError("empty expression", 0, parser._operand_start())
    ast = parser.expression(0)
    tok = parser.peek()
    if tok is not None:
        raise ParseError(f"trailing token {tok.lexeme!r}", tok.position, ["operator", "end of input"])
    return ast


def parse_expr(source: str, variables: Iterable[str] = DEFAULT_VARIABLES) -> Expr:
    return parse(tokenize(source), variables)


# --- evaluation --------------------------------------------------------------


def _check_domain(ok, what: str) -> None:
    if not np.all(ok):
        raise EvalError(what)


def _apply_call(name: str, args: list):
    if name == "sin":
        return np.sin(args[0])
    if name == "cos":
        return np.cos(args[0])
    if name == "exp":
        return np.exp(args[0])
    if name == "sqrt":
        _check_domain(args[0] >= 0, "sqrt of negative argument")
        return np.sqrt(args[0])
    if name == "abs":
        return np.abs(args[0])
    if name == "erfc":
        return special.erfc(args[0])
    if name == "pow":
        return _power(args[0], args[1])
    if name == "min":
        return np.minimum(args[0], args[1])
    if name == "max":
        return np.maximum(args[0], args[1])
    raise EvalError(f"unknown function {name!r}")


def _power(base, exponent):
    base, exponent = np.broadcast_arrays(np.asarray(base, float), np.asarray(exponent, float))
    bad = (base < 0) & (exponent != np.round(exponent))
    _check_domain(~bad, "negative base raised to a non-integer power")
    _check_domain(~((base == 0) & (exponent < 0)), "division by zero (zero to a negative power)")
    return np.power(base, exponent)


def _eval(node: Expr, env: dict):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise EvalError(f"variable {node.name!r} is not bound") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            _check_domain(np.asarray(b) != 0, "division by zero")
            return a / b
        return _power(a, b)
    if isinstance(node, Call):
        return _apply_call(node.name, [_eval(arg, env) for arg in node.args])
    raise TypeError(f"not an expression node: {node!r}")


def evaluate_env(ast: Expr, env: dict):
    """Evaluate with an explicit variable binding; arrays broadcast."""
    bound = {k: np.asarray(v, dtype=float) for k, v in env.items()}
    with np.errstate(all="ignore"):
        value = _eval(ast, bound)
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise EvalError("non-finite result (overflow or undefined operation)")
    shape = np.broadcast_shapes(*(v.shape for v in bound.values())) if bound else ()
    if shape == ():
        return float(value)
    return np.broadcast_to(value, shape).copy()


def evaluate(ast: Expr, x, t):
    """Value of ``ast`` at ``(x, t)``; scalars give a float, arrays broadcast."""
    return evaluate_env(ast, {"x": x, "t": t})


# --- printing ----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_NEG_PREC = 3
_POW_PREC = 4
_ATOM_PREC = 5


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _POW_PREC if node.op == "^" else _PREC[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def _wrap(node: Expr, parens: bool) -> str:
    text = to_source(node)
    return f"({text})" if parens else text


def to_source(ast: Expr) -> str:
    """Render an AST as text that parses back to an equal AST."""
    if isinstance(ast, Num):
        return repr(float(ast.value))
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Neg):
        return "-" + _wrap(ast.operand, _prec(ast.operand) < _NEG_PREC)
    if isinstance(ast, Call):
        return f"{ast.name}({', '.join(to_source(a) for a in ast.args)})"
    if isinstance(ast, BinOp):
        p = _prec(ast)
        if ast.op == "^":
            left = _wrap(ast.left, _prec(ast.left) <= p)
            right = _wrap(ast.right, _prec(ast.right) < p)
            return f"{left}^{right}"
        left = _wrap(ast.left, _prec(ast.left) < p)
        right = _wrap(ast.right, _prec(ast.right) <= p)
        return f"{left} {ast.op} {right}"
    raise TypeError(f"not an expression node: {ast!r}")


@dataclass(frozen=True)
class CompiledExpr:
    """A parsed expression bundled with its source text."""

    source: str
    ast: Expr
    variables: tuple[str, ...] = DEFAULT_VARIABLES

    def __call__(self, *args, **kwargs):
        env = dict(zip(self.variables, args))
        env.update(kwargs)
        return evaluate_env(self.ast, env)

    def is_constant(self) -> bool:
        return _is_constant(self.ast)


def _is_constant(node: Expr) -> bool:
    if isinstance(node, Num):
        return True
    if isinstance(node, Var):
        return False
    if isinstance(node, Neg):
        return _is_constant(node.operand)
    if isinstance(node, BinOp):
        return _is_constant(node.left) and _is_constant(node.right)
    return all(_is_constant(a) for a in node.args)


def compile_expr(source: str, variables: Iterable[str] = DEFAULT_VARIABLES) -> CompiledExpr:
    variables = tuple(variables)
    return CompiledExpr(source, parse_expr(source, variables), variables)

