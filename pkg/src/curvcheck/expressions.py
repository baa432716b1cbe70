"""Expression trees for chart fields, and the fields built from them.

Expression trees over ``{+, -, *, /, pow, exp, log, sin, cos, sqrt}`` and the
coordinate symbols ``x1..x4`` are the single source of truth for every catalog
metric and potential.  They evaluate pointwise on arrays of points and, via
:mod:`curvcheck.taylor`, in truncated Taylor arithmetic for derivative jets.

The plain-text infix grammar used by CLI scenario files:

    expr    := term (('+'|'-') term)*
    term    := unary (('*'|'/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := number | 'x1'..'x4' | name '(' expr ')' | '(' expr ')'
    name    := 'exp' | 'log' | 'sin' | 'cos' | 'sqrt'
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EvaluationError, InvalidArgumentError, ParseError

__all__ = [
    "Expr", "Const", "Coord", "Add", "Sub", "Mul", "Div", "Pow", "Neg", "Call",
    "parse_expr", "format_expr", "Box", "ScalarField", "MetricField",
    "x1", "x2", "x3", "x4", "COORDS",
]

NCOORDS = 4
FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")


class Expr:
    """Base expression node.  Nodes are immutable; sugar builds trees."""

    __slots__ = ()

    def __add__(self, other):
        return Add(self, _wrap(other))

    def __radd__(self, other):
        return Add(_wrap(other), self)

    def __sub__(self, other):
        return Sub(self, _wrap(other))

    def __rsub__(self, other):
        return Sub(_wrap(other), self)

    def __mul__(self, other):
        return Mul(self, _wrap(other))

    def __rmul__(self, other):
        return Mul(_wrap(other), self)

    def __truediv__(self, other):
        return Div(self, _wrap(other))

    def __rtruediv__(self, other):
        return Div(_wrap(other), self)

    def __pow__(self, other):
        return Pow(self, _wrap(other))

    def __neg__(self):
        return Neg(self)

    def __call__(self, points):
        return evaluate(self, points)


def _wrap(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, np.floating, np.integer)):
        return Const(float(v))
    raise InvalidArgumentError(f"cannot use {type(v).__name__} in an expression")


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Coord(Expr):
    axis: int  # 0-based

    def __post_init__(self):
        if not 0 <= self.axis < NCOORDS:
            raise InvalidArgumentError(f"coordinate axis {self.axis} outside 0..{NCOORDS-1}")


@dataclass(frozen=True)
class Add(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Sub(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Mul(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Div(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    expo: Expr


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr

    def __post_init__(self):
        if self.fn not in FUNCTIONS:
            raise InvalidArgumentError(f"unknown function {self.fn!r}")


COORDS = tuple(Coord(k) for k in range(NCOORDS))
x1, x2, x3, x4 = COORDS


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(expr: Expr, points) -> np.ndarray:
    """Evaluate on points of shape (..., 4); returns an array of shape (...)."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != NCOORDS:
        raise InvalidArgumentError(f"points must have last axis {NCOORDS}, got {pts.shape}")
    with np.errstate(all="ignore"):
        out = _eval(expr, pts)
    out = np.asarray(out, dtype=float)
    if not np.all(np.isfinite(out)):
        raise EvaluationError("expression evaluated to a non-finite value")
    return out + np.zeros(pts.shape[:-1])  # broadcast constants to point shape


def _eval(e: Expr, pts: np.ndarray):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Coord):
        return pts[..., e.axis]
    if isinstance(e, Add):
        return _eval(e.a, pts) + _eval(e.b, pts)
    if isinstance(e, Sub):
        return _eval(e.a, pts) - _eval(e.b, pts)
    if isinstance(e, Mul):
        return _eval(e.a, pts) * _eval(e.b, pts)
    if isinstance(e, Div):
        return _eval(e.a, pts) / _eval(e.b, pts)
    if isinstance(e, Neg):
        return -_eval(e.a, pts)
    if isinstance(e, Pow):
        return _eval(e.base, pts) ** _eval(e.expo, pts)
    if isinstance(e, Call):
        return getattr(np, e.fn)(_eval(e.arg, pts))
    raise InvalidArgumentError(f"unknown node type {type(e).__name__}")


def substitute(expr: Expr, mapping: dict[int, Expr]) -> Expr:
    """Replace coordinate axes by expressions (used for chart changes)."""
    if isinstance(expr, Const):
        return expr
    if isinstance(expr, Coord):
        return mapping.get(expr.axis, expr)
    if isinstance(expr, (Add, Sub, Mul, Div)):
        return type(expr)(substitute(expr.a, mapping), substitute(expr.b, mapping))
    if isinstance(expr, Neg):
        return Neg(substitute(expr.a, mapping))
    if isinstance(expr, Pow):
        return Pow(substitute(expr.base, mapping), substitute(expr.expo, mapping))
    if isinstance(expr, Call):
        return Call(expr.fn, substitute(expr.arg, mapping))
    raise InvalidArgumentError(f"unknown node type {type(expr).__name__}")


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN_CHARS = set("+-*/^()")


def _tokenize(text: str):
    tokens = []  # (kind, value, line, col)
    line, col = 1, 1
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if c in _TOKEN_CHARS:
            tokens.append((c, c, line, col))
            i += 1
            col += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            seen_e = False
            while j < len(text):
                ch = text[j]
                if ch.isdigit() or ch == ".":
                    j += 1
                elif ch in "eE" and not seen_e:
                    seen_e = True
                    j += 1
                    if j < len(text) and text[j] in "+-":
                        j += 1
                else:
                    break
            lit = text[i:j]
            try:
                value = float(lit)
            except ValueError:
                raise ParseError(f"bad number literal {lit!r}", line, col) from None
            tokens.append(("num", value, line, col))
            col += j - i
            i = j
            continue
        if c.isalpha():
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            name = text[i:j]
            tokens.append(("name", name, line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(("end", None, line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind=None):
        tok = self.tokens[self.pos]
        if kind is not None and tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", tok[2], tok[3])
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected trailing input {tok[1]!r}", tok[2], tok[3])
        return e

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, value, line, col = self.peek()
        if kind == "num":
            self.take()
            return Const(value)
        if kind == "(":
            self.take()
            inner = self.expr()
            self.take(")")
            return inner
        if kind == "name":
            self.take()
            if value in FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Call(value, arg)
            if len(value) == 2 and value[0] == "x" and value[1].isdigit():
                axis = int(value[1])
                if 1 <= axis <= NCOORDS:
                    return Coord(axis - 1)
            raise ParseError(f"unknown identifier {value!r}", line, col)
        raise ParseError(f"unexpected token {value!r}", line, col)


def parse_expr(text: str) -> Expr:
    """Parse infix expression text; raises ParseError with line/column."""
    return _Parser(text).parse()


def format_expr(e: Expr) -> str:
    """Render a tree back to parseable infix text (fully parenthesized)."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Coord):
        return f"x{e.axis + 1}"
    if isinstance(e, Add):
        return f"({format_expr(e.a)} + {format_expr(e.b)})"
    if isinstance(e, Sub):
        return f"({format_expr(e.a)} - {format_expr(e.b)})"
    if isinstance(e, Mul):
        return f"({format_expr(e.a)} * {format_expr(e.b)})"
    if isinstance(e, Div):
        return f"({format_expr(e.a)} / {format_expr(e.b)})"
    if isinstance(e, Neg):
        return f"(-{format_expr(e.a)})"
    if isinstance(e, Pow):
        return f"({format_expr(e.base)} ^ {format_expr(e.expo)})"
    if isinstance(e, Call):
        return f"{e.fn}({format_expr(e.arg)})"
    raise InvalidArgumentError(f"unknown node type {type(e).__name__}")


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Open axis-aligned box in R^4: per-axis (lo, hi) bounds."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(bounds) != NCOORDS:
            raise InvalidArgumentError(f"box needs {NCOORDS} axis bounds")
        for lo, hi in bounds:
            if not lo < hi:
                raise InvalidArgumentError(f"empty axis interval ({lo}, {hi})")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def cube(cls, half_width: float, center: float = 0.0) -> "Box":
        return cls(tuple((center - half_width, center + half_width) for _ in range(NCOORDS)))

    def contains(self, points, margin: float = 0.0) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        ok = np.ones(pts.shape[:-1], dtype=bool)
        for k, (lo, hi) in enumerate(self.bounds):
            ok &= (pts[..., k] > lo + margin) & (pts[..., k] < hi - margin)
        return ok

    def require(self, points, margin: float = 0.0):
        if not np.all(self.contains(points, margin)):
            raise DomainError(
                f"point outside domain {self.bounds}"
                + (f" (margin {margin})" if margin else "")
            )

    def shrink(self, factor: float) -> "Box":
        """Box with the same centers and axis widths scaled by ``factor``."""
        out = []
        for lo, hi in self.bounds:
            c, h = 0.5 * (lo + hi), 0.5 * (hi - lo) * factor
            out.append((c - h, c + h))
        return Box(tuple(out))


@dataclass(frozen=True)
class ScalarField:
    """A scalar chart field: expression tree plus an open box domain."""

    expr: Expr
    domain: Box

    def __call__(self, points) -> np.ndarray:
        return evaluate(self.expr, points)


@dataclass(frozen=True)
class MetricField:
    """A symmetric metric field on a chart domain.

    ``components`` is a 4x4 nested tuple of expression trees; symmetry holds
    by construction: entries (i, j) and (j, i) share the same tree object.
    """

    components: tuple[tuple[Expr, ...], ...]
    domain: Box

    def __post_init__(self):
        comps = self.components
        if len(comps) != NCOORDS or any(len(row) != NCOORDS for row in comps):
            raise InvalidArgumentError("metric components must be a 4x4 table")
        for i in range(NCOORDS):
            for j in range(i + 1, NCOORDS):
                if comps[i][j] is not comps[j][i]:
                    raise InvalidArgumentError(
                        f"components ({i},{j}) and ({j},{i}) must share one expression"
                    )

    @property
    def dim(self) -> int:
        return NCOORDS

    @classmethod
    def from_upper(cls, upper: dict[tuple[int, int], Expr], domain: Box) -> "MetricField":
        """Build from entries with i <= j; missing entries are zero."""
        zero = Const(0.0)
        table: list[list[Expr]] = [[zero] * NCOORDS for _ in range(NCOORDS)]
        for (i, j), e in upper.items():
            if not (0 <= i <= j < NCOORDS):
                raise InvalidArgumentError(f"bad component key ({i}, {j})")
            table[i][j] = e
            table[j][i] = e
        return cls(tuple(tuple(row) for row in table), domain)

    @classmethod
    def conformal(cls, phi: Expr, domain: Box) -> "MetricField":
        """Conformally flat metric exp(2 phi) * delta."""
        factor = Call("exp", Mul(Const(2.0), phi))
        return cls.from_upper({(i, i): factor for i in range(NCOORDS)}, domain)

    @classmethod
    def euclidean(cls, domain: Box) -> "MetricField":
        one = Const(1.0)
        return cls.from_upper({(i, i): one for i in range(NCOORDS)}, domain)

    def values(self, points) -> np.ndarray:
        """Metric matrices at points: shape (..., 4, 4)."""
        pts = np.asarray(points, dtype=float)
        out = np.empty(pts.shape[:-1] + (NCOORDS, NCOORDS))
        for i in range(NCOORDS):
            for j in range(i, NCOORDS):
                v = evaluate(self.components[i][j], pts)
                out[..., i, j] = v
                out[..., j, i] = v
        return out

    def check_positive_definite(self, points) -> None:
        """Raise DegenerateMetricError when any sampled matrix is not SPD."""
        from .errors import DegenerateMetricError

        vals = self.values(points)
        eigs = np.linalg.eigvalsh(vals)
        if np.any(eigs <= 0.0):
            bad = np.argwhere(eigs.min(axis=-1) <= 0.0)
            raise DegenerateMetricError(
                f"metric not positive definite at {len(bad)} sampled point(s)"
            )


def linear_chart_change(metric: MetricField, matrix, new_domain: Box) -> MetricField:
    """Pull the metric back through the linear chart map x = A y.

    Components transform as g'(y) = A^T g(Ay) A.  The caller is responsible
    for choosing ``new_domain`` so that its image under A lies inside the
    original domain.
    """
    a = np.asarray(matrix, dtype=float)
    if a.shape != (NCOORDS, NCOORDS):
        raise InvalidArgumentError("chart-change matrix must be 4x4")
    mapping = {
        k: sum((Const(a[k, j]) * COORDS[j] for j in range(NCOORDS)), Const(0.0))
        for k in range(NCOORDS)
    }
    upper: dict[tuple[int, int], Expr] = {}
    for i in range(NCOORDS):
        for j in range(i, NCOORDS):
            acc: Expr = Const(0.0)
            for k in range(NCOORDS):
                for l in range(NCOORDS):
                    if a[k, i] == 0.0 or a[l, j] == 0.0:
                        continue
                    comp = substitute(metric.components[k][l], mapping)
                    acc = acc + Const(a[k, i] * a[l, j]) * comp
            upper[(i, j)] = acc
    return MetricField.from_upper(upper, new_domain)
