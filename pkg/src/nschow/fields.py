"""Vector fields on R^n given by scalar component expressions.

Components are written in a small expression language over ``x1..xn``::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := ("-" | "+") unary | power
    power := atom ["^" signed-integer]
    atom  := number | x<k> | func "(" expr ("," expr)* ")" | "(" expr ")"

with ``func`` one of abs, sign, sin, cos, exp, min, max.  Expressions are
compiled to plain Python functions; first derivatives are derived
symbolically so every parsed field carries an analytic Jacobian.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from .brackets import Smoothness

__all__ = [
    "ExpressionSyntaxError",
    "UnknownVariable",
    "DomainError",
    "UnknownSystem",
    "VectorField",
    "VectorFieldSystem",
    "parse_field_expression",
    "parse_expression",
    "load_field_file",
    "eval_field",
    "numeric_jacobian",
    "builtin_system",
    "BUILTIN_SYSTEMS",
]


class ExpressionSyntaxError(ValueError):
    pass


class UnknownVariable(ExpressionSyntaxError):
    pass


class DomainError(ArithmeticError):
    """Evaluation hit a division by zero or overflow."""


class UnknownSystem(KeyError):
    pass


# --- expression tree ------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]


Expr = Union[Const, Var, Neg, BinOp, Pow, Call]

_ARITY = {"abs": 1, "sign": 1, "sin": 1, "cos": 1, "exp": 1, "min": 2, "max": 2}
_NONSMOOTH = {"abs", "sign", "min", "max"}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<var>x(?P<vidx>\d+))"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected character {text[pos:pos + 1]!r} at {pos}")
        if m.group("num") is not None:
            out.append(("num", m.group("num")))
        elif m.group("var") is not None:
            out.append(("var", m.group("vidx")))
        elif m.group("name") is not None:
            out.append(("name", m.group("name")))
        else:
            op = m.group("op")
            out.append(("op", "^" if op == "**" else op))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text: str, dim: int):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.dim = dim

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise ExpressionSyntaxError("unexpected end of expression")
        self.pos += 1
        return tok

    def accept(self, op: str) -> bool:
        tok = self.peek()
        if tok is not None and tok == ("op", op):
            self.pos += 1
            return True
        return False

    def expect(self, op: str) -> None:
        if not self.accept(op):
            tok = self.peek()
            raise ExpressionSyntaxError(f"expected {op!r}, got {tok[1] if tok else 'end of input'!r}")

    def parse(self) -> Expr:
        if not self.tokens:
            raise ExpressionSyntaxError("empty expression")
        e = self.expr()
        if self.pos != len(self.tokens):
            raise ExpressionSyntaxError(f"unexpected token {self.tokens[self.pos][1]!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            if self.accept("+"):
                e = BinOp("+", e, self.term())
            elif self.accept("-"):
                e = BinOp("-", e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            if self.accept("*"):
                e = BinOp("*", e, self.unary())
            elif self.accept("/"):
                e = BinOp("/", e, self.unary())
            else:
                return e

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            sign = -1 if self.accept("-") else 1
            if sign == 1:
                self.accept("+")
            kind, text = self.take()
            if kind != "num" or not re.fullmatch(r"\d+", text):
                raise ExpressionSyntaxError("exponent must be an integer literal")
            if self.peek() == ("op", "^"):
                raise ExpressionSyntaxError("chained exponents are ambiguous; use parentheses")
            return Pow(base, sign * int(text))
        return base

    def atom(self) -> Expr:
        kind, text = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "var":
            k = int(text)
            if k < 1 or k > self.dim:
                raise UnknownVariable(f"x{k} is not a coordinate of R^{self.dim}")
            return Var(k)
        if kind == "name":
            if text not in _ARITY:
                raise ExpressionSyntaxError(f"unknown function {text!r}")
            self.expect("(")
            args = [self.expr()]
            while self.accept(","):
                args.append(self.expr())
            self.expect(")")
            if len(args) != _ARITY[text]:
                raise ExpressionSyntaxError(f"{text} takes {_ARITY[text]} argument(s), got {len(args)}")
            return Call(text, tuple(args))
        if text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ExpressionSyntaxError(f"unexpected token {text!r}")


def parse_expression(text: str, dim: int) -> Expr:
    return _Parser(text, dim).parse()


# --- printing, compiling, differentiating ------------------------------------------


def to_text(e: Expr) -> str:
    if isinstance(e, Const):
        v = e.value
        return repr(int(v)) if v == int(v) and abs(v) < 1e15 else repr(v)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Neg):
        return f"-({to_text(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Pow):
        return f"({to_text(e.base)})^{e.exponent}"
    return f"{e.name}({', '.join(to_text(a) for a in e.args)})"


def _sign(v: float) -> float:
    return 1.0 if v > 0 else (-1.0 if v < 0 else 0.0)


def _pow(b: float, k: int) -> float:
    return b**k


_ENV = {
    "abs": abs,
    "_sign": _sign,
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": math.exp,
    "min": min,
    "max": max,
    "_pow": _pow,
}


def _py(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"x[{e.index - 1}]"
    if isinstance(e, Neg):
        return f"(-{_py(e.arg)})"
    if isinstance(e, BinOp):
        return f"({_py(e.left)} {e.op} {_py(e.right)})"
    if isinstance(e, Pow):
        if e.exponent == 2:
            inner = _py(e.base)
            return f"({inner} * {inner})"
        return f"_pow({_py(e.base)}, {e.exponent})"
    name = {"sign": "_sign", "sin": "_sin", "cos": "_cos", "exp": "_exp"}.get(e.name, e.name)
    return f"{name}({', '.join(_py(a) for a in e.args)})"


def _compile(exprs: Sequence[Expr]) -> Callable[[Sequence[float]], tuple[float, ...]]:
    body = ", ".join(_py(e) for e in exprs)
    src = f"lambda x: ({body},)"
    return eval(src, dict(_ENV))  # noqa: S307 - source is generated from a parsed tree


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1.0


def _add(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return _neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return BinOp("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return Const(0.0)
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return Const(0.0)
    if _is_one(b):
        return a
    return BinOp("/", a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def derivative(e: Expr, k: int) -> Expr:
    """d e / d x_k.  Kinks take the convention sign(0) = 0."""
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.index == k else 0.0)
    if isinstance(e, Neg):
        return _neg(derivative(e.arg, k))
    if isinstance(e, BinOp):
        da, db = derivative(e.left, k), derivative(e.right, k)
        if e.op == "+":
            return _add(da, db)
        if e.op == "-":
            return _sub(da, db)
        if e.op == "*":
            return _add(_mul(da, e.right), _mul(e.left, db))
        # quotient rule
        return _div(_sub(_mul(da, e.right), _mul(e.left, db)), Pow(e.right, 2))
    if isinstance(e, Pow):
        db = derivative(e.base, k)
        if _is_zero(db) or e.exponent == 0:
            return Const(0.0)
        inner = e.base if e.exponent == 2 else Pow(e.base, e.exponent - 1)
        return _mul(_mul(Const(float(e.exponent)), inner), db)
    # calls
    a = e.args[0]
    da = derivative(a, k)
    if e.name in ("min", "max"):
        b = e.args[1]
        db = derivative(b, k)
        if _is_zero(da) and _is_zero(db):
            return Const(0.0)
        # min(a,b) = (a+b)/2 - |a-b|/2, max(a,b) = (a+b)/2 + |a-b|/2
        half_sum = _mul(Const(0.5), _add(da, db))
        half_jump = _mul(_mul(Const(0.5), Call("sign", (_sub(a, b),))), _sub(da, db))
        return _sub(half_sum, half_jump) if e.name == "min" else _add(half_sum, half_jump)
    if _is_zero(da):
        return Const(0.0)
    if e.name == "abs":
        return _mul(Call("sign", (a,)), da)
    if e.name == "sign":
        return Const(0.0)
    if e.name == "sin":
        return _mul(Call("cos", (a,)), da)
    if e.name == "cos":
        return _neg(_mul(Call("sin", (a,)), da))
    if e.name == "exp":
        return _mul(e, da)
    raise AssertionError(e.name)


def _uses_nonsmooth(e: Expr) -> bool:
    if isinstance(e, Call):
        return e.name in _NONSMOOTH or any(_uses_nonsmooth(a) for a in e.args)
    if isinstance(e, Neg):
        return _uses_nonsmooth(e.arg)
    if isinstance(e, BinOp):
        return _uses_nonsmooth(e.left) or _uses_nonsmooth(e.right)
    if isinstance(e, Pow):
        return _uses_nonsmooth(e.base)
    return False


def _uses_sign(e: Expr) -> bool:
    if isinstance(e, Call):
        return e.name == "sign" or any(_uses_sign(a) for a in e.args)
    if isinstance(e, Neg):
        return _uses_sign(e.arg)
    if isinstance(e, BinOp):
        return _uses_sign(e.left) or _uses_sign(e.right)
    if isinstance(e, Pow):
        return _uses_sign(e.base)
    return False


# --- vector fields ---------------------------------------------------------------------


@dataclass(frozen=True)
class VectorField:
    """A vector field on R^dim with compiled component and Jacobian functions."""

    dim: int
    components: tuple[Expr, ...]
    regularity: Smoothness
    analytic_jacobian: tuple[tuple[Expr, ...], ...] | None = None
    name: str = ""
    _fn: Callable = field(init=False, repr=False, compare=False)
    _jac: Callable | None = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.components) != self.dim:
            raise ValueError(f"expected {self.dim} components, got {len(self.components)}")
        object.__setattr__(self, "_fn", _compile(self.components))
        jac = None
        if self.analytic_jacobian is not None:
            flat = [e for row in self.analytic_jacobian for e in row]
            jac = _compile(flat)
        object.__setattr__(self, "_jac", jac)

    def __getstate__(self):
        return {
            "dim": self.dim,
            "components": self.components,
            "regularity": self.regularity,
            "analytic_jacobian": self.analytic_jacobian,
            "name": self.name,
        }

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)
        self.__post_init__()

    def fast(self, x: Sequence[float]) -> tuple[float, ...]:
        """Evaluate on a plain sequence; raises DomainError."""
        try:
            return self._fn(x)
        except (ZeroDivisionError, OverflowError) as exc:
            raise DomainError(f"{self.name or 'field'} undefined at {list(x)}: {exc}") from None

    def __call__(self, x) -> np.ndarray:
        return np.array(self.fast([float(v) for v in x]))

    @property
    def has_jacobian(self) -> bool:
        return self._jac is not None

    def jacobian(self, x) -> np.ndarray:
        """Analytic Jacobian; rows are components, columns are coordinates."""
        if self._jac is None:
            raise ValueError("field has no analytic Jacobian")
        try:
            flat = self._jac([float(v) for v in x])
        except (ZeroDivisionError, OverflowError) as exc:
            raise DomainError(f"Jacobian undefined at {list(x)}: {exc}") from None
        return np.array(flat).reshape(self.dim, self.dim)

    def jvp(self, x: Sequence[float], v: Sequence[float]) -> tuple[float, ...]:
        """Analytic Jacobian-vector product on plain sequences."""
        try:
            flat = self._jac(x)
        except (ZeroDivisionError, OverflowError) as exc:
            raise DomainError(f"Jacobian undefined at {list(x)}: {exc}") from None
        n = self.dim
        return tuple(sum(flat[i * n + k] * v[k] for k in range(n)) for i in range(n))

    def text(self) -> str:
        return "; ".join(to_text(e) for e in self.components)


@dataclass(frozen=True)
class VectorFieldSystem:
    dim: int
    fields: tuple[VectorField, ...]
    label: str = ""

    def __post_init__(self) -> None:
        for f in self.fields:
            if f.dim != self.dim:
                raise ValueError(f"field {f.name!r} has dim {f.dim}, system has dim {self.dim}")

    def __len__(self) -> int:
        return len(self.fields)

    def field(self, i: int) -> VectorField:
        """Field ``g_i`` with 1-based index."""
        if not 1 <= i <= len(self.fields):
            raise IndexError(f"field index {i} outside 1..{len(self.fields)}")
        return self.fields[i - 1]


def _infer_regularity(exprs: Sequence[Expr]) -> Smoothness:
    if any(_uses_sign(e) for e in exprs):
        return Smoothness(0, False)
    if any(_uses_nonsmooth(e) for e in exprs):
        return Smoothness(0, True)
    return Smoothness(None)


def _split_components(text: str) -> list[str]:
    parts = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        parts.extend(p for p in line.split(";"))
    parts = [p.strip() for p in parts]
    # allow a trailing separator
    while parts and parts[-1] == "":
        parts.pop()
    if any(p == "" for p in parts):
        raise ExpressionSyntaxError("empty component")
    return parts


def parse_field_expression(
    text: str,
    dim: int | None = None,
    *,
    regularity: Smoothness | str | None = None,
    name: str = "",
    with_jacobian: bool = True,
) -> VectorField:
    """Parse ``"c1; c2; ...; cn"`` (or one component per line) into a field.

    ``dim`` defaults to the number of components.  When ``regularity`` is not
    given it is inferred conservatively: Smooth without abs/sign/min/max,
    C0_1 with abs/min/max, C0 with sign.
    """
    parts = _split_components(text)
    if dim is None:
        dim = len(parts)
    if len(parts) != dim:
        raise ExpressionSyntaxError(f"expected {dim} components, got {len(parts)}")
    comps = tuple(parse_expression(p, dim) for p in parts)
    if isinstance(regularity, str):
        regularity = Smoothness.parse(regularity)
    if regularity is None:
        regularity = _infer_regularity(comps)
    jac = None
    if with_jacobian:
        jac = tuple(tuple(derivative(c, k) for k in range(1, dim + 1)) for c in comps)
    return VectorField(dim, comps, regularity, jac, name)


def load_field_file(path: str | Path, label: str | None = None) -> VectorFieldSystem:
    """Read a system from a text file.

    Fields are separated by blank lines or ``---``; within a field, components
    are given one per line or separated by semicolons.  A line
    ``# regularity: C1_1`` applies to the field it appears in.
    """
    text = Path(path).read_text()
    blocks: list[list[str]] = [[]]
    for line in text.splitlines():
        if line.strip() in ("", "---"):
            if blocks[-1]:
                blocks.append([])
            continue
        blocks[-1].append(line)
    blocks = [b for b in blocks if b]
    if not blocks:
        raise ExpressionSyntaxError(f"{path}: no fields")
    fields = []
    dim = None
    for i, block in enumerate(blocks, start=1):
        reg = None
        for line in block:
            m = re.match(r"\s*#\s*regularity\s*:\s*(\S+)", line)
            if m:
                reg = m.group(1)
        f = parse_field_expression("\n".join(block), regularity=reg, name=f"g{i}")
        if dim is None:
            dim = f.dim
        fields.append(f)
    return VectorFieldSystem(dim, tuple(fields), label or Path(path).stem)


def eval_field(f: VectorField, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (f.dim,):
        raise ValueError(f"point has shape {x.shape}, expected ({f.dim},)")
    return f(x)


def numeric_jacobian(f: Callable, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``x``."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    n = x.size
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.column_stack(cols)


# --- registry ----------------------------------------------------------------------------

BUILTIN_SYSTEMS = {
    "example-r4": (
        4,
        [
            ("f1", "0; 1; 0; 1", "Smooth"),
            ("f2", "1; 0; 2*x2^2 + x2*abs(x2); 0", "C1_1"),
            # phi(x2) = 1 + x2^2, nowhere vanishing
            ("f3", "0; 0; 0; 1 + x2^2", "Smooth"),
        ],
    ),
    "heisenberg": (2, [("g1", "1; 0", "Smooth"), ("g2", "0; x1", "Smooth")]),
    "translations-r2": (2, [("e1", "1; 0", "Smooth"), ("e2", "0; 1", "Smooth")]),
}


def builtin_system(name: str) -> VectorFieldSystem:
    if name not in BUILTIN_SYSTEMS:
        raise UnknownSystem(f"unknown system {name!r}; choose from {sorted(BUILTIN_SYSTEMS)}")
    dim, specs = BUILTIN_SYSTEMS[name]
    fields = tuple(parse_field_expression(text, dim, regularity=reg, name=fname) for fname, text, reg in specs)
    return VectorFieldSystem(dim, fields, name)
