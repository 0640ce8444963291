"""Expression tree for system files."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

__all__ = [
    "Expr", "Num", "Const", "Var", "BinOp", "Neg", "Pow", "Call",
    "FUNCTIONS", "CONSTANTS", "to_source", "differentiate", "free_names",
    "add", "sub", "mul", "div", "neg", "power", "call",
]

FUNCTIONS = ("sin", "cos", "exp")
CONSTANTS = ("pi",)


class Expr:
    __slots__ = ()

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True)
class Num(Expr):
    value: Fraction


@dataclass(frozen=True)
class Const(Expr):
    name: str


@dataclass(frozen=True)
class Var(Expr):
    """Identifier; ``kind`` is ``name`` until resolved to state/param/time."""

    name: str
    kind: str = "name"
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr


# -- smart constructors with exact constant folding ------------------------------

ZERO = Num(Fraction(0))
ONE = Num(Fraction(1))


def _is(e, v):
    return isinstance(e, Num) and e.value == v


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        return Num(a.value / b.value)
    return BinOp("/", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    return Neg(a)


def power(a: Expr, k: int) -> Expr:
    if isinstance(a, Num) and (a.value != 0 or k >= 0):
        return Num(a.value ** k)
    return Pow(a, k)


def call(fn: str, a: Expr) -> Expr:
    return Call(fn, a)


# -- pretty printer --------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_UNARY = 3
_POW = 4
_ATOM = 5


def _num_src(v: Fraction) -> tuple[str, int]:
    if v.denominator == 1:
        s = str(abs(v.numerator))
        prec = _ATOM
    else:
        s = f"{abs(v.numerator)}/{v.denominator}"
        prec = 2
    if v < 0:
        return "-" + s, _UNARY
    return s, prec


def _src(e: Expr) -> tuple[str, int]:
    if isinstance(e, Num):
        return _num_src(e.value)
    if isinstance(e, (Const, Var)):
        return e.name, _ATOM
    if isinstance(e, Call):
        return f"{e.fn}({_src(e.arg)[0]})", _ATOM
    if isinstance(e, Neg):
        s, p = _src(e.arg)
        # the operand of unary minus must bind at least as tightly as a power
        if p < _POW:
            s = f"({s})"
        return "-" + s, _UNARY
    if isinstance(e, Pow):
        s, p = _src(e.base)
        if p < _ATOM:
            s = f"({s})"
        k = e.exponent
        ks = str(k) if k >= 0 else f"({k})"
        return f"{s}^{ks}", _POW
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        ls, lp = _src(e.left)
        rs, rp = _src(e.right)
        if lp < prec:
            ls = f"({ls})"
        # left-associative operators: the right operand needs strictly higher precedence
        if rp <= prec:
            rs = f"({rs})"
        if e.op in "*/":
            return f"{ls}{e.op}{rs}", prec
        return f"{ls} {e.op} {rs}", prec
    raise TypeError(f"unknown node {e!r}")


def to_source(e: Expr) -> str:
    """Render an expression; re-parsing the text gives back an equal tree."""
    return _src(e)[0]


# -- symbolic derivative (used for transform Jacobians only) -------------------------

def differentiate(e: Expr, name: str) -> Expr:
    """Derivative of ``e`` with respect to the variable ``name``."""
    if isinstance(e, (Num, Const)):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == name else ZERO
    if isinstance(e, Neg):
        d = differentiate(e.arg, name)
        return ZERO if _is(d, 0) else neg(d)
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        da, db = differentiate(a, name), differentiate(b, name)
        if e.op in "+-":
            if _is(db, 0):
                return da
            if _is(da, 0):
                return db if e.op == "+" else neg(db)
            return add(da, db) if e.op == "+" else sub(da, db)
        if e.op == "*":
            return _sum(_prod(da, b), _prod(a, db))
        if e.op == "/":
            first = ZERO if _is(da, 0) else div(da, b)
            if _is(db, 0):
                return first
            second = div(_prod(a, db), power(b, 2))
            return sub(first, second) if not _is(first, 0) else neg(second)
    if isinstance(e, Pow):
        db = differentiate(e.base, name)
        if _is(db, 0) or e.exponent == 0:
            return ZERO
        k = e.exponent
        inner = ONE if k == 1 else power(e.base, k - 1)
        return _prod(_prod(Num(Fraction(k)), inner), db)
    if isinstance(e, Call):
        da = differentiate(e.arg, name)
        if _is(da, 0):
            return ZERO
        if e.fn == "sin":
            outer = call("cos", e.arg)
        elif e.fn == "cos":
            outer = neg(call("sin", e.arg))
        else:
            outer = call("exp", e.arg)
        return _prod(outer, da)
    raise TypeError(f"unknown node {e!r}")


def _prod(a, b):
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    return mul(a, b)


def _sum(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return add(a, b)


def free_names(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, BinOp):
        return free_names(e.left) | free_names(e.right)
    if isinstance(e, (Neg, Call)):
        return free_names(e.arg)
    if isinstance(e, Pow):
        return free_names(e.base)
    return set()
