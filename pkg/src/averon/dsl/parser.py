"""Recursive-descent parser for ``.avsys`` system files.

File layout::

    # comment
    [states]
    x y z w
    [period]
    2*pi
    [params]
    b = -1.1267
    [order 0]
    dx/dt = y
    ...
    [order 1]
    dx/dt[1] = 2*x^3/7 - x^2*z
    ...
    [manifold]
    rho in (3, 5)
    z in (-2, 2)
    w = 0
    [transform]
    angle = theta
    states = rho z w
    x = rho*sin(theta)
    y = rho*cos(theta)
    order = 3

Operator precedence, tightest first: ``^`` (right associative, integer
exponents), unary ``-``, ``*`` and ``/``, ``+`` and ``-``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from . import ast as A

__all__ = [
    "ParseError",
    "SystemManifest",
    "ManifoldBlock",
    "TransformBlock",
    "parse_expr",
    "parse_system",
]


class ParseError(ValueError):
    """Syntax or resolution error with a 1-based source location."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message, self.line, self.col = message, line, col
        loc = f"line {line}, column {col}: " if line else ""
        super().__init__(loc + message)


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()\[\],=])
""", re.VERBOSE)


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, line: int = 1, col0: int = 1) -> list[Tok]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append(Tok(kind, m.group(), line, col0 + pos))
        pos = m.end()
    out.append(Tok("end", "", line, col0 + len(text)))
    return out


class _ExprParser:
    def __init__(self, toks: list[Tok]):
        self.toks = toks
        self.i = 0

    @property
    def cur(self) -> Tok:
        return self.toks[self.i]

    def take(self) -> Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Tok:
        t = self.cur
        if t.text != text:
            found = repr(t.text) if t.kind != "end" else "end of line"
            raise ParseError(f"expected {text!r}, found {found}", t.line, t.col)
        return self.take()

    def error(self, msg: str):
        t = self.cur
        raise ParseError(msg, t.line, t.col)

    def expr(self) -> A.Expr:
        left = self.term()
        while self.cur.text in ("+", "-"):
            op = self.take().text
            right = self.term()
            left = A.add(left, right) if op == "+" else A.sub(left, right)
        return left

    def term(self) -> A.Expr:
        left = self.unary()
        while self.cur.text in ("*", "/"):
            op = self.take().text
            right = self.unary()
            left = A.mul(left, right) if op == "*" else A.div(left, right)
        return left

    def unary(self) -> A.Expr:
        if self.cur.text == "-":
            self.take()
            return A.neg(self.unary())
        if self.cur.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> A.Expr:
        base = self.primary()
        if self.cur.text == "^":
            t = self.take()
            k = self._int_exponent(t)
            return A.power(base, k)
        return base

    def _int_exponent(self, caret: Tok) -> int:
        start = self.cur
        if self.cur.text == "-":
            self.take()
            e = A.neg(self.power())
        else:
            e = self.power()
        if not isinstance(e, A.Num) or e.value.denominator != 1:
            raise ParseError("exponent must be an integer constant", start.line, start.col)
        return int(e.value)

    def primary(self) -> A.Expr:
        t = self.cur
        if t.kind == "num":
            self.take()
            return A.Num(Fraction(t.text))
        if t.kind == "id":
            self.take()
            if t.text in A.FUNCTIONS:
                if self.cur.text != "(":
                    raise ParseError(f"function {t.text!r} needs an argument in parentheses",
                                     self.cur.line, self.cur.col)
                self.take()
                arg = self.expr()
                if self.cur.text == ",":
                    raise ParseError(f"function {t.text!r} takes exactly one argument",
                                     self.cur.line, self.cur.col)
                self.expect(")")
                return A.call(t.text, arg)
            if t.text in A.CONSTANTS:
                return A.Const(t.text)
            return A.Var(t.text, "name", (t.line, t.col))
        if t.text == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        found = repr(t.text) if t.kind != "end" else "end of input"
        raise ParseError(f"unexpected token {found}", t.line, t.col)


def parse_expr(text: str, line: int = 1, col: int = 1) -> A.Expr:
    """Parse a single expression (identifiers stay unresolved)."""
    p = _ExprParser(tokenize(text, line, col))
    e = p.expr()
    if p.cur.kind != "end":
        p.error(f"unexpected token {p.cur.text!r}")
    return e


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass
class ManifoldBlock:
    coords: list[str]
    bounds: list[tuple[A.Expr, A.Expr]]
    beta: dict[str, A.Expr]


@dataclass
class TransformBlock:
    angle: str
    states: list[str]
    substitutions: dict[str, A.Expr]
    order: int


@dataclass
class SystemManifest:
    states: list[str]
    period: A.Expr | None
    params: dict[str, A.Expr]
    orders: dict[int, list[A.Expr]]
    manifold: ManifoldBlock | None = None
    transform: TransformBlock | None = None
    time: str = "t"
    source: str = field(default="", repr=False)

    @property
    def order(self) -> int:
        return max(self.orders) if self.orders else 0

    def to_text(self) -> str:
        """Serialise back to the file format (used for round-trip checks)."""
        lines = ["[states]", " ".join(self.states)]
        if self.period is not None:
            lines += ["", "[period]", A.to_source(self.period)]
        if self.params:
            lines += ["", "[params]"] + [f"{k} = {A.to_source(v)}" for k, v in self.params.items()]
        for i in sorted(self.orders):
            lines += ["", f"[order {i}]"]
            for j, (name, e) in enumerate(zip(self.states, self.orders[i])):
                lines.append(f"d{name}/dt[{j + 1}] = {A.to_source(e)}")
        if self.manifold is not None:
            mb = self.manifold
            lines += ["", "[manifold]"]
            for c, (lo, hi) in zip(mb.coords, mb.bounds):
                lines.append(f"{c} in ({A.to_source(lo)}, {A.to_source(hi)})")
            lines += [f"{k} = {A.to_source(v)}" for k, v in mb.beta.items()]
        if self.transform is not None:
            tb = self.transform
            lines += ["", "[transform]", f"angle = {tb.angle}", "states = " + " ".join(tb.states)]
            lines += [f"{k} = {A.to_source(v)}" for k, v in tb.substitutions.items()]
            lines.append(f"order = {tb.order}")
        return "\n".join(lines) + "\n"


_SECTIONS = ("states", "period", "params", "order", "manifold", "transform")
_HEADER = re.compile(r"^\[\s*([A-Za-z]+)(?:\s+(\d+))?\s*\]$")
_ASSIGN = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(.*)$")
_DERIV = re.compile(r"^d([A-Za-z_][A-Za-z_0-9]*)\s*/\s*d([A-Za-z_][A-Za-z_0-9]*)\s*(?:\[\s*(\d+)\s*\])?\s*=\s*(.*)$")
_RANGE = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)\s+in\s+[\(\[](.*),(.*)[\)\]]$")
_NAME = re.compile(r"^[A-Za-z_][A-Za-z_0-9]*$")


def _strip(raw: str) -> str:
    return raw.split("#", 1)[0].rstrip()


def _expr_at(raw: str, text: str, lineno: int) -> A.Expr:
    col = raw.find(text) + 1 if text else len(raw) + 1
    if not text.strip():
        raise ParseError("missing expression", lineno, col)
    return parse_expr(text, lineno, col)


def parse_system(text: str) -> SystemManifest:
    """Parse a system file into a :class:`SystemManifest` and resolve identifiers."""
    sections: dict[tuple[str, int | None], list[tuple[int, str]]] = {}
    header_line: dict[tuple[str, int | None], int] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        s = line.strip()
        if not s:
            continue
        if s.startswith("["):
            m = _HEADER.match(s)
            if not m or m.group(1) not in _SECTIONS:
                raise ParseError(f"unknown section header {s!r}", lineno, raw.find("[") + 1)
            name = m.group(1)
            idx = int(m.group(2)) if m.group(2) is not None else None
            if (name == "order") != (idx is not None):
                raise ParseError("only [order i] sections take an index", lineno, 1)
            key = (name, idx)
            if key in sections:
                raise ParseError(f"duplicate section [{s[1:-1].strip()}]", lineno, 1)
            sections[key] = []
            header_line[key] = lineno
            current = key
            continue
        if current is None:
            raise ParseError("content before the first section header", lineno, 1)
        sections[current].append((lineno, line))

    if ("states", None) not in sections:
        raise ParseError("missing [states] section")
    states: list[str] = []
    for lineno, line in sections[("states", None)]:
        for m in re.finditer(r"[^\s,]+", line):
            name = m.group()
            if not _NAME.match(name):
                raise ParseError(f"invalid state name {name!r}", lineno, m.start() + 1)
            if name in states:
                raise ParseError(f"duplicate state {name!r}", lineno, m.start() + 1)
            states.append(name)
    if not states:
        raise ParseError("no states declared", header_line[("states", None)], 1)

    period = None
    if ("period", None) in sections:
        body = sections[("period", None)]
        if len(body) != 1:
            raise ParseError("[period] takes exactly one expression", header_line[("period", None)], 1)
        lineno, line = body[0]
        period = _expr_at(line, line.strip(), lineno)

    params: dict[str, A.Expr] = {}
    for lineno, line in sections.get(("params", None), []):
        m = _ASSIGN.match(line.strip())
        if not m:
            raise ParseError("expected 'name = expression'", lineno, 1)
        name = m.group(1)
        if name in params:
            raise ParseError(f"duplicate parameter {name!r}", lineno, 1)
        params[name] = _expr_at(line, m.group(2), lineno)

    orders: dict[int, list[A.Expr]] = {}
    order_pos: dict[int, list[tuple[int, int]]] = {}
    for (name, idx), body in sections.items():
        if name != "order":
            continue
        exprs: dict[str, A.Expr] = {}
        for lineno, line in body:
            m = _DERIV.match(line.strip())
            if not m:
                raise ParseError("expected 'dNAME/dt = expression'", lineno, 1)
            var, tvar, eqi, rhs = m.groups()
            if var not in states:
                raise ParseError(f"unknown state {var!r} on the left-hand side", lineno, line.find(var) + 1)
            if tvar != "t":
                raise ParseError(f"derivatives are taken with respect to 't', not {tvar!r}", lineno, 1)
            if eqi is not None and int(eqi) != states.index(var) + 1:
                raise ParseError(f"equation index [{eqi}] does not match the position of {var!r} "
                                 f"({states.index(var) + 1})", lineno, 1)
            if var in exprs:
                raise ParseError(f"state {var!r} defined twice in [order {idx}]", lineno, 1)
            exprs[var] = _expr_at(line, rhs, lineno)
        missing = [s for s in states if s not in exprs]
        if missing:
            raise ParseError(f"[order {idx}] has {len(exprs)} equations for {len(states)} states "
                             f"(missing {', '.join(missing)})", header_line[(name, idx)], 1)
        orders[idx] = [exprs[s] for s in states]
    if not orders:
        raise ParseError("no [order i] sections")
    if 0 not in orders:
        raise ParseError("missing [order 0] section")
    for i in range(max(orders) + 1):
        orders.setdefault(i, [A.ZERO] * len(states))

    transform = None
    if ("transform", None) in sections:
        transform = _parse_transform(sections[("transform", None)], header_line[("transform", None)], states)

    manifold = None
    if ("manifold", None) in sections:
        new_states = transform.states if transform else states
        manifold = _parse_manifold(sections[("manifold", None)], header_line[("manifold", None)], new_states)

    man = SystemManifest(states, period, params, dict(sorted(orders.items())), manifold, transform,
                         source=text)
    _resolve_manifest(man)
    return man


def _parse_transform(body, hline, states) -> TransformBlock:
    angle = None
    new_states = None
    order = None
    subs: dict[str, A.Expr] = {}
    for lineno, line in body:
        m = _ASSIGN.match(line.strip())
        if not m:
            raise ParseError("expected 'key = value' in [transform]", lineno, 1)
        key, val = m.group(1), m.group(2).strip()
        if key == "angle":
            if not _NAME.match(val):
                raise ParseError("angle must be a single name", lineno, 1)
            angle = val
        elif key == "states":
            new_states = val.replace(",", " ").split()
        elif key == "order":
            if not val.isdigit():
                raise ParseError("order must be a non-negative integer", lineno, 1)
            order = int(val)
        elif key in states:
            subs[key] = _expr_at(line, m.group(2), lineno)
        else:
            raise ParseError(f"{key!r} is neither a transform option nor an original state", lineno, 1)
    if angle is None or new_states is None:
        raise ParseError("[transform] needs 'angle = ...' and 'states = ...'", hline, 1)
    if order is None:
        raise ParseError("[transform] needs 'order = k'", hline, 1)
    if len(new_states) != len(states) - 1:
        raise ParseError(f"transform must produce {len(states) - 1} states besides the angle", hline, 1)
    for s in states:
        if s not in subs and s not in new_states:
            raise ParseError(f"original state {s!r} is neither substituted nor kept", hline, 1)
    return TransformBlock(angle, new_states, subs, order)


def _parse_manifold(body, hline, states) -> ManifoldBlock:
    coords: list[str] = []
    bounds = []
    beta: dict[str, A.Expr] = {}
    for lineno, line in body:
        s = line.strip()
        m = _RANGE.match(s)
        if m:
            coords.append(m.group(1))
            bounds.append((_expr_at(line, m.group(2).strip(), lineno), _expr_at(line, m.group(3).strip(), lineno)))
            continue
        m = _ASSIGN.match(s)
        if m:
            beta[m.group(1)] = _expr_at(line, m.group(2), lineno)
            continue
        raise ParseError("expected 'name in (lo, hi)' or 'name = expression'", lineno, 1)
    mcount = len(coords)
    if coords != states[:mcount]:
        raise ParseError("manifold coordinates must be the leading states, in order "
                         f"(expected {' '.join(states[:mcount])})", hline, 1)
    if set(beta) != set(states[mcount:]):
        raise ParseError("give one 'name = expression' per transverse state: "
                         + " ".join(states[mcount:]), hline, 1)
    return ManifoldBlock(coords, bounds, {s: beta[s] for s in states[mcount:]})


# ---------------------------------------------------------------------------
# Identifier resolution
# ---------------------------------------------------------------------------

def resolve(e: A.Expr, kinds: dict[str, str]) -> A.Expr:
    """Tag every identifier with its kind; unknown names raise :class:`ParseError`."""
    if isinstance(e, A.Var):
        k = kinds.get(e.name)
        if k is None:
            raise ParseError(f"unknown identifier {e.name!r}", *e.pos)
        return A.Var(e.name, k, e.pos)
    if isinstance(e, A.BinOp):
        return A.BinOp(e.op, resolve(e.left, kinds), resolve(e.right, kinds))
    if isinstance(e, A.Neg):
        return A.Neg(resolve(e.arg, kinds))
    if isinstance(e, A.Pow):
        return A.Pow(resolve(e.base, kinds), e.exponent)
    if isinstance(e, A.Call):
        return A.Call(e.fn, resolve(e.arg, kinds))
    return e


def _resolve_manifest(man: SystemManifest) -> None:
    reserved = set(A.FUNCTIONS) | set(A.CONSTANTS)
    for nm in list(man.states) + list(man.params):
        if nm in reserved:
            raise ParseError(f"{nm!r} is a reserved name")
    clash = set(man.states) & set(man.params)
    if clash:
        raise ParseError(f"names used both as state and parameter: {', '.join(sorted(clash))}")
    pk: dict[str, str] = {}
    for name, e in list(man.params.items()):
        man.params[name] = resolve(e, pk)
        pk[name] = "param"
    if man.period is not None:
        man.period = resolve(man.period, pk)
    time_kind = {} if man.transform else {man.time: "time"}
    kinds = {**pk, **{s: "state" for s in man.states}, **time_kind}
    for i, exprs in man.orders.items():
        man.orders[i] = [resolve(e, kinds) for e in exprs]
    if man.transform is not None:
        tb = man.transform
        tk = {**pk, **{s: "state" for s in tb.states}, tb.angle: "time"}
        tb.substitutions = {k: resolve(v, tk) for k, v in tb.substitutions.items()}
    if man.manifold is not None:
        mb = man.manifold
        mk = {**pk, **{c: "state" for c in mb.coords}}
        mb.bounds = [(resolve(lo, pk), resolve(hi, pk)) for lo, hi in mb.bounds]
        mb.beta = {k: resolve(v, mk) for k, v in mb.beta.items()}
