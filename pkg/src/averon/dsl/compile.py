"""Compile parsed manifests into generic Python vector fields."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .. import jets
from ..jets import value_of
from ..manifold import ManifoldDef
from ..system import SystemDef
from . import ast as A
from .parser import ParseError, SystemManifest, parse_system

__all__ = [
    "TransformError",
    "LoadedSystem",
    "StandardForm",
    "evaluate",
    "param_values",
    "compile_exprs",
    "compile_manifest",
    "to_standard_form",
    "load_system",
    "gauss_solve",
]

_NS = {"_sin": jets.sin, "_cos": jets.cos, "_exp": jets.exp}


class TransformError(ValueError):
    pass


def evaluate(e: A.Expr, env: Mapping[str, float]) -> float:
    """Float evaluation (parameters, bounds, period)."""
    if isinstance(e, A.Num):
        return float(e.value)
    if isinstance(e, A.Const):
        return math.pi
    if isinstance(e, A.Var):
        if e.name not in env:
            raise ParseError(f"identifier {e.name!r} has no value here", *e.pos)
        return float(env[e.name])
    if isinstance(e, A.Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, A.Pow):
        return evaluate(e.base, env) ** e.exponent
    if isinstance(e, A.Call):
        return {"sin": math.sin, "cos": math.cos, "exp": math.exp}[e.fn](evaluate(e.arg, env))
    a, b = evaluate(e.left, env), evaluate(e.right, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if b == 0:
        raise ZeroDivisionError("division by zero in a constant expression")
    return a / b


def param_values(man: SystemManifest, overrides: Mapping[str, float] | None = None) -> dict[str, float]:
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(man.params)
    if unknown:
        raise ParseError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    vals: dict[str, float] = {}
    for name, e in man.params.items():
        vals[name] = float(overrides[name]) if name in overrides else evaluate(e, vals)
    return vals


def _py(e: A.Expr, env: Mapping[str, str]) -> str:
    if isinstance(e, A.Num):
        return repr(float(e.value))
    if isinstance(e, A.Const):
        return repr(math.pi)
    if isinstance(e, A.Var):
        return env[e.name]
    if isinstance(e, A.Neg):
        return f"(-{_py(e.arg, env)})"
    if isinstance(e, A.Pow):
        return f"({_py(e.base, env)})**{e.exponent}"
    if isinstance(e, A.Call):
        return f"_{e.fn}({_py(e.arg, env)})"
    return f"({_py(e.left, env)} {e.op} {_py(e.right, env)})"


def _is_zero(e):
    return isinstance(e, A.Num) and e.value == 0


def _horner(srcs: list[str | None]) -> str:
    acc = None
    for s in reversed(srcs):
        if acc is None:
            acc = s
        elif s is None:
            acc = f"eps * ({acc})"
        else:
            acc = f"{s} + eps * ({acc})"
    return acc if acc is not None else "0.0"


def compile_exprs(orders: Mapping[int, list[A.Expr]], states: list[str], params: Mapping[str, float],
                  time: str = "t", name: str = "field") -> Callable:
    """``field(t, x, eps) = sum_i eps**i orders[i](t, x)`` as generated Python."""
    env = {p: f"({v!r})" for p, v in params.items()}
    env.update({s: f"_x{j}" for j, s in enumerate(states)})
    env[time] = "t"
    k = max(orders)
    rows = []
    for a in range(len(states)):
        srcs = [None if _is_zero(orders[i][a]) else _py(orders[i][a], env) for i in range(k + 1)]
        rows.append(_horner(srcs))
    unpack = ", ".join(f"_x{j}" for j in range(len(states))) + ","
    code = f"def {name}(t, x, eps):\n    {unpack} = x\n    return [{', '.join(rows)}]\n"
    ns = dict(_NS)
    exec(compile(code, f"<{name}>", "exec"), ns)
    fn = ns[name]
    fn.source = code
    return fn


def _compile_map(exprs: list[A.Expr], args: list[str], params, name: str) -> Callable:
    env = {p: f"({v!r})" for p, v in params.items()}
    env.update({s: f"_a{j}" for j, s in enumerate(args)})
    body = ", ".join(_py(e, env) for e in exprs)
    code = f"def {name}({', '.join(f'_a{j}' for j in range(len(args)))}):\n    return [{body}]\n"
    ns = dict(_NS)
    exec(compile(code, f"<{name}>", "exec"), ns)
    return ns[name]


def gauss_solve(M: list[list], b: list) -> list:
    """Solve ``M x = b`` by elimination with pivoting on base values (generic scalars)."""
    n = len(b)
    M = [list(r) for r in M]
    b = list(b)
    for c in range(n):
        piv = max(range(c, n), key=lambda r: abs(value_of(M[r][c])))
        if abs(value_of(M[piv][c])) == 0:
            raise ZeroDivisionError("singular transform Jacobian")
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            b[c], b[piv] = b[piv], b[c]
        inv = 1.0 / M[c][c]
        for r in range(c + 1, n):
            if isinstance(M[r][c], (int, float)) and M[r][c] == 0:
                continue
            f = M[r][c] * inv
            for k in range(c + 1, n):
                M[r][k] = M[r][k] - f * M[c][k]
            b[r] = b[r] - f * b[c]
    x = [None] * n
    for r in range(n - 1, -1, -1):
        acc = b[r]
        for k in range(r + 1, n):
            acc = acc - M[r][k] * x[k]
        x[r] = acc / M[r][r]
    return x


@dataclass
class StandardForm:
    """Cylindrical change of variables with the angle as new independent variable."""

    angle: str
    states: list[str]
    original_states: list[str]
    phi: Callable  # (theta, *s) -> original coordinates
    jac: Callable  # (theta, *s) -> flattened Jacobian, row-major, columns (theta, s...)
    original_field: Callable

    def to_original(self, theta: float, s) -> np.ndarray:
        return np.array([float(v) for v in self.phi(theta, *s)])

    def to_new(self, x, guess_theta: float = 0.0, guess_s=None, tol: float = 1e-13,
               max_iter: int = 50) -> tuple[float, np.ndarray]:
        """Invert the substitution by Newton's method from a guess."""
        n0 = len(self.original_states)
        y = np.array([guess_theta] + list(guess_s if guess_s is not None else np.ones(n0 - 1)), float)
        x = np.asarray(x, float)
        for _ in range(max_iter):
            r = np.array(self.phi(*y), float) - x
            if np.max(np.abs(r)) <= tol:
                break
            J = np.array(self.jac(*y), float).reshape(n0, n0)
            y = y - np.linalg.solve(J, r)
        else:
            raise TransformError("inverse coordinate change did not converge")
        return float(y[0]), y[1:]

    def rates(self, theta, s, eps):
        n0 = len(self.original_states)
        X = self.phi(theta, *s)
        G = self.original_field(0.0, X, eps)
        Jf = self.jac(theta, *s)
        J = [Jf[i * n0:(i + 1) * n0] for i in range(n0)]
        return gauss_solve(J, G)


@dataclass
class LoadedSystem:
    manifest: SystemManifest
    system: SystemDef
    manifold: ManifoldDef | None
    params: dict[str, float]
    transform: StandardForm | None = None
    extra: dict = field(default_factory=dict)


def _manifold(man: SystemManifest, params, n: int) -> ManifoldDef | None:
    mb = man.manifold
    if mb is None:
        return None
    bounds = [(evaluate(lo, params), evaluate(hi, params)) for lo, hi in mb.bounds]
    m = len(mb.coords)
    beta = None
    if m < n:
        beta = _compile_map(list(mb.beta.values()), mb.coords, params, "beta")
        fn = beta
        beta = lambda alpha, _f=fn: _f(*alpha)  # noqa: E731
    return ManifoldDef(m, tuple(bounds), beta, n)


def _sample_points(mfd: ManifoldDef | None, n: int, rng, count: int):
    pts = []
    for _ in range(count):
        if mfd is not None:
            a = np.array([rng.uniform(lo, hi) for lo, hi in mfd.bounds])
            pts.append(mfd.z_of(a))
        else:
            pts.append(rng.uniform(0.5, 1.5, size=n))
    return pts


def to_standard_form(man: SystemManifest, params: Mapping[str, float] | None = None,
                     label: str = "") -> tuple[SystemDef, StandardForm]:
    """Rewrite an autonomous system in the angle as independent variable.

    ``ds/dtheta = s' / theta'`` is evaluated in whatever scalar type the
    caller passes, so the eps-graded blocks of the new system are obtained by
    series arithmetic rather than symbolic expansion.
    """
    tb = man.transform
    if tb is None:
        raise TransformError("manifest has no [transform] block")
    pv = param_values(man, params)
    if man.period is not None and abs(evaluate(man.period, pv) - 2 * math.pi) > 1e-12:
        raise TransformError("a transformed system has period 2*pi in the angle")
    orig = compile_exprs(man.orders, man.states, pv, time="t", name="original_field")
    args = [tb.angle] + list(tb.states)
    subs = []
    for s in man.states:
        subs.append(tb.substitutions[s] if s in tb.substitutions else A.Var(s, "state"))
    phi = _compile_map(subs, args, pv, "phi")
    jac_exprs = [A.differentiate(e, v) for e in subs for v in args]
    jac = _compile_map(jac_exprs, args, pv, "jac")
    sf = StandardForm(tb.angle, list(tb.states), list(man.states), phi, jac, orig)

    def field_new(theta, s, eps):
        v = sf.rates(theta, s, eps)
        inv = 1.0 / v[0]
        return [w * inv for w in v[1:]]

    n = len(tb.states)
    mfd = _manifold(man, pv, n)
    rng = np.random.default_rng(12345)
    for z in _sample_points(mfd, n, rng, 5):
        theta = rng.uniform(0, 2 * math.pi)
        try:
            rate = sf.rates(theta, list(z), 0.0)[0]
        except ZeroDivisionError as exc:
            raise TransformError(f"transform Jacobian is singular at a sample point: {exc}") from exc
        if abs(value_of(rate)) < 1e-12:
            raise TransformError("the eps = 0 part of the angular rate vanishes at a sample point; "
                                 "the angle cannot serve as time")
    sysdef = SystemDef(field_new, n, 2 * math.pi, tb.order, tuple(tb.states), label)
    return sysdef, sf


def compile_manifest(man: SystemManifest, params: Mapping[str, float] | None = None,
                     label: str = "") -> LoadedSystem:
    pv = param_values(man, params)
    if man.transform is not None:
        sysdef, sf = to_standard_form(man, pv, label)
        mfd = _manifold(man, pv, sysdef.dim)
        return LoadedSystem(man, sysdef, mfd, pv, sf)
    if man.period is None:
        raise ParseError("missing [period] section")
    T = evaluate(man.period, pv)
    fld = compile_exprs(man.orders, man.states, pv, time=man.time)
    sysdef = SystemDef(fld, len(man.states), T, man.order, tuple(man.states), label)
    mfd = _manifold(man, pv, sysdef.dim)
    return LoadedSystem(man, sysdef, mfd, pv, None)


def load_system(source: str | Path, params: Mapping[str, float] | None = None,
                check_periodicity: bool = True) -> LoadedSystem:
    """Parse and compile a system file (path or text)."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and source.endswith(".avsys")):
        path = Path(source)
        text = path.read_text(encoding="utf-8")
        label = path.name
    else:
        text, label = str(source), ""
    man = parse_system(text)
    loaded = compile_manifest(man, params, label)
    if check_periodicity:
        box = list(loaded.manifold.bounds) if loaded.manifold is not None else None
        if box is not None and loaded.manifold.m < loaded.system.dim:
            z = loaded.manifold.z_of([0.5 * (lo + hi) for lo, hi in box])
            box = box + [(v - 0.5, v + 0.5) for v in z[loaded.manifold.m:]]
        loaded.system.check_periodicity(samples=3, box=box)
    return loaded
