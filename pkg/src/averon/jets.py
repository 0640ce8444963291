"""Multivariate truncated Taylor arithmetic (forward-mode jets).

A :class:`JetScalar` holds the Taylor coefficients of a smooth function of
``d`` variables about a base point, truncated at total degree ``p``.  Monomials
are stored in graded lexicographic order, so the constant term is always
``coeffs[0]`` and the linear terms are ``coeffs[1:d+1]``.

The same vector-field code runs on floats, :class:`JetScalar` and
:class:`~averon.series.EpsSeries`; the module-level :func:`sin`, :func:`cos`
and :func:`exp` dispatch on the argument type.
"""

from __future__ import annotations

import cmath
import itertools
import math
import numbers
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = [
    "JetScalar",
    "JetError",
    "jet_lift",
    "extract",
    "derivative_tensor",
    "partitions",
    "partitions_strict",
    "faa_di_bruno_sum",
    "sin",
    "cos",
    "exp",
    "value_of",
]


class JetError(ArithmeticError):
    pass


class _Table:
    """Monomial bookkeeping for ``d`` variables at total degree ``p``."""

    def __init__(self, d: int, p: int):
        self.d, self.p = d, p
        exps: list[tuple[int, ...]] = []
        for deg in range(p + 1):
            block = []
            for combo in itertools.combinations_with_replacement(range(d), deg):
                e = [0] * d
                for v in combo:
                    e[v] += 1
                block.append(tuple(e))
            block.sort(reverse=True)
            exps.extend(block)
        self.exponents = exps
        self.index = {e: i for i, e in enumerate(exps)}
        self.size = len(exps)
        self.degree = np.array([sum(e) for e in exps])
        self.factorial = np.array([math.prod(math.factorial(k) for k in e) for e in exps], dtype=float)
        ii, jj, kk = [], [], []
        for i, a in enumerate(exps):
            da = sum(a)
            for j, b in enumerate(exps):
                if da + sum(b) > p:
                    continue
                ii.append(i)
                jj.append(j)
                kk.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self.mi = np.array(ii, dtype=np.intp)
        self.mj = np.array(jj, dtype=np.intp)
        self.mk = np.array(kk, dtype=np.intp)


@lru_cache(maxsize=None)
def _table(d: int, p: int) -> _Table:
    return _Table(d, p)


class JetScalar:
    """Truncated multivariate Taylor polynomial.

    Parameters
    ----------
    coeffs : array_like
        Coefficients in the table's monomial order.
    d, p : int
        Number of variables and truncation degree.
    """

    __slots__ = ("coeffs", "table")
    __array_priority__ = 20

    def __init__(self, coeffs, d: int, p: int):
        self.table = _table(d, p)
        c = np.asarray(coeffs)
        if c.dtype.kind not in "fc":
            c = c.astype(float)
        if c.shape != (self.table.size,):
            raise JetError(f"expected {self.table.size} coefficients, got {c.shape}")
        self.coeffs = c

    @classmethod
    def _raw(cls, coeffs, table: _Table) -> "JetScalar":
        obj = object.__new__(cls)
        obj.coeffs = coeffs
        obj.table = table
        return obj

    @classmethod
    def constant(cls, value, d: int, p: int) -> "JetScalar":
        t = _table(d, p)
        c = np.zeros(t.size, dtype=np.result_type(float, np.asarray(value)))
        c[0] = value
        return cls._raw(c, t)

    @classmethod
    def variable(cls, value, i: int, d: int, p: int) -> "JetScalar":
        """``value + h_i`` where ``h_i`` is the i-th differentiation direction."""
        jt = cls.constant(value, d, p)
        if p >= 1:
            jt.coeffs[1 + i] = 1.0
        return jt

    @property
    def d(self) -> int:
        return self.table.d

    @property
    def p(self) -> int:
        return self.table.p

    @property
    def value(self):
        return self.coeffs[0]

    def __repr__(self):
        return f"JetScalar(d={self.d}, p={self.p}, value={self.coeffs[0]!r})"

    def coeff(self, multiindex: Sequence[int]):
        """Taylor coefficient of the monomial ``h^multiindex`` (zero above p)."""
        key = tuple(multiindex)
        if len(key) != self.d:
            raise JetError("multi-index length does not match the number of variables")
        if sum(key) > self.p:
            raise JetError(f"multi-index of degree {sum(key)} exceeds jet order {self.p}")
        return self.coeffs[self.table.index[key]]

    def _other(self, other):
        if isinstance(other, JetScalar):
            if other.table is not self.table:
                raise JetError("jets over different variable sets cannot be combined")
            return other.coeffs
        return None

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        oc = self._other(other)
        if oc is not None:
            return JetScalar._raw(self.coeffs + oc, self.table)
        if isinstance(other, numbers.Number):
            c = self.coeffs.copy() if not isinstance(other, complex) else self.coeffs.astype(complex)
            c[0] += other
            return JetScalar._raw(c, self.table)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        oc = self._other(other)
        if oc is not None:
            return JetScalar._raw(self.coeffs - oc, self.table)
        if isinstance(other, numbers.Number):
            c = self.coeffs.copy() if not isinstance(other, complex) else self.coeffs.astype(complex)
            c[0] -= other
            return JetScalar._raw(c, self.table)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, numbers.Number):
            c = -self.coeffs
            c[0] += other
            return JetScalar._raw(c, self.table)
        return NotImplemented

    def __neg__(self):
        return JetScalar._raw(-self.coeffs, self.table)

    def __pos__(self):
        return self

    def _mul_coeffs(self, a, b):
        t = self.table
        w = a[t.mi] * b[t.mj]
        if w.dtype.kind == "c":
            return (np.bincount(t.mk, weights=w.real, minlength=t.size)
                    + 1j * np.bincount(t.mk, weights=w.imag, minlength=t.size))
        return np.bincount(t.mk, weights=w, minlength=t.size)

    def __mul__(self, other):
        oc = self._other(other)
        if oc is not None:
            return JetScalar._raw(self._mul_coeffs(self.coeffs, oc), self.table)
        if isinstance(other, numbers.Number):
            return JetScalar._raw(self.coeffs * other, self.table)
        return NotImplemented

    __rmul__ = __mul__

    def _nil(self):
        u = self.coeffs.copy()
        u[0] = 0
        return u

    def _nil_powers(self):
        """Coefficient arrays of u**0..u**p for the nilpotent part u."""
        u = self._nil()
        one = np.zeros_like(u)
        one[0] = 1
        pw = [one, u]
        for _ in range(2, self.p + 1):
            pw.append(self._mul_coeffs(pw[-1], u))
        return pw[: self.p + 1]

    def reciprocal(self) -> "JetScalar":
        a0 = self.coeffs[0]
        if a0 == 0:
            raise JetError("division by a jet with zero value")
        u = self._nil() / a0
        out = np.zeros_like(u)
        out[0] = 1
        term = out.copy()
        for _ in range(self.p):
            term = -self._mul_coeffs(term, u)
            out = out + term
        return JetScalar._raw(out / a0, self.table)

    def __truediv__(self, other):
        if isinstance(other, JetScalar):
            return self * other.reciprocal()
        if isinstance(other, numbers.Number):
            return JetScalar._raw(self.coeffs / other, self.table)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, numbers.Number):
            return self.reciprocal() * other
        return NotImplemented

    def __pow__(self, n):
        if not isinstance(n, numbers.Integral):
            raise JetError("only integer powers of jets are supported")
        if n < 0:
            return self.reciprocal() ** (-n)
        if n == 0:
            return JetScalar.constant(1.0, self.d, self.p)
        out = None
        base = self.coeffs
        while n:
            if n & 1:
                out = base if out is None else self._mul_coeffs(out, base)
            n >>= 1
            if n:
                base = self._mul_coeffs(base, base)
        return JetScalar._raw(out, self.table)

    # -- elementary functions ---------------------------------------------------
    def exp(self) -> "JetScalar":
        pw = self._nil_powers()
        s = sum(c / math.factorial(k) for k, c in enumerate(pw))
        return JetScalar._raw(s * np.exp(self.coeffs[0]), self.table)

    def _sc(self):
        pw = self._nil_powers()
        cu = sum(c * ((-1) ** (k // 2) / math.factorial(k)) for k, c in enumerate(pw) if k % 2 == 0)
        su = sum(c * ((-1) ** (k // 2) / math.factorial(k)) for k, c in enumerate(pw) if k % 2 == 1)
        if isinstance(su, int):
            su = np.zeros_like(cu)
        return cu, su

    def sin(self) -> "JetScalar":
        cu, su = self._sc()
        a0 = self.coeffs[0]
        return JetScalar._raw(cu * np.sin(a0) + su * np.cos(a0), self.table)

    def cos(self) -> "JetScalar":
        cu, su = self._sc()
        a0 = self.coeffs[0]
        return JetScalar._raw(cu * np.cos(a0) - su * np.sin(a0), self.table)

    # -- composition --------------------------------------------------------------
    def compose(self, args: Sequence) -> "JetScalar":
        """Substitute jets (in another variable set) for the *increments* h_i.

        ``args[i]`` replaces ``h_i`` and must have zero constant term so the
        truncated result stays exact.
        """
        if len(args) != self.d:
            raise JetError("compose needs one argument per variable")
        proto = next(a for a in args if isinstance(a, JetScalar))
        t = proto.table
        for a in args:
            if isinstance(a, JetScalar) and abs(a.coeffs[0]) != 0:
                raise JetError("composition arguments must vanish at the base point")
        argc = [a.coeffs if isinstance(a, JetScalar) else np.zeros(t.size) for a in args]
        dtype = np.result_type(self.coeffs, *argc)
        powers: list[list[np.ndarray]] = []
        for a in argc:
            one = np.zeros(t.size, dtype=dtype)
            one[0] = 1
            pl = [one, a.astype(dtype)]
            for _ in range(2, t.p + 1):
                pl.append(proto._mul_coeffs(pl[-1], a))
            powers.append(pl)
        out = np.zeros(t.size, dtype=dtype)
        for c, e in zip(self.coeffs, self.table.exponents):
            if c == 0 or sum(e) > t.p:
                continue
            term = None
            for v, k in enumerate(e):
                if k == 0:
                    continue
                term = powers[v][k] if term is None else proto._mul_coeffs(term, powers[v][k])
            out = out + (c * term if term is not None else c * powers[0][0])
        return JetScalar._raw(out, t)


def jet_lift(x0: Sequence[float], d: int | None = None, p: int = 1, offset: int = 0,
             total_vars: int | None = None) -> list[JetScalar]:
    """Lift a point to jets: coordinate i gets unit slope in direction ``offset + i``.

    Only the first ``d`` coordinates are lifted; the rest stay constant jets.
    ``total_vars`` lets callers reserve extra directions (e.g. for eps).
    """
    n = len(x0)
    d = n if d is None else d
    if d > n:
        raise JetError("cannot lift more directions than coordinates")
    nv = (d + offset) if total_vars is None else total_vars
    out = []
    for i, v in enumerate(x0):
        if i < d:
            out.append(JetScalar.variable(float(v), offset + i, nv, p))
        else:
            out.append(JetScalar.constant(float(v), nv, p))
    return out


def extract(j, multiindex: Sequence[int]):
    """Partial derivative ``d^|m| f / dh^m`` at the base point."""
    if not isinstance(j, JetScalar):
        return j if sum(multiindex) == 0 else 0.0
    key = tuple(multiindex)
    return j.coeff(key) * j.table.factorial[j.table.index[key]]


def derivative_tensor(jets: Sequence[JetScalar], order: int, dirs: Sequence[int],
                      fixed: dict[int, int] | None = None) -> np.ndarray:
    """Symmetric derivative tensor of a vector of jets.

    Returns an array of shape ``(len(jets),) + (len(dirs),) * order`` whose
    entry ``[a, k1, ..., kq]`` is ``d^q f_a / dh_{dirs[k1]} ... dh_{dirs[kq]}``,
    taken with the extra fixed exponents ``fixed`` (e.g. ``{0: i}`` selects the
    eps**i Taylor coefficient when direction 0 is eps).
    """
    fixed = fixed or {}
    d = jets[0].d
    nd = len(dirs)
    out = np.zeros((len(jets),) + (nd,) * order, dtype=np.result_type(*[j.coeffs for j in jets]))
    base = [0] * d
    for v, k in fixed.items():
        base[v] = k
    fixed_fact = math.prod(math.factorial(k) for k in fixed.values())
    for idx in itertools.product(range(nd), repeat=order):
        e = list(base)
        for k in idx:
            e[dirs[k]] += 1
        key = tuple(e)
        deriv_fact = math.prod(math.factorial(e[dirs[k]] - base[dirs[k]]) for k in set(idx))
        for a, jt in enumerate(jets):
            pos = jt.table.index.get(key)
            if pos is None:
                raise JetError(f"jet order {jt.p} too small for multi-index {key}")
            out[(a,) + idx] = jt.coeffs[pos] * deriv_fact
    return out


def value_of(x):
    """Numeric base value of a float, jet or eps-series."""
    if isinstance(x, numbers.Number):
        return x
    c = getattr(x, "coeffs", None)
    if c is not None:
        return c.flat[0]
    return x


def _dispatch(name, real_fn, complex_fn):
    def fn(x):
        if isinstance(x, numbers.Real):
            return real_fn(x)
        if isinstance(x, numbers.Complex):
            return complex_fn(x)
        return getattr(x, name)()

    fn.__name__ = name
    fn.__doc__ = f"{name} over floats, jets and eps-series."
    return fn


sin = _dispatch("sin", math.sin, cmath.sin)
cos = _dispatch("cos", math.cos, cmath.cos)
exp = _dispatch("exp", math.exp, cmath.exp)


# ---------------------------------------------------------------------------
# Partitions and Faa di Bruno sums
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def partitions(l: int) -> tuple[tuple[int, ...], ...]:
    """All ``(b_1, ..., b_l)`` with ``b_1 + 2 b_2 + ... + l b_l = l``."""
    if l == 0:
        return ((),)
    out = []

    def rec(j: int, remaining: int, acc: list[int]):
        if j == 0:
            if remaining == 0:
                out.append(tuple(reversed(acc)))
            return
        for b in range(remaining // j + 1):
            acc.append(b)
            rec(j - 1, remaining - b * j, acc)
            acc.pop()

    rec(l, l, [])
    return tuple(sorted(out))


@lru_cache(maxsize=None)
def partitions_strict(l: int) -> tuple[tuple[int, ...], ...]:
    """The primed set: partitions of ``l`` into parts of size at most ``l - 1``."""
    return tuple(b for b in partitions(l) if b[-1] == 0) if l > 0 else ()


for _l in range(1, 9):
    partitions(_l)
    partitions_strict(_l)


def _contract(tensor: np.ndarray, vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = tensor
    for v in vectors:
        out = out @ v
    return out


def faa_di_bruno_sum(derivative_table, inner_coeffs, i: int, exclude_top: bool = False):
    """Taylor coefficient of eps**i in ``u(v(eps), eps)``.

    ``u(x, eps) = sum_j eps**j u_j(x)`` and ``v(eps) = v_0 + sum_s eps**s v_s``.

    Parameters
    ----------
    derivative_table : sequence
        ``derivative_table[j][L]`` is the L-th derivative tensor of ``u_j`` at
        ``v_0``; the derivative axes are the trailing ``L`` axes.
    inner_coeffs : sequence
        Taylor coefficients ``v_s`` (index 0 is ignored).  Only ``s < i`` are
        read when ``exclude_top`` is set, otherwise ``s <= i``.
    exclude_top : bool
        Drop the linear term ``du_0 . v_i`` so the caller can solve for ``v_i``.

    Notes
    -----
    With Taylor (not derivative) coefficients the weight of a partition
    ``b`` is simply ``1 / (b_1! b_2! ... b_l!)``.
    """
    total = None
    for l in range(0, i + 1):
        j = i - l
        row = derivative_table[j]
        if l == 0:
            term = np.asarray(row[0])
            total = term.copy() if total is None else total + term
            continue
        for b in partitions(l):
            if exclude_top and j == 0 and b[-1] == 1:
                continue
            L = sum(b)
            if L >= len(row) or row[L] is None:
                raise JetError(f"derivative of order {L} of u_{j} not available")
            vecs = []
            weight = 1.0
            for s, bs in enumerate(b, start=1):
                if bs:
                    weight /= math.factorial(bs)
                    vecs.extend([np.asarray(inner_coeffs[s])] * bs)
            term = weight * _contract(np.asarray(row[L]), vecs)
            total = term if total is None else total + term
    return total
