"""Truncated power series in the perturbation parameter eps.

Three carriers live here:

* :class:`EpsSeries`  -- scalar coefficients ``c_0 + c_1 eps + ... + c_K eps^K``
* :class:`SeriesMatrix` -- the same with matrix coefficients of fixed shape
* :class:`SeriesPoly` -- a polynomial in an auxiliary variable (``lambda`` or
  ``omega``) whose coefficients are themselves truncated eps-series

Coefficients beyond the truncation order ``K`` are *unknown*, not zero, so
mixing two orders truncates to the smaller one and the result remembers that
it was truncated (``.truncated``).  Coefficients may be real or complex.
"""

from __future__ import annotations

import math
import numbers
from typing import Callable, Sequence

import numpy as np
from scipy.signal import convolve2d

__all__ = [
    "EpsSeries",
    "SeriesMatrix",
    "SeriesPoly",
    "SeriesError",
    "ring_det",
    "series_arith",
    "series_inv",
    "series_det",
    "series_jet",
]


class SeriesError(ArithmeticError):
    """Raised on shape mismatches, singular constant terms and bad jet orders."""


def _result_dtype(*arrays):
    return np.result_type(float, *arrays)


class EpsSeries:
    """Scalar power series in eps truncated at order ``K``."""

    __slots__ = ("coeffs", "truncated")
    __array_priority__ = 20

    def __init__(self, coeffs, order: int | None = None, truncated: bool = False):
        c = np.atleast_1d(np.asarray(coeffs))
        if c.dtype.kind not in "fc":
            c = c.astype(float)
        if c.ndim != 1:
            raise SeriesError("EpsSeries coefficients must be one-dimensional")
        if order is not None:
            if order < 0:
                raise SeriesError("order must be non-negative")
            if len(c) < order + 1:
                c = np.concatenate([c, np.zeros(order + 1 - len(c), dtype=c.dtype)])
            else:
                c = c[: order + 1]
        self.coeffs = c
        self.truncated = truncated

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, value, order: int) -> "EpsSeries":
        c = np.zeros(order + 1, dtype=_result_dtype(np.asarray(value)))
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, order: int) -> "EpsSeries":
        """The series ``eps`` itself."""
        c = np.zeros(order + 1)
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    # -- basic properties ---------------------------------------------------
    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def value(self):
        return self.coeffs[0]

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, i):
        return self.coeffs[i]

    def __repr__(self):
        return f"EpsSeries({np.array2string(self.coeffs, precision=6)})"

    def __call__(self, eps):
        """Evaluate ``sum c_i eps^i`` (Horner)."""
        out = 0.0 * eps + 0.0 * self.coeffs[-1]
        for c in self.coeffs[::-1]:
            out = out * eps + c
        return out

    def copy(self) -> "EpsSeries":
        return EpsSeries(self.coeffs.copy(), truncated=self.truncated)

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, EpsSeries):
            if other.order == self.order:
                return self.coeffs, other.coeffs, self.truncated or other.truncated
            k = min(self.order, other.order)
            return self.coeffs[: k + 1], other.coeffs[: k + 1], True
        if isinstance(other, numbers.Number) or np.ndim(other) == 0:
            c = np.zeros_like(self.coeffs, dtype=_result_dtype(self.coeffs, np.asarray(other)))
            c[0] = other
            return self.coeffs, c, self.truncated
        return NotImplemented

    def __add__(self, other):
        co = self._coerce(other)
        if co is NotImplemented:
            return NotImplemented
        a, b, tr = co
        return EpsSeries(a + b, truncated=tr)

    __radd__ = __add__

    def __sub__(self, other):
        co = self._coerce(other)
        if co is NotImplemented:
            return NotImplemented
        a, b, tr = co
        return EpsSeries(a - b, truncated=tr)

    def __rsub__(self, other):
        co = self._coerce(other)
        if co is NotImplemented:
            return NotImplemented
        a, b, tr = co
        return EpsSeries(b - a, truncated=tr)

    def __neg__(self):
        return EpsSeries(-self.coeffs, truncated=self.truncated)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, EpsSeries):
            a, b, tr = self._coerce(other)
            return EpsSeries(np.convolve(a, b)[: len(a)], truncated=tr)
        if isinstance(other, numbers.Number) or np.ndim(other) == 0:
            return EpsSeries(self.coeffs * other, truncated=self.truncated)
        return NotImplemented

    __rmul__ = __mul__

    def reciprocal(self) -> "EpsSeries":
        c = self.coeffs
        if c[0] == 0:
            raise SeriesError("series with zero constant term is not invertible")
        out = np.zeros_like(c, dtype=_result_dtype(c))
        out[0] = 1.0 / c[0]
        for k in range(1, len(c)):
            out[k] = -np.dot(c[1 : k + 1], out[k - 1 :: -1][:k]) / c[0]
        return EpsSeries(out, truncated=self.truncated)

    def __truediv__(self, other):
        if isinstance(other, EpsSeries):
            return self * other.reciprocal()
        if isinstance(other, numbers.Number) or np.ndim(other) == 0:
            return EpsSeries(self.coeffs / other, truncated=self.truncated)
        return NotImplemented

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if not isinstance(n, numbers.Integral):
            raise SeriesError("only integer powers of series are supported")
        if n < 0:
            return self.reciprocal() ** (-n)
        out = EpsSeries.constant(1.0, self.order)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        out.truncated = self.truncated
        return out

    # -- elementary functions ----------------------------------------------
    def _nilpotent_powers(self):
        u = EpsSeries(self.coeffs.copy())
        u.coeffs[0] = 0
        pw = [EpsSeries.constant(1.0, self.order), u]
        for _ in range(2, self.order + 1):
            pw.append(pw[-1] * u)
        return pw

    def exp(self):
        pw = self._nilpotent_powers()
        s = sum(p * (1.0 / math.factorial(k)) for k, p in enumerate(pw))
        return s * np.exp(self.coeffs[0])

    def sin(self):
        pw = self._nilpotent_powers()
        c0 = self.coeffs[0]
        cu = sum(p * ((-1) ** (k // 2) / math.factorial(k)) for k, p in enumerate(pw) if k % 2 == 0)
        su = sum(p * ((-1) ** (k // 2) / math.factorial(k)) for k, p in enumerate(pw) if k % 2 == 1)
        return cu * np.sin(c0) + su * np.cos(c0)

    def cos(self):
        pw = self._nilpotent_powers()
        c0 = self.coeffs[0]
        cu = sum(p * ((-1) ** (k // 2) / math.factorial(k)) for k, p in enumerate(pw) if k % 2 == 0)
        su = sum(p * ((-1) ** (k // 2) / math.factorial(k)) for k, p in enumerate(pw) if k % 2 == 1)
        return cu * np.cos(c0) - su * np.sin(c0)

    # -- misc -----------------------------------------------------------------
    def conj(self) -> "EpsSeries":
        return EpsSeries(np.conj(self.coeffs), truncated=self.truncated)

    @property
    def real(self) -> "EpsSeries":
        return EpsSeries(np.real(self.coeffs).copy(), truncated=self.truncated)

    @property
    def imag(self) -> "EpsSeries":
        return EpsSeries(np.imag(self.coeffs).copy(), truncated=self.truncated)

    def jet(self, mu: int) -> "EpsSeries":
        return series_jet(self, mu)

    def leading_order(self, rtol: float = 1e-9, atol: float = 0.0) -> int | None:
        """Index of the first coefficient above ``rtol * max|c|`` (``None`` if all vanish)."""
        mags = np.abs(self.coeffs)
        thresh = max(rtol * mags.max(initial=0.0), atol)
        nz = np.nonzero(mags > thresh)[0]
        return int(nz[0]) if len(nz) else None

    def shift(self, s: int) -> "EpsSeries":
        """Divide by eps**s, dropping the first ``s`` coefficients (assumed zero)."""
        if s > self.order:
            raise SeriesError("cannot shift past the truncation order")
        return EpsSeries(self.coeffs[s:].copy(), truncated=self.truncated)

    def allclose(self, other, atol=1e-12, rtol=0.0) -> bool:
        a, b, _ = self._coerce(other)
        return bool(np.allclose(a, b, atol=atol, rtol=rtol))


class SeriesMatrix:
    """Matrix-valued series: ``coeffs[i]`` is the coefficient matrix of eps**i."""

    __slots__ = ("coeffs", "truncated")
    __array_priority__ = 20

    def __init__(self, coeffs, order: int | None = None, truncated: bool = False):
        c = np.asarray(coeffs)
        if c.dtype.kind not in "fc":
            c = c.astype(float)
        if c.ndim != 3:
            raise SeriesError("SeriesMatrix coefficients must have shape (K+1, rows, cols)")
        if order is not None:
            if c.shape[0] < order + 1:
                pad = np.zeros((order + 1 - c.shape[0],) + c.shape[1:], dtype=c.dtype)
                c = np.concatenate([c, pad])
            else:
                c = c[: order + 1]
        self.coeffs = c
        self.truncated = truncated

    @classmethod
    def identity(cls, n: int, order: int) -> "SeriesMatrix":
        c = np.zeros((order + 1, n, n))
        c[0] = np.eye(n)
        return cls(c)

    @classmethod
    def constant(cls, mat, order: int) -> "SeriesMatrix":
        mat = np.atleast_2d(np.asarray(mat))
        c = np.zeros((order + 1,) + mat.shape, dtype=_result_dtype(mat))
        c[0] = mat
        return cls(c)

    @classmethod
    def from_terms(cls, terms: Sequence, order: int | None = None) -> "SeriesMatrix":
        return cls(np.array([np.atleast_2d(t) for t in terms]), order=order)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape[1:]

    def __getitem__(self, key):
        """``S[i, j]`` gives an EpsSeries entry; ``S[rows, cols]`` with slices a block."""
        r, c = key
        if isinstance(r, numbers.Integral) and isinstance(c, numbers.Integral):
            return EpsSeries(self.coeffs[:, r, c].copy(), truncated=self.truncated)
        return SeriesMatrix(self.coeffs[:, r, c].copy(), truncated=self.truncated)

    def __repr__(self):
        return f"SeriesMatrix(order={self.order}, shape={self.shape})"

    def __call__(self, eps):
        out = np.zeros(self.shape, dtype=np.result_type(self.coeffs, eps))
        for c in self.coeffs[::-1]:
            out = out * eps + c
        return out

    def _coerce(self, other):
        if isinstance(other, SeriesMatrix):
            if other.order == self.order:
                return self.coeffs, other.coeffs, self.truncated or other.truncated
            k = min(self.order, other.order)
            return self.coeffs[: k + 1], other.coeffs[: k + 1], True
        return NotImplemented

    def __add__(self, other):
        co = self._coerce(other)
        if co is NotImplemented:
            return NotImplemented
        a, b, tr = co
        if a.shape[1:] != b.shape[1:]:
            raise SeriesError(f"dimension mismatch {a.shape[1:]} vs {b.shape[1:]}")
        return SeriesMatrix(a + b, truncated=tr)

    def __sub__(self, other):
        co = self._coerce(other)
        if co is NotImplemented:
            return NotImplemented
        a, b, tr = co
        if a.shape[1:] != b.shape[1:]:
            raise SeriesError(f"dimension mismatch {a.shape[1:]} vs {b.shape[1:]}")
        return SeriesMatrix(a - b, truncated=tr)

    def __neg__(self):
        return SeriesMatrix(-self.coeffs, truncated=self.truncated)

    def __mul__(self, other):
        if isinstance(other, EpsSeries):
            k = min(self.order, other.order)
            a, s = self.coeffs[: k + 1], other.coeffs[: k + 1]
            out = np.zeros(a.shape, dtype=_result_dtype(a, s))
            for i in range(k + 1):
                for j in range(k + 1 - i):
                    out[i + j] += s[i] * a[j]
            return SeriesMatrix(out, truncated=self.truncated or other.truncated or k < self.order)
        if isinstance(other, numbers.Number) or np.ndim(other) == 0:
            return SeriesMatrix(self.coeffs * other, truncated=self.truncated)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, np.ndarray):
            other = SeriesMatrix.constant(other, self.order)
        co = self._coerce(other)
        if co is NotImplemented:
            return NotImplemented
        a, b, tr = co
        if a.shape[2] != b.shape[1]:
            raise SeriesError(f"dimension mismatch for product {a.shape[1:]} @ {b.shape[1:]}")
        k = a.shape[0] - 1
        out = np.zeros((k + 1, a.shape[1], b.shape[2]), dtype=_result_dtype(a, b))
        for i in range(k + 1):
            for j in range(k + 1 - i):
                out[i + j] += a[i] @ b[j]
        return SeriesMatrix(out, truncated=tr)

    def __rmatmul__(self, other):
        if isinstance(other, np.ndarray):
            return SeriesMatrix.constant(other, self.order) @ self
        return NotImplemented

    def inv(self) -> "SeriesMatrix":
        return series_inv(self)

    def det(self) -> EpsSeries:
        return series_det(self)

    def jet(self, mu: int) -> "SeriesMatrix":
        return series_jet(self, mu)

    def shift(self, s: int) -> "SeriesMatrix":
        if s > self.order:
            raise SeriesError("cannot shift past the truncation order")
        return SeriesMatrix(self.coeffs[s:].copy(), truncated=self.truncated)

    def norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(c) for c in self.coeffs])

    def leading_order(self, rtol: float = 1e-9, atol: float = 0.0) -> int | None:
        n = self.norms()
        thresh = max(rtol * n.max(initial=0.0), atol)
        nz = np.nonzero(n > thresh)[0]
        return int(nz[0]) if len(nz) else None

    def entries(self) -> list[list[EpsSeries]]:
        r, c = self.shape
        return [[self[i, j] for j in range(c)] for i in range(r)]


def series_arith(a, b, op: str):
    """Ring operation ``op`` in {'add', 'sub', 'mul'} on two series of the same kind."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        if isinstance(a, SeriesMatrix) and isinstance(b, SeriesMatrix):
            return a @ b
        return a * b
    raise ValueError(f"unknown series operation {op!r}")


def series_inv(a):
    """Inverse in the truncated ring.

    The constant term is inverted directly and higher coefficients follow from
    ``X_k = -A_0^{-1} sum_{j=1}^k A_j X_{k-j}``.
    """
    if isinstance(a, EpsSeries):
        return a.reciprocal()
    c = a.coeffs
    r, cc = c.shape[1:]
    if r != cc:
        raise SeriesError("only square series matrices are invertible")
    if np.linalg.cond(c[0]) > 1e14:
        raise SeriesError("constant term of series matrix is singular")
    a0inv = np.linalg.inv(c[0])
    out = np.zeros_like(c, dtype=_result_dtype(c))
    out[0] = a0inv
    for k in range(1, c.shape[0]):
        acc = np.zeros((r, r), dtype=out.dtype)
        for j in range(1, k + 1):
            acc += c[j] @ out[k - j]
        out[k] = -a0inv @ acc
    return SeriesMatrix(out, truncated=a.truncated)


def ring_det(rows: Sequence[Sequence], zero, one=None):
    """Determinant over any commutative ring by Laplace expansion.

    ``rows`` is a square nested sequence of ring elements supporting ``+``,
    ``-`` and ``*``.  Minors are memoised by column subset, so the cost is
    ``O(n 2^n)`` ring products; no division is ever needed.
    """
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise SeriesError("determinant of non-square matrix")
    if n == 0:
        return one if one is not None else zero + 1
    memo: dict[int, object] = {}

    def minor(i: int, mask: int):
        if i == n:
            return None
        key = mask
        if key in memo:
            return memo[key]
        acc = zero
        sign = 1
        for j in range(n):
            if mask & (1 << j):
                continue
            entry = rows[i][j]
            sub = minor(i + 1, mask | (1 << j))
            term = entry if sub is None else entry * sub
            acc = acc + term if sign > 0 else acc - term
            sign = -sign
        memo[key] = acc
        return acc

    return minor(0, 0)


def series_det(A: SeriesMatrix) -> EpsSeries:
    r, c = A.shape
    if r != c:
        raise SeriesError("determinant of non-square series matrix")
    zero = EpsSeries(np.zeros(A.order + 1, dtype=A.coeffs.dtype))
    out = ring_det(A.entries(), zero, EpsSeries.constant(1.0, A.order))
    out.truncated = A.truncated
    return out


def series_jet(a, mu: int):
    """Keep coefficients up to eps**mu (the mu-jet)."""
    if mu < 0 or mu > a.order:
        raise SeriesError(f"jet order {mu} outside 0..{a.order}")
    return type(a)(a.coeffs[: mu + 1].copy(), truncated=a.truncated)


class SeriesPoly:
    """Polynomial in one variable (``x``) with truncated eps-series coefficients.

    ``coeffs[i, d]`` multiplies ``eps**i * x**d``.
    """

    __slots__ = ("coeffs",)
    __array_priority__ = 20

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 2:
            raise SeriesError("SeriesPoly coefficients must have shape (K+1, deg+1)")
        self.coeffs = c

    @classmethod
    def from_series(cls, s: EpsSeries, degree: int = 0) -> "SeriesPoly":
        c = np.zeros((s.order + 1, degree + 1), dtype=complex)
        c[:, degree] = s.coeffs
        return cls(c)

    @classmethod
    def variable(cls, order: int, eps_power: int = 0, scale=1.0) -> "SeriesPoly":
        """The monomial ``scale * eps**eps_power * x``."""
        c = np.zeros((order + 1, 2), dtype=complex)
        if eps_power <= order:
            c[eps_power, 1] = scale
        return cls(c)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def degree(self) -> int:
        nz = np.nonzero(np.any(self.coeffs != 0, axis=0))[0]
        return int(nz[-1]) if len(nz) else 0

    def __repr__(self):
        return f"SeriesPoly(order={self.order}, degree={self.degree})"

    def _pad(self, other: "SeriesPoly"):
        k = min(self.order, other.order)
        d = max(self.coeffs.shape[1], other.coeffs.shape[1])
        a = np.zeros((k + 1, d), dtype=complex)
        b = np.zeros((k + 1, d), dtype=complex)
        a[:, : self.coeffs.shape[1]] = self.coeffs[: k + 1]
        b[:, : other.coeffs.shape[1]] = other.coeffs[: k + 1]
        return a, b

    def _wrap(self, other):
        if isinstance(other, SeriesPoly):
            return other
        if isinstance(other, EpsSeries):
            return SeriesPoly.from_series(other)
        if isinstance(other, numbers.Number):
            c = np.zeros((self.order + 1, 1), dtype=complex)
            c[0, 0] = other
            return SeriesPoly(c)
        return NotImplemented

    def __add__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return NotImplemented
        a, b = self._pad(o)
        return SeriesPoly(a + b)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return NotImplemented
        a, b = self._pad(o)
        return SeriesPoly(a - b)

    def __rsub__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return NotImplemented
        a, b = self._pad(o)
        return SeriesPoly(b - a)

    def __neg__(self):
        return SeriesPoly(-self.coeffs)

    def __mul__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return NotImplemented
        k = min(self.order, o.order)
        out = convolve2d(self.coeffs[: k + 1], o.coeffs[: k + 1])[: k + 1]
        return SeriesPoly(out)

    __rmul__ = __mul__

    def eps_coeff(self, i: int) -> np.ndarray:
        """Polynomial coefficients (ascending powers of x) of eps**i."""
        return self.coeffs[i].copy()

    def x_coeff(self, d: int) -> EpsSeries:
        if d >= self.coeffs.shape[1]:
            return EpsSeries(np.zeros(self.order + 1, dtype=complex))
        return EpsSeries(self.coeffs[:, d].copy())

    def __call__(self, x, eps):
        """Numeric value at ``(x, eps)``."""
        total = 0j
        for i in range(self.order, -1, -1):
            total = total * eps + np.polynomial.polynomial.polyval(x, self.coeffs[i])
        return total

    def derivative(self) -> "SeriesPoly":
        d = self.coeffs.shape[1]
        if d == 1:
            return SeriesPoly(np.zeros((self.order + 1, 1), dtype=complex))
        return SeriesPoly(self.coeffs[:, 1:] * np.arange(1, d))

    def compose_series(self, x: EpsSeries) -> EpsSeries:
        """Substitute an eps-series for x (Horner over the x-degree)."""
        k = min(self.order, x.order)
        xs = EpsSeries(np.asarray(x.coeffs[: k + 1], dtype=complex))
        out = EpsSeries(np.zeros(k + 1, dtype=complex))
        for d in range(self.coeffs.shape[1] - 1, -1, -1):
            out = out * xs + EpsSeries(self.coeffs[: k + 1, d])
        return out

    def shift(self, s: int) -> "SeriesPoly":
        """Divide by eps**s (the dropped rows are expected to vanish)."""
        if s > self.order:
            raise SeriesError("cannot shift past the truncation order")
        return SeriesPoly(self.coeffs[s:].copy())

    def jet(self, mu: int) -> "SeriesPoly":
        if mu < 0 or mu > self.order:
            raise SeriesError(f"jet order {mu} outside 0..{self.order}")
        return SeriesPoly(self.coeffs[: mu + 1].copy())

    def leading_eps_order(self, rtol: float = 1e-9) -> int | None:
        mags = np.abs(self.coeffs).max(axis=1)
        thresh = rtol * mags.max(initial=0.0)
        nz = np.nonzero(mags > thresh)[0]
        return int(nz[0]) if len(nz) else None


def poly_det(rows: Sequence[Sequence[SeriesPoly]]) -> SeriesPoly:
    order = min(e.order for r in rows for e in r)
    zero = SeriesPoly(np.zeros((order + 1, 1), dtype=complex))
    one = SeriesPoly(np.eye(order + 1, 1, dtype=complex))
    return ring_det(rows, zero, one)


def map_entries(mat: SeriesMatrix, fn: Callable[[EpsSeries], object]) -> list[list]:
    return [[fn(e) for e in row] for row in mat.entries()]
