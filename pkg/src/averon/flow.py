"""Flow of the system, its variational equation and eps-jets of the time-T map.

The production path is jet transport: the initial state is lifted to
:class:`~averon.jets.JetScalar` values in the variables ``(eps, h_1..h_n)``
and the whole vector of Taylor coefficients is integrated at once.  The
explicit quadrature recursion for ``y_1`` and ``y_2`` is kept only as an
independent cross-check (:func:`recursion_yi`).
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad_vec, solve_ivp

from .jets import JetScalar, derivative_tensor
from .system import SystemDef

__all__ = [
    "IntegrationError",
    "FlowJet",
    "integrate",
    "integrate_with_jacobian",
    "fundamental_matrix",
    "flow_eps_jet",
    "recursion_yi",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
    "DEFAULT_METHOD",
]

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_METHOD = "DOP853"


class IntegrationError(RuntimeError):
    """The adaptive integrator could not reach the final time."""


def _solve(fun, t0, t1, y0, rtol, atol, method, dense=False):
    sol = solve_ivp(fun, (t0, t1), y0, method=method, rtol=rtol, atol=atol, dense_output=dense)
    if sol.status != 0:
        raise IntegrationError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message} "
                               "(step size underflow; the problem may be stiff)")
    return sol


def integrate(sys: SystemDef, z, eps: float = 0.0, t0: float = 0.0, t1: float | None = None,
              tol: float | None = None, *, rtol: float | None = None, atol: float | None = None,
              method: str = DEFAULT_METHOD) -> np.ndarray:
    """State at ``t1`` (default ``t0 + T``) of the solution through ``z`` at ``t0``."""
    rtol = rtol if rtol is not None else (tol if tol is not None else DEFAULT_RTOL)
    atol = atol if atol is not None else (tol * 1e-2 if tol is not None else DEFAULT_ATOL)
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    t1 = t0 + sys.period if t1 is None else t1
    z = np.asarray(z, dtype=float)
    if t1 == t0:
        return z.copy()

    def fun(t, y):
        return np.array([float(v) for v in sys.field(t, list(y), eps)])

    return _solve(fun, t0, t1, z, rtol, atol, method).y[:, -1]


def integrate_samples(sys: SystemDef, z, eps: float, ts, *, rtol: float = DEFAULT_RTOL,
                      atol: float = DEFAULT_ATOL, method: str = DEFAULT_METHOD) -> np.ndarray:
    """States at the increasing times ``ts`` (first entry is the start time)."""
    ts = np.asarray(ts, float)
    z = np.asarray(z, dtype=float)

    def fun(t, y):
        return np.array([float(v) for v in sys.field(t, list(y), eps)])

    sol = _solve(fun, ts[0], ts[-1], z, rtol, atol, method, dense=True)
    return sol.sol(ts).T


def _jet_rhs(sys: SystemDef, table, n: int, eps):
    N = table.size

    def fun(t, y):
        Y = y.reshape(n, N)
        xs = [JetScalar._raw(Y[a], table) for a in range(n)]
        out = np.empty((n, N))
        for a, v in enumerate(sys.field(t, xs, eps)):
            if isinstance(v, JetScalar):
                out[a] = v.coeffs
            else:
                out[a] = 0.0
                out[a, 0] = v
        return out.ravel()

    return fun


def _integrate_jets(sys, x0: Sequence[JetScalar], eps, t0, t1, rtol, atol, method):
    table = x0[0].table
    n = len(x0)
    y0 = np.concatenate([j.coeffs for j in x0]).astype(float)
    sol = _solve(_jet_rhs(sys, table, n, eps), t0, t1, y0, rtol, atol, method)
    Y = sol.y[:, -1].reshape(n, table.size)
    return [JetScalar._raw(Y[a].copy(), table) for a in range(n)]


def integrate_with_jacobian(sys: SystemDef, z, eps: float = 0.0, t0: float = 0.0,
                            t1: float | None = None, *, rtol: float = DEFAULT_RTOL,
                            atol: float = DEFAULT_ATOL, method: str = DEFAULT_METHOD):
    """``(x(t1), d x(t1) / d z)`` from the variational equation along the orbit."""
    t1 = t0 + sys.period if t1 is None else t1
    n = sys.dim
    x0 = [JetScalar.variable(float(v), a, n, 1) for a, v in enumerate(z)]
    if t1 == t0:
        return np.asarray(z, float).copy(), np.eye(n)
    xs = _integrate_jets(sys, x0, eps, t0, t1, rtol, atol, method)
    x = np.array([j.coeffs[0] for j in xs])
    Y = np.array([j.coeffs[1 : n + 1] for j in xs])
    return x, Y


def fundamental_matrix(sys: SystemDef, z, t: float | None = None, eps: float = 0.0, **kw) -> np.ndarray:
    """Principal fundamental matrix ``Y(t, z)`` of the variational equation (``Y(0) = I``)."""
    t = sys.period if t is None else t
    return integrate_with_jacobian(sys, z, eps, 0.0, t, **kw)[1]


@dataclass
class FlowJet:
    """Taylor expansion of ``x(T, z + h, eps)`` in ``(eps, h)`` about ``(0, 0)``.

    ``jets[a]`` is a :class:`JetScalar` in ``n + 1`` variables (direction 0 is
    eps) truncated at total degree ``order``; so ``c_i`` carries z-derivatives
    up to order ``order - i``.
    """

    base: np.ndarray
    order: int
    jets: list[JetScalar]

    @property
    def dim(self) -> int:
        return len(self.base)

    def c(self, i: int) -> np.ndarray:
        """``c_i = y_i(T, z) / i!`` (``c_0 = x(T, z, 0)``)."""
        self._check(i, 0)
        key = (i,) + (0,) * self.dim
        return np.array([j.coeff(key) for j in self.jets])

    def tensor(self, i: int, q: int) -> np.ndarray:
        """``d^q c_i / dz^q`` with shape ``(n,) + (n,) * q``."""
        self._check(i, q)
        return derivative_tensor(self.jets, q, list(range(1, self.dim + 1)), fixed={0: i})

    def g(self, i: int) -> np.ndarray:
        """Averaged function ``g_i(z)``."""
        return self.c(i) - self.base if i == 0 else self.c(i)

    def g_tensor(self, i: int, q: int) -> np.ndarray:
        t = self.tensor(i, q)
        if i == 0 and q == 1:
            t = t - np.eye(self.dim)
        elif i == 0 and q == 0:
            t = t - self.base
        return t

    def displacement_jets(self) -> list[JetScalar]:
        """``d(z + h, eps) - d(z, 0)`` as jets (constant term dropped)."""
        out = []
        for a, j in enumerate(self.jets):
            c = j.coeffs.copy()
            c[0] = 0.0
            c[1 + 1 + a] -= 1.0
            out.append(JetScalar._raw(c, j.table))
        return out

    def _check(self, i: int, q: int):
        if i < 0 or q < 0 or i + q > self.order:
            raise ValueError(f"coefficient c_{i} with {q} z-derivatives needs jet order "
                             f"{i + q} > {self.order}")


def flow_eps_jet(sys: SystemDef, z, k: int | None = None, deriv_order: int = 0,
                 order: int | None = None, *, rtol: float = DEFAULT_RTOL,
                 atol: float = DEFAULT_ATOL, method: str = DEFAULT_METHOD) -> FlowJet:
    """Integrate the jet-lifted state over one period.

    The total degree of the jets is ``order`` if given, else ``k + deriv_order``
    (``k`` defaults to the system's perturbation order).
    """
    if deriv_order < 0:
        raise ValueError("deriv_order must be non-negative")
    k = sys.order if k is None else k
    D = order if order is not None else k + deriv_order
    if D > 8:
        raise ValueError("jet order above 8 is not supported")
    n = sys.dim
    d = n + 1
    p = max(D, 1)
    z = np.asarray(z, dtype=float)
    x0 = [JetScalar.variable(float(v), a + 1, d, p) for a, v in enumerate(z)]
    eps = JetScalar.variable(0.0, 0, d, p)
    xs = _integrate_jets(sys, x0, eps, 0.0, sys.period, rtol, atol, method)
    return FlowJet(z.copy(), D, xs)


# ---------------------------------------------------------------------------
# Quadrature oracle
# ---------------------------------------------------------------------------

def _base_flow_dense(sys: SystemDef, z, rtol=1e-12, atol=1e-14):
    n = sys.dim

    def fun(t, y):
        x = y[:n]
        Yc = y[n:].reshape(n, n)
        J = sys.block_derivatives(0, t, x, 1)
        return np.concatenate([J[0], (J[1] @ Yc).ravel()])

    y0 = np.concatenate([np.asarray(z, float), np.eye(n).ravel()])
    sol = _solve(fun, 0.0, sys.period, y0, rtol, atol, "DOP853", dense=True)

    def at(s):
        y = sol.sol(s)
        return y[:n], y[n:].reshape(n, n)

    return at


def recursion_yi(sys: SystemDef, z, i: int, *, epsabs: float = 1e-12) -> np.ndarray:
    """``y_i(T, z)`` from the explicit variation-of-constants recursion (i <= 2).

    ``y_1(t) = Y(t) int_0^t Y^{-1} F_1`` and
    ``y_2(t) = 2 Y(t) int_0^t Y^{-1} (F_2 + 1/2 d^2F_0[y_1, y_1] + dF_1 y_1)``
    evaluated with adaptive quadrature on a dense base flow.
    """
    if i not in (1, 2):
        raise ValueError("the quadrature oracle is implemented for i = 1, 2 only")
    T = sys.period
    base = _base_flow_dense(sys, z)

    def integrand1(s):
        x, Y = base(s)
        return np.linalg.solve(Y, sys.block(1, s, x))

    def y1(t):
        if t == 0.0:
            return np.zeros(sys.dim)
        val, err = quad_vec(integrand1, 0.0, t, epsabs=epsabs, epsrel=1e-12)
        return base(t)[1] @ val

    if i == 1:
        return y1(T)

    def integrand2(s):
        x, Y = base(s)
        F0 = sys.block_derivatives(0, s, x, 2)
        F1 = sys.block_derivatives(1, s, x, 1)
        F2 = sys.block(2, s, x)
        v = y1(s)
        src = F2 + 0.5 * (F0[2] @ v @ v) + F1[1] @ v
        return np.linalg.solve(Y, src)

    val, err = quad_vec(integrand2, 0.0, T, epsabs=epsabs * 10, epsrel=1e-11)
    return 2.0 * (base(T)[1] @ val)
