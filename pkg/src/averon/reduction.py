"""Lyapunov-Schmidt reduction onto the manifold of unperturbed periodic orbits.

Two independent routes are provided for the reduced expansion at a point
``alpha``:

* the explicit recursions for ``gamma_i`` and the bifurcation functions
  ``f_i`` as Faa di Bruno sums over derivative tensors of ``g_j``
  (:func:`gamma_coeffs`, :func:`bifurcation_f`);
* a ring solve (:func:`reduced_expansion`): the flow jet is composed with
  ``h = (da, beta(alpha + da) - beta(alpha) + B)`` and the transverse
  equation is solved for ``B`` by chord iteration in the truncated ring of
  ``(eps, da)``.  This gives ``f_j`` and ``gamma_j`` together with all their
  ``alpha``-derivatives, which the branch formulas need.

Both use Taylor coefficients, so every partition weight is ``1 / prod b_s!``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flow import FlowJet, flow_eps_jet
from .jets import JetScalar, derivative_tensor, faa_di_bruno_sum
from .manifold import ManifoldDef
from .system import SystemDef

__all__ = [
    "ManifoldDef",
    "ReductionData",
    "ReducedExpansion",
    "ReductionError",
    "NonSimpleZeroError",
    "ConvergenceError",
    "g_tables",
    "gamma_coeffs",
    "bifurcation_f",
    "reduced_expansion",
    "find_simple_zero",
    "first_nonzero_order",
    "branch_alpha",
    "initial_condition_jet",
    "poincare_jacobian_jet",
    "reduce",
]


class ReductionError(ArithmeticError):
    pass


class NonSimpleZeroError(ReductionError):
    """The zero is not simple; the general (non-simple) case is out of scope."""


class ConvergenceError(ReductionError):
    pass


# ---------------------------------------------------------------------------
# Formula route
# ---------------------------------------------------------------------------

def _flow_at(sys, mfd, alpha, order, flow):
    if flow is None:
        flow = flow_eps_jet(sys, mfd.z_of(alpha), order=order)
    elif flow.order < order:
        raise ReductionError(f"flow jet of order {flow.order} is too short (need {order})")
    return flow


def g_tables(flow: FlowJet, rows: slice, dirs: list[int], jmax: int) -> list[list[np.ndarray]]:
    """``table[j][L]`` = ``L``-th derivative of ``g_j`` (rows ``rows``) along state ``dirs``."""
    n = flow.dim
    table = []
    for j in range(jmax + 1):
        row = []
        for L in range(flow.order - j + 1):
            t = derivative_tensor(flow.jets, L, [1 + d for d in dirs], fixed={0: j})
            if j == 0 and L == 0:
                t = t - flow.base
            if j == 0 and L == 1:
                t = t - np.eye(n)[:, dirs]
            row.append(t[rows])
        table.append(row)
    return table


def gamma_coeffs(sys: SystemDef, mfd: ManifoldDef, alpha, i: int, flow: FlowJet | None = None) -> np.ndarray:
    """``gamma_i(alpha)``: coefficients of ``beta_bar(alpha, eps) = beta(alpha) + sum eps^i gamma_i``."""
    return _gammas(sys, mfd, alpha, i, flow)[i]


def _gammas(sys, mfd, alpha, i, flow):
    n, m = sys.dim, mfd.m
    if m >= n:
        return [np.zeros(0) for _ in range(i + 1)]
    flow = _flow_at(sys, mfd, alpha, i, flow)
    tab = g_tables(flow, slice(m, n), list(range(m, n)), i)
    Delta = tab[0][1]
    if abs(np.linalg.det(Delta)) < 1e-14:
        raise ReductionError("Delta(alpha) is singular")
    gam = [np.asarray(mfd.beta_values(alpha), float)]
    for s in range(1, i + 1):
        rest = faa_di_bruno_sum(tab, gam, s, exclude_top=True)
        gam.append(-np.linalg.solve(Delta, rest))
    return gam


def bifurcation_f(sys: SystemDef, mfd: ManifoldDef, alpha, i: int, flow: FlowJet | None = None) -> np.ndarray:
    """``f_i(alpha)``: eps^i coefficient of ``pi g(alpha, beta_bar(alpha, eps), eps)``."""
    n, m = sys.dim, mfd.m
    flow = _flow_at(sys, mfd, alpha, i, flow)
    if m >= n:
        return flow.g(i)
    gam = _gammas(sys, mfd, alpha, i, flow)
    tab = g_tables(flow, slice(0, m), list(range(m, n)), i)
    return faa_di_bruno_sum(tab, gam, i)


# ---------------------------------------------------------------------------
# Ring route
# ---------------------------------------------------------------------------

@dataclass
class ReducedExpansion:
    """Reduced functions near ``alpha`` as jets in ``(eps, dalpha)``.

    ``F[a]`` is component ``a`` of ``pi d(alpha + dalpha, beta_bar, eps)`` and
    ``B[b]`` is ``beta_bar - beta(alpha + dalpha)``, i.e. ``sum_j eps^j gamma_j``.
    """

    alpha: np.ndarray
    order: int
    F: list[JetScalar]
    B: list[JetScalar]
    beta: list[JetScalar]

    @property
    def m(self) -> int:
        return len(self.alpha)

    def f(self, j: int) -> np.ndarray:
        return self.f_table(j, 0)

    def f_table(self, j: int, L: int) -> np.ndarray:
        return derivative_tensor(self.F, L, list(range(1, self.m + 1)), fixed={0: j})

    def gamma_table(self, j: int, L: int) -> np.ndarray:
        if j == 0:
            if not self.beta:
                return np.zeros((0,) + (self.m,) * L)
            return derivative_tensor(self.beta, L, list(range(1, self.m + 1)))
        if not self.B:
            return np.zeros((0,) + (self.m,) * L)
        return derivative_tensor(self.B, L, list(range(1, self.m + 1)), fixed={0: j})


def reduced_expansion(flow: FlowJet, mfd: ManifoldDef, alpha=None) -> ReducedExpansion:
    """Solve the transverse equation in the truncated ring and return ``pi d``."""
    n = flow.dim
    m = mfd.m
    D = flow.order
    alpha = flow.base[:m] if alpha is None else np.asarray(alpha, float)
    d = m + 1
    p = max(D, 1)
    eps = JetScalar.variable(0.0, 0, d, p)
    da = [JetScalar.variable(0.0, 1 + a, d, p) for a in range(m)]
    beta = mfd.beta_jets(alpha, d, p, offset=1) if m < n else []
    dbeta = []
    for bj in beta:
        c = bj.coeffs.copy()
        c[0] = 0.0
        dbeta.append(JetScalar._raw(c, bj.table))
    z = flow.base

    def disp(B):
        h = da + [db + b for db, b in zip(dbeta, B)]
        out = []
        for a, jt in enumerate(flow.jets):
            comp = jt.compose([eps] + h)
            out.append(comp - z[a] - h[a])
        return out

    if m == n:
        return ReducedExpansion(alpha, D, disp([]), [], [])
    Delta = flow.g_tensor(0, 1)[m:, m:]
    Dinv = np.linalg.inv(Delta)
    B = [JetScalar.constant(0.0, d, p) for _ in range(n - m)]
    for _ in range(D + 2):
        dv = disp(B)
        perp = np.array([x.coeffs for x in dv[m:]])
        perp[:, 0] = 0.0
        corr = Dinv @ perp
        B = [JetScalar._raw(b.coeffs - c, b.table) for b, c in zip(B, corr)]
    dv = disp(B)
    return ReducedExpansion(alpha, D, dv[:m], B, beta)


# ---------------------------------------------------------------------------
# Zeros and branches
# ---------------------------------------------------------------------------

def find_simple_zero(f_r, alpha_guess, tol: float = 1e-12, max_iter: int = 50,
                     det_threshold: float = 1e-8):
    """Damped Newton for a simple zero of ``f_r``.

    ``f_r(alpha)`` returns either the value or ``(value, jacobian)``; without a
    Jacobian central differences are used.  Returns ``(alpha*, jacobian)``.
    """
    x = np.atleast_1d(np.asarray(alpha_guess, float)).copy()

    def ev(a):
        out = f_r(a)
        if isinstance(out, tuple):
            return np.atleast_1d(np.asarray(out[0], float)), np.atleast_2d(np.asarray(out[1], float))
        v = np.atleast_1d(np.asarray(out, float))
        h = 1e-6 * (1 + np.abs(a))
        J = np.column_stack([(np.atleast_1d(f_r(a + h[k] * e)) - np.atleast_1d(f_r(a - h[k] * e))) / (2 * h[k])
                             for k, e in enumerate(np.eye(len(a)))])
        return v, J

    v, J = ev(x)
    res = np.linalg.norm(v, np.inf)
    for _ in range(max_iter):
        if res <= tol:
            break
        try:
            step = np.linalg.solve(J, v)
        except np.linalg.LinAlgError as exc:
            raise NonSimpleZeroError("singular Jacobian during Newton iteration") from exc
        lam = 1.0
        while True:
            xn = x - lam * step
            vn, Jn = ev(xn)
            rn = np.linalg.norm(vn, np.inf)
            if rn < res or lam < 1e-3:
                break
            lam *= 0.5
        stagnant = np.linalg.norm(xn - x, np.inf) <= 1e-14 * (1 + np.linalg.norm(x, np.inf))
        x, v, J = xn, vn, Jn
        if stagnant or (rn >= res and lam < 1e-3):
            res = min(res, rn)
            break
        res = rn
    else:
        if res > tol:
            raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {res:.3e})")
    if res > max(tol, 1e-8):
        raise ConvergenceError(f"Newton stalled with residual {res:.3e}")
    if abs(np.linalg.det(J)) < det_threshold:
        raise NonSimpleZeroError("non-simple zero: det of the Jacobian below threshold; "
                                 "the general multiple-zero case is not supported")
    return x, J


def first_nonzero_order(sys: SystemDef, mfd: ManifoldDef, kmax: int | None = None,
                        points: int = 3, tol: float = 1e-9) -> int:
    """Smallest ``r`` with ``f_r`` not identically zero on the manifold grid."""
    kmax = sys.order if kmax is None else kmax
    grid = mfd.grid(points)
    for r in range(1, kmax + 1):
        # f_r only needs the flow jet through order r
        for a in grid:
            ex = reduced_expansion(flow_eps_jet(sys, mfd.z_of(a), order=r), mfd)
            if np.max(np.abs(ex.f(r))) > tol:
                return r
    raise ReductionError(f"all bifurcation functions vanish on the grid up to order {kmax}")


def branch_alpha(df_r: np.ndarray, u_table, K: int) -> list[np.ndarray]:
    """``alpha_0..alpha_K`` of the zero branch of ``sum_j eps^j u_j(alpha)``.

    ``u_table[j][L]`` is the ``L``-th derivative of ``u_j = f_{r+j}`` at
    ``alpha*`` and ``df_r = u_table[0][1]``.
    """
    out = [None]  # alpha_0 is never read by the sums
    for i in range(1, K + 1):
        rest = faa_di_bruno_sum(u_table, out, i, exclude_top=True)
        out.append(-np.linalg.solve(df_r, rest))
    return out


def initial_condition_jet(alpha_coeffs, gamma_table, K: int) -> tuple[list, list]:
    """``beta_i`` from ``sum_j eps^j gamma_j(alpha(eps))`` with ``gamma_0 = beta``.

    ``gamma_table[j][L]`` holds derivatives of ``gamma_j`` at ``alpha*``.
    Returns ``(beta_coeffs, z_coeffs)`` for orders ``0..K``.
    """
    beta = []
    z = []
    for i in range(K + 1):
        if len(gamma_table[0][0]) == 0:
            b = np.zeros(0)
        elif i == 0:
            b = np.asarray(gamma_table[0][0], float)
        else:
            b = faa_di_bruno_sum(gamma_table, alpha_coeffs, i)
        beta.append(b)
        z.append(np.concatenate([alpha_coeffs[i], b]))
    return beta, z


def poincare_jacobian_jet(flow: FlowJet, z_coeffs, K: int) -> list[np.ndarray]:
    """``A_0..A_K`` with ``d_z Pi(z(eps), eps) = sum eps^j A_j``; ``flow`` is based at ``z_0``."""
    if K + 1 > flow.order and K > 0:
        raise ReductionError(f"A_{K} needs a flow jet of order {K + 1}, have {flow.order}")
    table = [[flow.tensor(j, L + 1) for L in range(flow.order - j)] for j in range(K + 1)]
    out = [table[0][0]]
    for j in range(1, K + 1):
        out.append(faa_di_bruno_sum(table, z_coeffs, j))
    return out


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

@dataclass
class ReductionData:
    alpha_star: np.ndarray
    r: int
    order: int
    gamma: list[np.ndarray]
    f: list[np.ndarray]
    df_r: np.ndarray
    alpha_coeffs: list[np.ndarray]
    beta_coeffs: list[np.ndarray]
    z_coeffs: list[np.ndarray]
    A: list[np.ndarray]
    Gamma: np.ndarray
    Delta: np.ndarray
    dbeta: np.ndarray
    flow: FlowJet = field(repr=False)
    expansion: ReducedExpansion = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.alpha_star)

    @property
    def n(self) -> int:
        return self.flow.dim

    @property
    def z0(self) -> np.ndarray:
        return self.z_coeffs[0]

    def predicted_start(self, eps: float, upto: int | None = None) -> np.ndarray:
        upto = len(self.z_coeffs) - 1 if upto is None else upto
        return sum(eps ** i * self.z_coeffs[i] for i in range(upto + 1))


def _zero_function(sys, mfd, r):
    def fr(alpha):
        fl = flow_eps_jet(sys, mfd.z_of(alpha), order=r + 1)
        ex = reduced_expansion(fl, mfd)
        return ex.f(r), ex.f_table(r, 1)
    return fr


def reduce(sys: SystemDef, mfd: ManifoldDef, alpha_guess, r: int | None = None,
           order: int | None = None, tol: float = 1e-12) -> ReductionData:
    """Locate a simple zero of ``f_r`` and expand the bifurcating branch."""
    n, m = sys.dim, mfd.m
    if r is None:
        r = first_nonzero_order(sys, mfd)
    D = max(sys.order, r + 1) if order is None else order
    if D < r + 1:
        raise ReductionError("jet order must exceed r")
    alpha_star, _ = find_simple_zero(_zero_function(sys, mfd, r), alpha_guess, tol=tol)
    z0 = mfd.z_of(alpha_star)
    flow = flow_eps_jet(sys, z0, order=D)
    ex = reduced_expansion(flow, mfd, alpha_star)
    df_r = ex.f_table(r, 1)
    if abs(np.linalg.det(df_r)) < 1e-8:
        raise NonSimpleZeroError("non-simple zero of the bifurcation function")
    K = D - r
    u_table = [[ex.f_table(r + j, L) for L in range(D - r - j + 1)] for j in range(K + 1)]
    alpha_c = branch_alpha(df_r, u_table, K)
    alpha_c[0] = alpha_star.copy()
    g_table = [[ex.gamma_table(j, L) for L in range(D - j + 1)] for j in range(K + 1)]
    beta_c, z_c = initial_condition_jet(alpha_c, g_table, K)
    KA = min(K, D - 1)
    A = poincare_jacobian_jet(flow, z_c, KA)
    J0 = flow.g_tensor(0, 1)
    gam = [ex.gamma_table(j, 0) for j in range(D + 1)]
    return ReductionData(
        alpha_star=alpha_star, r=r, order=D, gamma=gam[1:],
        f=[ex.f(j) for j in range(D + 1)], df_r=df_r, alpha_coeffs=alpha_c,
        beta_coeffs=beta_c, z_coeffs=z_c, A=A, Gamma=J0[:m, m:], Delta=J0[m:, m:],
        dbeta=mfd.beta_jacobian(alpha_star), flow=flow, expansion=ex,
    )
